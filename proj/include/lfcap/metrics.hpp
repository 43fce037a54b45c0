#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "lfcap/lightfield.hpp"

namespace lfcap {

/// Returned by psnr for identical inputs.
inline constexpr double kPsnrExact = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) over all samples; kPsnrExact when MSE is zero.
double psnr(std::span<const float> a, std::span<const float> b, double peak = 1.0);
double psnr(const LightField& a, const LightField& b, double peak = 1.0);

/// Single-channel image, row-major.
struct Image2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

Image2D to_image(const Epi& epi);
/// Channel c of view (u, v).
Image2D view_image(const LightField& lf, std::size_t u, std::size_t v, std::size_t c = 0);

/// SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03 and dynamic range 1,
/// averaged over every position where the window fits. Throws when an image is smaller
/// than the window.
double ssim(const Image2D& a, const Image2D& b);
/// Same with the window shrunk to min(11, rows) x min(11, cols) and the Gaussian renormalized.
double ssim_clipped(const Image2D& a, const Image2D& b);

/// Mean SSIM over every view and channel.
double lf_ssim(const LightField& recon, const LightField& gt);
/// Mean clipped-window SSIM over every horizontal and vertical EPI of every channel.
double epi_ssim(const LightField& recon, const LightField& gt);

/// PSNR of each sub-aperture image, indexed (u, v).
struct ViewPsnrMap {
    std::size_t M = 0;
    std::size_t N = 0;
    std::vector<double> values;

    double operator()(std::size_t u, std::size_t v) const { return values[u * N + v]; }
    /// Average of the finite entries, or kPsnrExact when all are exact.
    double mean() const;
};

ViewPsnrMap per_view_psnr(const LightField& recon, const LightField& gt, double peak = 1.0);

/// |luma(recon) - luma(gt)| for view (u, v), using Rec.601 weights on color input.
Image2D luma_difference(const LightField& recon, const LightField& gt, std::size_t u,
                        std::size_t v);

void write_psnr_map_csv(const ViewPsnrMap& map, const std::filesystem::path& path);
/// Blue-to-red color ramp of values mapped linearly from [lo, hi]; non-finite values
/// render white.
void write_false_color_png(const Image2D& image, double lo, double hi,
                           const std::filesystem::path& path);

} // namespace lfcap
