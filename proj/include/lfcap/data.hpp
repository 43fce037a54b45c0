#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfcap/lightfield.hpp"
#include "lfcap/linops.hpp"

namespace lfcap {

enum class TextureKind { band_noise, checkerboard, constant };
enum class MaskKind { full, rect, disk };

struct TextureSpec {
    TextureKind kind = TextureKind::band_noise;
    std::uint64_t seed = 0;
    /// Blur radius (band_noise) or square size (checkerboard), in pixels.
    double scale = 2.0;
    /// Fill value for `constant`; low/high levels for the others come from [lo, hi].
    double value = 0.5;
    double lo = 0.05;
    double hi = 0.95;
};

/// Opacity region in center-view pixel coordinates; it moves with its layer.
struct MaskSpec {
    MaskKind kind = MaskKind::full;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0; ///< rect corners (x rows, y columns)
    double cx = 0, cy = 0, radius = 0;      ///< disk
};

struct LayerSpec {
    TextureSpec texture;
    /// Pixel shift between adjacent views; positive moves content toward larger x and y
    /// as u and v grow.
    double disparity = 0.0;
    MaskSpec mask;
};

/// Layered planar scene, composited back to front (layers[0] is the farthest).
struct SceneSpec {
    LfShape shape{5, 5, 32, 32, 1};
    std::vector<LayerSpec> layers;
    /// Texture border in pixels; 0 selects the smallest sufficient margin.
    std::size_t margin = 0;

    nlohmann::json to_json() const;
    static SceneSpec from_json(const nlohmann::json& j);
};

/// Renders every view by shifting each layer by disparity * (u - u_c, v - v_c) with
/// bilinear sampling, so the EPI slope of each layer equals its disparity.
LightField render_synthetic(const SceneSpec& spec);

/// A seeded scene: band-noise background plus `foreground_layers` masked layers.
SceneSpec random_scene(const LfShape& shape, std::uint64_t seed, std::size_t foreground_layers = 1,
                       double max_disparity = 1.0);

/// Dominant line slope of an EPI in pixels per view, from the peak of the row-to-row
/// cross-correlation refined by a parabola fit.
double estimate_epi_slope(const Epi& epi, int max_shift = 4);
/// Same estimate pooled over every horizontal EPI of channel 0.
double estimate_disparity(const LightField& lf, int max_shift = 4);

struct PatchSampler {
    std::size_t patch = 32;
    std::size_t batch = 5;
    std::uint64_t seed = 0;
};

struct PatchOrigin {
    std::size_t x = 0;
    std::size_t y = 0;
    bool operator==(const PatchOrigin&) const = default;
};

/// Crop origins drawn uniformly over the valid range; deterministic for a seed.
std::vector<PatchOrigin> sample_origins(const LfShape& shape, const PatchSampler& sampler);
/// M x N x patch x patch crops with the full angular extent.
std::vector<LightField> sample_patches(const LightField& lf, const PatchSampler& sampler);
/// Each patch comes from a light field chosen uniformly from the dataset.
std::vector<LightField> sample_patches(std::span<const LightField> dataset,
                                       const PatchSampler& sampler);
LightField crop(const LightField& lf, std::size_t x0, std::size_t y0, std::size_t height,
                std::size_t width);

/// Adds i.i.d. Gaussian noise with standard deviation sigma_8bit / 255.
MeasurementSet add_measurement_noise(const MeasurementSet& meas, double sigma_8bit,
                                     std::uint64_t seed);

struct DatasetEntry {
    std::string name;
    LightField lf;
};

/// Loads every image-grid subdirectory and every *.lf file under root, sorted by name.
/// All entries must share angular dimensions and channel count.
std::vector<DatasetEntry> ingest_dataset(const std::filesystem::path& root);

} // namespace lfcap
