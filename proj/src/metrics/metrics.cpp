#include "lfcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "lfcap/lf_io.hpp"

namespace lfcap {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void same_shape(const LightField& a, const LightField& b)
{
    if (!(a.shape() == b.shape()))
        throw ValidationError("shape mismatch: " + to_string(a.shape()) + " vs " +
                              to_string(b.shape()));
}

std::vector<double> gaussian(std::size_t n)
{
    std::vector<double> g(n);
    const double center = (static_cast<double>(n) - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(i) - center;
        g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        total += g[i];
    }
    for (double& v : g)
        v /= total;
    return g;
}

double ssim_window(const Image2D& a, const Image2D& b, std::size_t wr, std::size_t wc)
{
    if (a.rows != b.rows || a.cols != b.cols)
        throw ValidationError("ssim inputs differ in shape");
    if (a.rows < wr || a.cols < wc || wr == 0 || wc == 0)
        throw ValidationError("image " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                              " is smaller than the " + std::to_string(wr) + "x" +
                              std::to_string(wc) + " ssim window");
    const auto gr = gaussian(wr), gc = gaussian(wc);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r0 = 0; r0 + wr <= a.rows; ++r0)
        for (std::size_t c0 = 0; c0 + wc <= a.cols; ++c0) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < wr; ++i)
                for (std::size_t j = 0; j < wc; ++j) {
                    const double w = gr[i] * gc[j];
                    const double x = a(r0 + i, c0 + j), y = b(r0 + i, c0 + j);
                    ma += w * x;
                    mb += w * y;
                    saa += w * x * x;
                    sbb += w * y * y;
                    sab += w * x * y;
                }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
                     ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
            ++count;
        }
    return total / static_cast<double>(count);
}

} // namespace

double psnr(std::span<const float> a, std::span<const float> b, double peak)
{
    if (a.size() != b.size())
        throw ValidationError("psnr inputs differ in size");
    if (a.empty())
        throw ValidationError("psnr of empty inputs");
    if (!(peak > 0.0))
        throw ValidationError("psnr peak must be positive");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sse += d * d;
    }
    if (sse == 0.0)
        return kPsnrExact;
    return 10.0 * std::log10(peak * peak / (sse / static_cast<double>(a.size())));
}

double psnr(const LightField& a, const LightField& b, double peak)
{
    same_shape(a, b);
    return psnr(a.data(), b.data(), peak);
}

Image2D to_image(const Epi& epi)
{
    return {epi.rows, epi.cols, std::vector<double>(epi.values.begin(), epi.values.end())};
}

Image2D view_image(const LightField& lf, std::size_t u, std::size_t v, std::size_t c)
{
    const LfShape& s = lf.shape();
    Image2D img{s.H, s.W, std::vector<double>(s.pixels())};
    for (std::size_t x = 0; x < s.H; ++x)
        for (std::size_t y = 0; y < s.W; ++y)
            img.values[x * s.W + y] = lf.at(u, v, x, y, c);
    return img;
}

double ssim(const Image2D& a, const Image2D& b)
{
    return ssim_window(a, b, kWindow, kWindow);
}

double ssim_clipped(const Image2D& a, const Image2D& b)
{
    return ssim_window(a, b, std::min(kWindow, a.rows), std::min(kWindow, a.cols));
}

double lf_ssim(const LightField& recon, const LightField& gt)
{
    same_shape(recon, gt);
    const LfShape& s = gt.shape();
    double total = 0.0;
    for (std::size_t u = 0; u < s.M; ++u)
        for (std::size_t v = 0; v < s.N; ++v)
            for (std::size_t c = 0; c < s.C; ++c)
                total += ssim(view_image(recon, u, v, c), view_image(gt, u, v, c));
    return total / static_cast<double>(s.views() * s.C);
}

double epi_ssim(const LightField& recon, const LightField& gt)
{
    same_shape(recon, gt);
    const LfShape& s = gt.shape();
    double total = 0.0;
    std::size_t count = 0;
    auto add = [&](EpiOrientation o, std::size_t angular, std::size_t spatial, std::size_t c) {
        total += ssim_clipped(to_image(extract_epi(recon, o, angular, spatial, c)),
                              to_image(extract_epi(gt, o, angular, spatial, c)));
        ++count;
    };
    for (std::size_t c = 0; c < s.C; ++c) {
        for (std::size_t u = 0; u < s.M; ++u)
            for (std::size_t x = 0; x < s.H; ++x)
                add(EpiOrientation::horizontal, u, x, c);
        for (std::size_t v = 0; v < s.N; ++v)
            for (std::size_t y = 0; y < s.W; ++y)
                add(EpiOrientation::vertical, v, y, c);
    }
    return total / static_cast<double>(count);
}

double ViewPsnrMap::mean() const
{
    double total = 0.0;
    std::size_t finite = 0;
    for (double v : values)
        if (std::isfinite(v)) {
            total += v;
            ++finite;
        }
    return finite == 0 ? kPsnrExact : total / static_cast<double>(finite);
}

ViewPsnrMap per_view_psnr(const LightField& recon, const LightField& gt, double peak)
{
    same_shape(recon, gt);
    const LfShape& s = gt.shape();
    ViewPsnrMap map{s.M, s.N, std::vector<double>(s.views())};
    for (std::size_t u = 0; u < s.M; ++u)
        for (std::size_t v = 0; v < s.N; ++v)
            map.values[u * s.N + v] = psnr(recon.view(u, v), gt.view(u, v), peak);
    return map;
}

Image2D luma_difference(const LightField& recon, const LightField& gt, std::size_t u,
                        std::size_t v)
{
    same_shape(recon, gt);
    const LfShape& s = gt.shape();
    if (u >= s.M || v >= s.N)
        throw ValidationError("view index out of range");
    auto luma = [&](const LightField& lf, std::size_t x, std::size_t y) {
        if (s.C == 1)
            return static_cast<double>(lf.at(u, v, x, y));
        return 0.299 * lf.at(u, v, x, y, 0) + 0.587 * lf.at(u, v, x, y, 1) +
               0.114 * lf.at(u, v, x, y, 2);
    };
    Image2D img{s.H, s.W, std::vector<double>(s.pixels())};
    for (std::size_t x = 0; x < s.H; ++x)
        for (std::size_t y = 0; y < s.W; ++y)
            img.values[x * s.W + y] = std::abs(luma(recon, x, y) - luma(gt, x, y));
    return img;
}

void write_psnr_map_csv(const ViewPsnrMap& map, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << std::setprecision(10);
    for (std::size_t u = 0; u < map.M; ++u) {
        for (std::size_t v = 0; v < map.N; ++v) {
            if (v)
                out << ',';
            const double p = map(u, v);
            if (std::isfinite(p))
                out << p;
            else
                out << "inf";
        }
        out << '\n';
    }
    if (!out)
        throw IoError("failed writing " + path.string());
}

void write_false_color_png(const Image2D& image, double lo, double hi,
                           const std::filesystem::path& path)
{
    if (!(hi > lo))
        throw ValidationError("false-color range must satisfy hi > lo");
    Image8 out{image.rows, image.cols, 3, std::vector<std::uint8_t>(image.values.size() * 3)};
    for (std::size_t i = 0; i < image.values.size(); ++i) {
        std::uint8_t* px = &out.pixels[i * 3];
        const double v = image.values[i];
        if (!std::isfinite(v)) {
            px[0] = px[1] = px[2] = 255;
            continue;
        }
        const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        // blue -> cyan -> yellow -> red
        const double r = std::clamp(2.0 * t - 0.5, 0.0, 1.0);
        const double g = 1.0 - std::abs(2.0 * t - 1.0);
        const double b = std::clamp(1.5 - 2.0 * t, 0.0, 1.0);
        px[0] = static_cast<std::uint8_t>(std::lround(r * 255));
        px[1] = static_cast<std::uint8_t>(std::lround(g * 255));
        px[2] = static_cast<std::uint8_t>(std::lround(b * 255));
    }
    write_png(out, path);
}

} // namespace lfcap
