#include "lfcap/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lfcap {

namespace {

struct Raster {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::ptrdiff_t r, std::ptrdiff_t c) const
    {
        r = std::clamp<std::ptrdiff_t>(r, 0, static_cast<std::ptrdiff_t>(rows) - 1);
        c = std::clamp<std::ptrdiff_t>(c, 0, static_cast<std::ptrdiff_t>(cols) - 1);
        return values[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)];
    }

    double bilinear(double r, double c) const
    {
        const double r0 = std::floor(r), c0 = std::floor(c);
        const double fr = r - r0, fc = c - c0;
        const auto ir = static_cast<std::ptrdiff_t>(r0), ic = static_cast<std::ptrdiff_t>(c0);
        const double top = (1 - fc) * at(ir, ic) + fc * at(ir, ic + 1);
        const double bottom = (1 - fc) * at(ir + 1, ic) + fc * at(ir + 1, ic + 1);
        return (1 - fr) * top + fr * bottom;
    }
};

void gaussian_blur(Raster& img, double sigma)
{
    if (sigma <= 0)
        return;
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        total += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& w : k)
        w /= total;

    Raster tmp = img;
    for (std::size_t r = 0; r < img.rows; ++r)
        for (std::size_t c = 0; c < img.cols; ++c) {
            double acc = 0;
            for (std::ptrdiff_t i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] *
                       img.at(static_cast<std::ptrdiff_t>(r), static_cast<std::ptrdiff_t>(c) + i);
            tmp.values[r * img.cols + c] = acc;
        }
    for (std::size_t r = 0; r < img.rows; ++r)
        for (std::size_t c = 0; c < img.cols; ++c) {
            double acc = 0;
            for (std::ptrdiff_t i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] *
                       tmp.at(static_cast<std::ptrdiff_t>(r) + i, static_cast<std::ptrdiff_t>(c));
            img.values[r * img.cols + c] = acc;
        }
}

// Texture raster for one channel. Raster cell (r, c) corresponds to center-view
// pixel (r - margin, c - margin).
Raster render_texture(const TextureSpec& t, std::size_t rows, std::size_t cols,
                      std::size_t margin, std::size_t channel)
{
    Raster img{rows, cols, std::vector<double>(rows * cols, t.value)};
    switch (t.kind) {
    case TextureKind::constant:
        break;
    case TextureKind::checkerboard: {
        const double period = std::max(t.scale, 1.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double x = static_cast<double>(r) - static_cast<double>(margin);
                const double y = static_cast<double>(c) - static_cast<double>(margin);
                const auto parity = static_cast<long long>(std::floor(x / period) +
                                                           std::floor(y / period));
                const bool on = (parity % 2 + 2) % 2 == 1;
                // Color channels get mirrored contrast so the planes differ.
                const bool flip = channel == 1;
                img.values[r * cols + c] = (on != flip) ? t.hi : t.lo;
            }
        break;
    }
    case TextureKind::band_noise: {
        std::mt19937_64 rng(t.seed * 3 + channel);
        std::normal_distribution<double> dist(0.0, 1.0);
        for (double& v : img.values)
            v = dist(rng);
        gaussian_blur(img, t.scale);
        const auto [mn, mx] = std::minmax_element(img.values.begin(), img.values.end());
        const double lo = *mn, span = std::max(*mx - *mn, 1e-12);
        for (double& v : img.values)
            v = t.lo + (t.hi - t.lo) * (v - lo) / span;
        break;
    }
    }
    return img;
}

Raster render_mask(const MaskSpec& m, std::size_t rows, std::size_t cols, std::size_t margin)
{
    Raster img{rows, cols, std::vector<double>(rows * cols, 1.0)};
    if (m.kind == MaskKind::full)
        return img;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const double x = static_cast<double>(r) - static_cast<double>(margin);
            const double y = static_cast<double>(c) - static_cast<double>(margin);
            bool inside = false;
            if (m.kind == MaskKind::rect)
                inside = x >= m.x0 && x < m.x1 && y >= m.y0 && y < m.y1;
            else
                inside = (x - m.cx) * (x - m.cx) + (y - m.cy) * (y - m.cy) <= m.radius * m.radius;
            img.values[r * cols + c] = inside ? 1.0 : 0.0;
        }
    return img;
}

std::string texture_name(TextureKind k)
{
    switch (k) {
    case TextureKind::band_noise: return "band_noise";
    case TextureKind::checkerboard: return "checkerboard";
    case TextureKind::constant: return "constant";
    }
    return "constant";
}

TextureKind texture_kind(const std::string& s)
{
    if (s == "band_noise") return TextureKind::band_noise;
    if (s == "checkerboard") return TextureKind::checkerboard;
    if (s == "constant") return TextureKind::constant;
    throw ValidationError("unknown texture kind " + s);
}

std::string mask_name(MaskKind k)
{
    switch (k) {
    case MaskKind::full: return "full";
    case MaskKind::rect: return "rect";
    case MaskKind::disk: return "disk";
    }
    return "full";
}

MaskKind mask_kind(const std::string& s)
{
    if (s == "full") return MaskKind::full;
    if (s == "rect") return MaskKind::rect;
    if (s == "disk") return MaskKind::disk;
    throw ValidationError("unknown mask kind " + s);
}

} // namespace

nlohmann::json SceneSpec::to_json() const
{
    nlohmann::json layers_json = nlohmann::json::array();
    for (const auto& l : layers)
        layers_json.push_back({
            {"disparity", l.disparity},
            {"texture",
             {{"kind", texture_name(l.texture.kind)}, {"seed", l.texture.seed},
              {"scale", l.texture.scale}, {"value", l.texture.value}, {"lo", l.texture.lo},
              {"hi", l.texture.hi}}},
            {"mask",
             {{"kind", mask_name(l.mask.kind)}, {"x0", l.mask.x0}, {"y0", l.mask.y0},
              {"x1", l.mask.x1}, {"y1", l.mask.y1}, {"cx", l.mask.cx}, {"cy", l.mask.cy},
              {"radius", l.mask.radius}}},
        });
    return {{"M", shape.M}, {"N", shape.N}, {"H", shape.H}, {"W", shape.W},
            {"channels", shape.C}, {"margin", margin}, {"layers", layers_json}};
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j)
{
    try {
        SceneSpec s;
        s.shape = {j.at("M").get<std::size_t>(), j.at("N").get<std::size_t>(),
                   j.at("H").get<std::size_t>(), j.at("W").get<std::size_t>(),
                   j.value("channels", std::size_t{1})};
        s.margin = j.value("margin", std::size_t{0});
        for (const auto& lj : j.at("layers")) {
            LayerSpec l;
            l.disparity = lj.value("disparity", 0.0);
            if (lj.contains("texture")) {
                const auto& t = lj["texture"];
                l.texture.kind = texture_kind(t.value("kind", std::string("band_noise")));
                l.texture.seed = t.value("seed", std::uint64_t{0});
                l.texture.scale = t.value("scale", 2.0);
                l.texture.value = t.value("value", 0.5);
                l.texture.lo = t.value("lo", 0.05);
                l.texture.hi = t.value("hi", 0.95);
            }
            if (lj.contains("mask")) {
                const auto& m = lj["mask"];
                l.mask.kind = mask_kind(m.value("kind", std::string("full")));
                l.mask.x0 = m.value("x0", 0.0);
                l.mask.y0 = m.value("y0", 0.0);
                l.mask.x1 = m.value("x1", 0.0);
                l.mask.y1 = m.value("y1", 0.0);
                l.mask.cx = m.value("cx", 0.0);
                l.mask.cy = m.value("cy", 0.0);
                l.mask.radius = m.value("radius", 0.0);
            }
            s.layers.push_back(l);
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed scene spec: ") + e.what());
    }
}

LightField render_synthetic(const SceneSpec& spec)
{
    const LfShape& s = spec.shape;
    validate_shape(s);
    if (spec.layers.empty())
        throw ValidationError("scene needs at least one layer");
    const double uc = (static_cast<double>(s.M) - 1) / 2;
    const double vc = (static_cast<double>(s.N) - 1) / 2;
    const double reach = std::max(uc, vc);
    double max_disp = 0;
    for (const auto& l : spec.layers) {
        if (!std::isfinite(l.disparity))
            throw ValidationError("layer disparity must be finite");
        max_disp = std::max(max_disp, std::abs(l.disparity));
    }
    const auto needed = static_cast<std::size_t>(std::ceil(max_disp * reach)) + 1;
    const std::size_t margin = spec.margin == 0 ? needed : spec.margin;
    if (margin < needed)
        throw ValidationError("texture margin " + std::to_string(margin) +
                              " px is smaller than the " + std::to_string(needed) +
                              " px the largest view shift requires");

    const std::size_t rows = s.H + 2 * margin, cols = s.W + 2 * margin;
    std::vector<double> out(s.size(), 0.0);
    for (const auto& layer : spec.layers) {
        const Raster mask = render_mask(layer.mask, rows, cols, margin);
        for (std::size_t c = 0; c < s.C; ++c) {
            const Raster tex = render_texture(layer.texture, rows, cols, margin, c);
            for (std::size_t u = 0; u < s.M; ++u)
                for (std::size_t v = 0; v < s.N; ++v) {
                    const double du = layer.disparity * (static_cast<double>(u) - uc);
                    const double dv = layer.disparity * (static_cast<double>(v) - vc);
                    for (std::size_t x = 0; x < s.H; ++x)
                        for (std::size_t y = 0; y < s.W; ++y) {
                            const double r = static_cast<double>(x + margin) - du;
                            const double q = static_cast<double>(y + margin) - dv;
                            const double alpha = mask.bilinear(r, q);
                            double& dst = out[canonical_index(s, u, v, x, y, c)];
                            dst = alpha * tex.bilinear(r, q) + (1 - alpha) * dst;
                        }
                }
        }
    }
    std::vector<float> data(out.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        data[i] = static_cast<float>(std::clamp(out[i], 0.0, 1.0));
    return LightField(s, std::move(data));
}

SceneSpec random_scene(const LfShape& shape, std::uint64_t seed, std::size_t foreground_layers,
                       double max_disparity)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SceneSpec spec;
    spec.shape = shape;
    LayerSpec bg;
    bg.texture.kind = TextureKind::band_noise;
    bg.texture.seed = rng();
    bg.texture.scale = 1.5 + 2.0 * unit(rng);
    bg.disparity = -max_disparity * unit(rng);
    spec.layers.push_back(bg);
    for (std::size_t i = 0; i < foreground_layers; ++i) {
        LayerSpec fg;
        fg.texture.kind = unit(rng) < 0.7 ? TextureKind::band_noise : TextureKind::checkerboard;
        fg.texture.seed = rng();
        fg.texture.scale = fg.texture.kind == TextureKind::checkerboard ? 3.0 + 4.0 * unit(rng)
                                                                         : 1.0 + 2.0 * unit(rng);
        fg.disparity = max_disparity * unit(rng);
        const double h = static_cast<double>(shape.H), w = static_cast<double>(shape.W);
        if (unit(rng) < 0.5) {
            fg.mask.kind = MaskKind::rect;
            fg.mask.x0 = h * 0.5 * unit(rng);
            fg.mask.y0 = w * 0.5 * unit(rng);
            fg.mask.x1 = fg.mask.x0 + h * (0.3 + 0.4 * unit(rng));
            fg.mask.y1 = fg.mask.y0 + w * (0.3 + 0.4 * unit(rng));
        } else {
            fg.mask.kind = MaskKind::disk;
            fg.mask.cx = h * (0.2 + 0.6 * unit(rng));
            fg.mask.cy = w * (0.2 + 0.6 * unit(rng));
            fg.mask.radius = std::min(h, w) * (0.15 + 0.2 * unit(rng));
        }
        spec.layers.push_back(fg);
    }
    return spec;
}

namespace {

// Correlation numerator and energies for every shift, accumulated over row pairs.
struct ShiftStats {
    std::vector<double> cross, e0, e1;
    explicit ShiftStats(int max_shift)
        : cross(2 * max_shift + 1), e0(2 * max_shift + 1), e1(2 * max_shift + 1)
    { }
};

void accumulate_rows(const Epi& epi, int max_shift, ShiftStats& st)
{
    const auto cols = static_cast<int>(epi.cols);
    for (std::size_t r = 0; r + 1 < epi.rows; ++r) {
        double m0 = 0, m1 = 0;
        for (int y = 0; y < cols; ++y) {
            m0 += epi(r, static_cast<std::size_t>(y));
            m1 += epi(r + 1, static_cast<std::size_t>(y));
        }
        m0 /= cols;
        m1 /= cols;
        for (int s = -max_shift; s <= max_shift; ++s) {
            const auto k = static_cast<std::size_t>(s + max_shift);
            for (int y = std::max(0, -s); y < std::min(cols, cols - s); ++y) {
                const double a = epi(r, static_cast<std::size_t>(y)) - m0;
                const double b = epi(r + 1, static_cast<std::size_t>(y + s)) - m1;
                st.cross[k] += a * b;
                st.e0[k] += a * a;
                st.e1[k] += b * b;
            }
        }
    }
}

double peak_of(const ShiftStats& st, int max_shift)
{
    std::vector<double> corr(st.cross.size());
    for (std::size_t k = 0; k < corr.size(); ++k) {
        const double denom = std::sqrt(st.e0[k] * st.e1[k]);
        corr[k] = denom > 0 ? st.cross[k] / denom : -1.0;
    }
    const auto best = static_cast<std::size_t>(
        std::max_element(corr.begin(), corr.end()) - corr.begin());
    double offset = 0;
    if (best > 0 && best + 1 < corr.size()) {
        const double a = corr[best - 1], b = corr[best], c = corr[best + 1];
        const double denom = a - 2 * b + c;
        if (denom < 0)
            offset = 0.5 * (a - c) / denom;
    }
    return static_cast<double>(best) - max_shift + offset;
}

} // namespace

double estimate_epi_slope(const Epi& epi, int max_shift)
{
    if (epi.rows < 2 || epi.cols <= static_cast<std::size_t>(2 * max_shift))
        throw ValidationError("EPI too small for slope estimation");
    ShiftStats st(max_shift);
    accumulate_rows(epi, max_shift, st);
    return peak_of(st, max_shift);
}

double estimate_disparity(const LightField& lf, int max_shift)
{
    const auto& s = lf.shape();
    if (s.N < 2 || s.W <= static_cast<std::size_t>(2 * max_shift))
        throw ValidationError("light field too small for disparity estimation");
    ShiftStats st(max_shift);
    for (std::size_t u = 0; u < s.M; ++u)
        for (std::size_t x = 0; x < s.H; ++x)
            accumulate_rows(extract_epi(lf, EpiOrientation::horizontal, u, x), max_shift, st);
    return peak_of(st, max_shift);
}

} // namespace lfcap
