#include "lfcap/data.hpp"

#include <cmath>
#include <random>

namespace lfcap {

namespace {

void check_patch(const LfShape& shape, const PatchSampler& sampler)
{
    if (sampler.patch == 0 || sampler.patch > shape.H || sampler.patch > shape.W)
        throw ValidationError("patch size " + std::to_string(sampler.patch) +
                              " does not fit light field " + to_string(shape));
}

PatchOrigin draw_origin(const LfShape& shape, std::size_t patch, std::mt19937_64& rng)
{
    std::uniform_int_distribution<std::size_t> dx(0, shape.H - patch);
    std::uniform_int_distribution<std::size_t> dy(0, shape.W - patch);
    const std::size_t x = dx(rng);
    return {x, dy(rng)};
}

} // namespace

std::vector<PatchOrigin> sample_origins(const LfShape& shape, const PatchSampler& sampler)
{
    check_patch(shape, sampler);
    std::mt19937_64 rng(sampler.seed);
    std::vector<PatchOrigin> origins(sampler.batch);
    for (auto& o : origins)
        o = draw_origin(shape, sampler.patch, rng);
    return origins;
}

LightField crop(const LightField& lf, std::size_t x0, std::size_t y0, std::size_t height,
                std::size_t width)
{
    const auto& s = lf.shape();
    if (height == 0 || width == 0 || x0 + height > s.H || y0 + width > s.W)
        throw ValidationError("crop window outside light field " + to_string(s));
    LfShape out_shape = s;
    out_shape.H = height;
    out_shape.W = width;
    std::vector<float> out(out_shape.size());
    const std::size_t row = width * s.C;
    for (std::size_t u = 0; u < s.M; ++u)
        for (std::size_t v = 0; v < s.N; ++v)
            for (std::size_t x = 0; x < height; ++x) {
                const float* src = lf.data().data() + canonical_index(s, u, v, x0 + x, y0);
                std::copy(src, src + row,
                          out.begin() + static_cast<std::ptrdiff_t>(
                                            canonical_index(out_shape, u, v, x, 0)));
            }
    return LightField(out_shape, std::move(out));
}

std::vector<LightField> sample_patches(const LightField& lf, const PatchSampler& sampler)
{
    std::vector<LightField> patches;
    for (const auto& o : sample_origins(lf.shape(), sampler))
        patches.push_back(crop(lf, o.x, o.y, sampler.patch, sampler.patch));
    return patches;
}

std::vector<LightField> sample_patches(std::span<const LightField> dataset,
                                       const PatchSampler& sampler)
{
    if (dataset.empty())
        throw ValidationError("cannot sample patches from an empty dataset");
    for (const auto& lf : dataset)
        check_patch(lf.shape(), sampler);
    std::mt19937_64 rng(sampler.seed);
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    std::vector<LightField> patches;
    patches.reserve(sampler.batch);
    for (std::size_t i = 0; i < sampler.batch; ++i) {
        const LightField& lf = dataset[pick(rng)];
        const auto o = draw_origin(lf.shape(), sampler.patch, rng);
        patches.push_back(crop(lf, o.x, o.y, sampler.patch, sampler.patch));
    }
    return patches;
}

MeasurementSet add_measurement_noise(const MeasurementSet& meas, double sigma_8bit,
                                     std::uint64_t seed)
{
    if (!(sigma_8bit >= 0.0) || !std::isfinite(sigma_8bit))
        throw ValidationError("noise sigma must be a finite nonnegative number");
    MeasurementSet out = meas;
    out.noise_sigma = sigma_8bit;
    if (sigma_8bit == 0.0)
        return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma_8bit / 255.0);
    for (float& v : out.data)
        v = static_cast<float>(v + dist(rng));
    return out;
}

} // namespace lfcap
