#include "lfcap/linops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "lfcap/binary.hpp"

namespace lfcap {

std::size_t measurement_count(std::size_t M, std::size_t N, std::size_t ku, std::size_t kv)
{
    if (ku < 1 || kv < 1 || ku > M || kv > N)
        throw ValidationError("kernel " + std::to_string(ku) + "x" + std::to_string(kv) +
                              " does not fit angular patch " + std::to_string(M) + "x" +
                              std::to_string(N));
    return (M - ku + 1) * (N - kv + 1);
}

AngularGeometry::AngularGeometry(std::size_t M, std::size_t N, std::size_t ku, std::size_t kv)
    : M(M), N(N), ku(ku), kv(kv)
{
    measurement_count(M, N, ku, kv);
}

ApertureCode::ApertureCode(std::size_t ku, std::size_t kv, std::vector<double> weights,
                           bool per_channel, std::size_t channels)
    : ku_(ku), kv_(kv), per_channel_(per_channel), channels_(channels), weights_(std::move(weights))
{
    if (ku == 0 || kv == 0)
        throw ValidationError("aperture code must be at least 1x1");
    if (channels != 1 && channels != 3)
        throw ValidationError("aperture code channel count must be 1 or 3");
    if (weights_.size() != mask_count() * ku * kv)
        throw ValidationError("aperture code expects " + std::to_string(mask_count() * ku * kv) +
                              " weights, got " + std::to_string(weights_.size()));
    for (double w : weights_)
        if (!(w >= 0.0 && w <= 1.0))
            throw ValidationError("aperture weight " + std::to_string(w) + " outside [0, 1]");
}

ApertureCode ApertureCode::random(std::size_t ku, std::size_t kv, std::uint64_t seed,
                                  bool per_channel, std::size_t channels)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> w((per_channel ? channels : 1) * ku * kv);
    for (double& x : w)
        x = dist(rng);
    return ApertureCode(ku, kv, std::move(w), per_channel, channels);
}

ApertureCode ApertureCode::ones(std::size_t ku, std::size_t kv)
{
    return ApertureCode(ku, kv, std::vector<double>(ku * kv, 1.0));
}

ApertureCode ApertureCode::selector(std::size_t ku, std::size_t kv, std::size_t a, std::size_t b)
{
    if (a >= ku || b >= kv)
        throw ValidationError("selector position outside the kernel");
    std::vector<double> w(ku * kv, 0.0);
    w[a * kv + b] = 1.0;
    return ApertureCode(ku, kv, std::move(w));
}

void ApertureCode::check_fits(const LfShape& shape) const
{
    measurement_count(shape.M, shape.N, ku_, kv_);
    if (per_channel_ && shape.C != channels_)
        throw ValidationError("per-channel code has " + std::to_string(channels_) +
                              " masks but the light field has " + std::to_string(shape.C) +
                              " channels");
}

nlohmann::json ApertureCode::to_json() const
{
    return {{"ku", ku_}, {"kv", kv_}, {"per_channel", per_channel_}, {"channels", channels_},
            {"weights", weights_}};
}

ApertureCode ApertureCode::from_json(const nlohmann::json& j)
{
    try {
        return ApertureCode(j.at("ku").get<std::size_t>(), j.at("kv").get<std::size_t>(),
                            j.at("weights").get<std::vector<double>>(),
                            j.value("per_channel", false), j.value("channels", std::size_t{1}));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed aperture code: ") + e.what());
    }
}

ApertureCode clamp_code(const KernelWeights& raw, bool per_channel)
{
    std::vector<double> w(raw.values.size());
    std::transform(raw.values.begin(), raw.values.end(), w.begin(),
                   [](double x) { return std::isnan(x) ? 0.0 : std::clamp(x, 0.0, 1.0); });
    const std::size_t channels = per_channel ? raw.channels : 1;
    return ApertureCode(raw.ku, raw.kv, std::move(w), per_channel, channels);
}

ApertureCode clamp_code(const ApertureCode& code)
{
    return code;
}

namespace kernels {

template <typename T>
void project(std::span<const T> lf, std::span<const T> kernel, const AngularGeometry& g,
             std::size_t slabs, std::size_t kernel_channels, std::size_t pixels, std::span<T> out)
{
    const std::size_t count = g.count();
    for (std::size_t s = 0; s < slabs; ++s) {
        const T* w = kernel.data() + (s % kernel_channels) * g.taps();
        const T* in = lf.data() + s * g.views() * pixels;
        for (std::size_t i = 0; i < g.out_u(); ++i)
            for (std::size_t j = 0; j < g.out_v(); ++j) {
                T* o = out.data() + (s * count + i * g.out_v() + j) * pixels;
                std::fill(o, o + pixels, T(0));
                for (std::size_t a = 0; a < g.ku; ++a)
                    for (std::size_t b = 0; b < g.kv; ++b) {
                        const T wab = w[a * g.kv + b];
                        const T* src = in + ((i + a) * g.N + (j + b)) * pixels;
                        for (std::size_t p = 0; p < pixels; ++p)
                            o[p] += wab * src[p];
                    }
            }
    }
}

template <typename T>
void backproject(std::span<const T> meas, std::span<const T> kernel, const AngularGeometry& g,
                 std::size_t slabs, std::size_t kernel_channels, std::size_t pixels,
                 std::span<T> out)
{
    const std::size_t count = g.count();
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(slabs * g.views() * pixels),
              T(0));
    for (std::size_t s = 0; s < slabs; ++s) {
        const T* w = kernel.data() + (s % kernel_channels) * g.taps();
        T* dst_slab = out.data() + s * g.views() * pixels;
        for (std::size_t i = 0; i < g.out_u(); ++i)
            for (std::size_t j = 0; j < g.out_v(); ++j) {
                const T* m = meas.data() + (s * count + i * g.out_v() + j) * pixels;
                for (std::size_t a = 0; a < g.ku; ++a)
                    for (std::size_t b = 0; b < g.kv; ++b) {
                        const T wab = w[a * g.kv + b];
                        T* dst = dst_slab + ((i + a) * g.N + (j + b)) * pixels;
                        for (std::size_t p = 0; p < pixels; ++p)
                            dst[p] += wab * m[p];
                    }
            }
    }
}

template <typename T>
void project_kernel_grad(std::span<const T> lf, std::span<const T> meas_grad,
                         const AngularGeometry& g, std::size_t slabs, std::size_t kernel_channels,
                         std::size_t pixels, std::span<T> dkernel)
{
    const std::size_t count = g.count();
    for (std::size_t s = 0; s < slabs; ++s) {
        T* dw = dkernel.data() + (s % kernel_channels) * g.taps();
        const T* in = lf.data() + s * g.views() * pixels;
        for (std::size_t i = 0; i < g.out_u(); ++i)
            for (std::size_t j = 0; j < g.out_v(); ++j) {
                const T* gm = meas_grad.data() + (s * count + i * g.out_v() + j) * pixels;
                for (std::size_t a = 0; a < g.ku; ++a)
                    for (std::size_t b = 0; b < g.kv; ++b) {
                        const T* src = in + ((i + a) * g.N + (j + b)) * pixels;
                        T acc = 0;
                        for (std::size_t p = 0; p < pixels; ++p)
                            acc += src[p] * gm[p];
                        dw[a * g.kv + b] += acc;
                    }
            }
    }
}

template <typename T>
std::vector<T> to_planar(std::span<const T> canonical, std::size_t views, std::size_t pixels,
                         std::size_t channels)
{
    std::vector<T> out(canonical.size());
    for (std::size_t v = 0; v < views; ++v)
        for (std::size_t p = 0; p < pixels; ++p)
            for (std::size_t c = 0; c < channels; ++c)
                out[(c * views + v) * pixels + p] = canonical[(v * pixels + p) * channels + c];
    return out;
}

template <typename T>
std::vector<T> from_planar(std::span<const T> planar, std::size_t views, std::size_t pixels,
                           std::size_t channels)
{
    std::vector<T> out(planar.size());
    for (std::size_t v = 0; v < views; ++v)
        for (std::size_t p = 0; p < pixels; ++p)
            for (std::size_t c = 0; c < channels; ++c)
                out[(v * pixels + p) * channels + c] = planar[(c * views + v) * pixels + p];
    return out;
}

#define LFCAP_INSTANTIATE_KERNELS(T)                                                              \
    template void project<T>(std::span<const T>, std::span<const T>, const AngularGeometry&,    \
                             std::size_t, std::size_t, std::size_t, std::span<T>);              \
    template void backproject<T>(std::span<const T>, std::span<const T>,                        \
                                 const AngularGeometry&, std::size_t, std::size_t, std::size_t, \
                                 std::span<T>);                                                 \
    template void project_kernel_grad<T>(std::span<const T>, std::span<const T>,                \
                                         const AngularGeometry&, std::size_t, std::size_t,      \
                                         std::size_t, std::span<T>);                            \
    template std::vector<T> to_planar<T>(std::span<const T>, std::size_t, std::size_t,          \
                                         std::size_t);                                          \
    template std::vector<T> from_planar<T>(std::span<const T>, std::size_t, std::size_t,        \
                                           std::size_t);

LFCAP_INSTANTIATE_KERNELS(float)
LFCAP_INSTANTIATE_KERNELS(double)
#undef LFCAP_INSTANTIATE_KERNELS

} // namespace kernels

namespace {

template <typename T>
std::vector<T> code_kernel(const ApertureCode& code)
{
    const auto w = code.weights();
    return std::vector<T>(w.begin(), w.end());
}

} // namespace

template <typename T>
BasicMeasurementSet<T> forward_project(const LfTensor<T>& lf, const ApertureCode& code)
{
    const auto& s = lf.shape();
    code.check_fits(s);
    const AngularGeometry g = code.geometry(s.M, s.N);
    const auto planar = kernels::to_planar<T>(lf.data(), s.views(), s.pixels(), s.C);
    std::vector<T> out(g.count() * s.pixels() * s.C);
    const auto kernel = code_kernel<T>(code);
    kernels::project<T>(planar, kernel, g, s.C, code.mask_count(), s.pixels(), out);

    BasicMeasurementSet<T> meas;
    meas.k = g.count();
    meas.H = s.H;
    meas.W = s.W;
    meas.C = s.C;
    meas.data = kernels::from_planar<T>(out, g.count(), s.pixels(), s.C);
    return meas;
}

MeasurementSet forward_project(const LightField& lf, const ApertureCode& code)
{
    return forward_project<float>(lf.samples(), code);
}

template <typename T>
LfTensor<T> adjoint_project(const BasicMeasurementSet<T>& meas, const ApertureCode& code,
                            std::size_t M, std::size_t N)
{
    const LfShape s{M, N, meas.H, meas.W, meas.C};
    validate_shape(s);
    code.check_fits(s);
    const AngularGeometry g = code.geometry(M, N);
    if (meas.k != g.count())
        throw ValidationError("measurement count " + std::to_string(meas.k) +
                              " inconsistent with a " + std::to_string(code.ku()) + "x" +
                              std::to_string(code.kv()) + " code on " + std::to_string(M) + "x" +
                              std::to_string(N) + " views (expected " +
                              std::to_string(g.count()) + ")");
    if (meas.data.size() != meas.k * meas.H * meas.W * meas.C)
        throw ValidationError("measurement buffer size mismatch");
    const auto planar = kernels::to_planar<T>(meas.data, meas.k, s.pixels(), s.C);
    std::vector<T> out(s.size());
    const auto kernel = code_kernel<T>(code);
    kernels::backproject<T>(planar, kernel, g, s.C, code.mask_count(), s.pixels(), out);
    return LfTensor<T>(s, kernels::from_planar<T>(out, s.views(), s.pixels(), s.C));
}

template BasicMeasurementSet<float> forward_project<float>(const LfTensor<float>&,
                                                           const ApertureCode&);
template BasicMeasurementSet<double> forward_project<double>(const LfTensor<double>&,
                                                            const ApertureCode&);
template LfTensor<float> adjoint_project<float>(const BasicMeasurementSet<float>&,
                                                const ApertureCode&, std::size_t, std::size_t);
template LfTensor<double> adjoint_project<double>(const BasicMeasurementSet<double>&,
                                                  const ApertureCode&, std::size_t, std::size_t);

void write_measurements(const MeasurementSet& meas, const std::filesystem::path& path)
{
    if (meas.data.size() != meas.k * meas.H * meas.W * meas.C)
        throw ValidationError("measurement buffer size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write("LFMS", 4);
    binary::write_u32(out, 1);
    for (std::size_t d : {meas.k, meas.H, meas.W, meas.C})
        binary::write_u32(out, static_cast<std::uint32_t>(d));
    binary::write_u32(out, meas.noise_sigma ? 1u : 0u);
    binary::write_f32(out, meas.noise_sigma ? static_cast<float>(*meas.noise_sigma) : 0.0f);
    binary::write_f32s(out, meas.data);
    if (!out)
        throw IoError("write failed for " + path.string());
}

MeasurementSet read_measurements(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    binary::expect_magic(in, "LFMS");
    if (const auto version = binary::read_u32(in, "version"); version != 1)
        throw IoError("unsupported LFMS version " + std::to_string(version));
    MeasurementSet m;
    m.k = binary::read_u32(in, "k");
    m.H = binary::read_u32(in, "H");
    m.W = binary::read_u32(in, "W");
    m.C = binary::read_u32(in, "C");
    if (m.k == 0 || m.H == 0 || m.W == 0 || (m.C != 1 && m.C != 3))
        throw IoError("malformed LFMS header in " + path.string());
    const bool has_noise = binary::read_u32(in, "noise flag") != 0;
    const float sigma = binary::read_f32(in, "noise sigma");
    if (has_noise)
        m.noise_sigma = sigma;
    m.data.resize(m.k * m.H * m.W * m.C);
    binary::read_f32s(in, m.data, "measurements");
    for (float v : m.data)
        if (!std::isfinite(v))
            throw IoError("non-finite measurement in " + path.string());
    return m;
}

} // namespace lfcap
