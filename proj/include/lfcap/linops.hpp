#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "lfcap/lightfield.hpp"

namespace lfcap {

/// Number of positions a ku x kv kernel takes when sliding with stride 1 and no
/// padding over an M x N angular patch: (M - ku + 1) * (N - kv + 1).
std::size_t measurement_count(std::size_t M, std::size_t N, std::size_t ku, std::size_t kv);

/// Sliding-kernel geometry of the sensing operator.
struct AngularGeometry {
    std::size_t M = 1;
    std::size_t N = 1;
    std::size_t ku = 1;
    std::size_t kv = 1;

    /// Throws ValidationError when the kernel does not fit.
    AngularGeometry(std::size_t M, std::size_t N, std::size_t ku, std::size_t kv);

    std::size_t out_u() const { return M - ku + 1; }
    std::size_t out_v() const { return N - kv + 1; }
    std::size_t count() const { return out_u() * out_v(); }
    std::size_t views() const { return M * N; }
    std::size_t taps() const { return ku * kv; }

    bool operator==(const AngularGeometry&) const = default;
};

/// Unconstrained kernel weights, layout (channel, a, b).
struct KernelWeights {
    std::size_t channels = 1;
    std::size_t ku = 1;
    std::size_t kv = 1;
    std::vector<double> values;
};

/// Coded-aperture transmittance mask. Every weight lies in [0, 1]; there is no bias.
/// With per_channel set, one mask per color channel; otherwise a single shared mask.
class ApertureCode {
public:
    ApertureCode() = default;
    /// Throws ValidationError on bad sizes or weights outside [0, 1].
    ApertureCode(std::size_t ku, std::size_t kv, std::vector<double> weights,
                 bool per_channel = false, std::size_t channels = 1);

    /// Weights drawn uniformly from [0, 1].
    static ApertureCode random(std::size_t ku, std::size_t kv, std::uint64_t seed,
                               bool per_channel = false, std::size_t channels = 1);
    static ApertureCode ones(std::size_t ku, std::size_t kv);
    /// Indicator of aperture position (a, b).
    static ApertureCode selector(std::size_t ku, std::size_t kv, std::size_t a, std::size_t b);

    std::size_t ku() const { return ku_; }
    std::size_t kv() const { return kv_; }
    bool per_channel() const { return per_channel_; }
    /// Number of distinct masks stored (1, or the color channel count).
    std::size_t mask_count() const { return per_channel_ ? channels_ : 1; }
    std::span<const double> weights() const { return weights_; }
    double weight(std::size_t mask, std::size_t a, std::size_t b) const
    { return weights_[(mask * ku_ + a) * kv_ + b]; }

    /// Throws ValidationError when the code cannot act on a light field of this shape.
    void check_fits(const LfShape& shape) const;
    AngularGeometry geometry(std::size_t M, std::size_t N) const { return {M, N, ku_, kv_}; }

    nlohmann::json to_json() const;
    static ApertureCode from_json(const nlohmann::json& j);

private:
    std::size_t ku_ = 1;
    std::size_t kv_ = 1;
    bool per_channel_ = false;
    std::size_t channels_ = 1;
    std::vector<double> weights_{1.0};
};

/// Element-wise clamp of raw weights into [0, 1].
ApertureCode clamp_code(const KernelWeights& raw, bool per_channel = false);
ApertureCode clamp_code(const ApertureCode& code);

/// k stacked coded images in canonical (measurement, x, y, c) order.
template <typename T>
struct BasicMeasurementSet {
    std::size_t k = 0;
    std::size_t H = 0;
    std::size_t W = 0;
    std::size_t C = 1;
    std::vector<T> data;
    /// Standard deviation of the added noise on the 8-bit scale, if any was added.
    std::optional<double> noise_sigma;

    BasicMeasurementSet() = default;
    BasicMeasurementSet(std::size_t k, std::size_t H, std::size_t W, std::size_t C)
        : k(k), H(H), W(W), C(C), data(k * H * W * C, T(0))
    { }

    T& at(std::size_t i, std::size_t x, std::size_t y, std::size_t c = 0)
    { return data[((i * H + x) * W + y) * C + c]; }
    const T& at(std::size_t i, std::size_t x, std::size_t y, std::size_t c = 0) const
    { return data[((i * H + x) * W + y) * C + c]; }
};

using MeasurementSet = BasicMeasurementSet<float>;

/// A x: for each sliding offset (i, j), L_ij(x, y) = sum_{a,b} w(a, b) L(i + a, j + b, x, y).
template <typename T>
BasicMeasurementSet<T> forward_project(const LfTensor<T>& lf, const ApertureCode& code);
MeasurementSet forward_project(const LightField& lf, const ApertureCode& code);

/// A^T y, the exact adjoint of forward_project.
template <typename T>
LfTensor<T> adjoint_project(const BasicMeasurementSet<T>& meas, const ApertureCode& code,
                            std::size_t M, std::size_t N);

void write_measurements(const MeasurementSet& meas, const std::filesystem::path& path);
MeasurementSet read_measurements(const std::filesystem::path& path);

/// Planar building blocks shared with the differentiable ops.
///
/// Data is laid out as `slabs` independent channel slabs; a light-field slab holds
/// (views, pixels) and a measurement slab (count, pixels). Slab s uses kernel
/// channel s % kernel_channels.
namespace kernels {

template <typename T>
void project(std::span<const T> lf, std::span<const T> kernel, const AngularGeometry& g,
             std::size_t slabs, std::size_t kernel_channels, std::size_t pixels, std::span<T> out);

template <typename T>
void backproject(std::span<const T> meas, std::span<const T> kernel, const AngularGeometry& g,
                 std::size_t slabs, std::size_t kernel_channels, std::size_t pixels,
                 std::span<T> out);

/// Accumulates d<meas_grad, project(lf, kernel)>/d kernel into dkernel.
template <typename T>
void project_kernel_grad(std::span<const T> lf, std::span<const T> meas_grad,
                         const AngularGeometry& g, std::size_t slabs, std::size_t kernel_channels,
                         std::size_t pixels, std::span<T> dkernel);

/// Canonical (u, v, x, y, c) to planar (c, view, pixel) and back.
template <typename T>
std::vector<T> to_planar(std::span<const T> canonical, std::size_t views, std::size_t pixels,
                         std::size_t channels);
template <typename T>
std::vector<T> from_planar(std::span<const T> planar, std::size_t views, std::size_t pixels,
                           std::size_t channels);

} // namespace kernels

} // namespace lfcap
