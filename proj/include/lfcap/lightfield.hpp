#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lfcap/error.hpp"

namespace lfcap {

/// Dimensions of a 4-D light field: angular (M, N), spatial (H, W), channels C.
struct LfShape {
    std::size_t M = 1;
    std::size_t N = 1;
    std::size_t H = 1;
    std::size_t W = 1;
    std::size_t C = 1;

    std::size_t views() const { return M * N; }
    std::size_t pixels() const { return H * W; }
    std::size_t size() const { return M * N * H * W * C; }

    bool operator==(const LfShape&) const = default;
};

std::string to_string(const LfShape& shape);

/// Throws ValidationError when any dimension is zero or C is not 1 or 3.
void validate_shape(const LfShape& shape);

/// Offset of sample (u, v, x, y, c) in the canonical row-major (u, v, x, y, c) order.
inline std::size_t canonical_index(const LfShape& s, std::size_t u, std::size_t v, std::size_t x,
                                   std::size_t y, std::size_t c = 0)
{
    return (((u * s.N + v) * s.H + x) * s.W + y) * s.C + c;
}

/// Light-field shaped array in canonical order with no range constraint.
/// Used for intermediate quantities such as adjoint images.
template <typename T>
class LfTensor {
public:
    LfTensor() = default;
    explicit LfTensor(const LfShape& shape);
    LfTensor(const LfShape& shape, std::vector<T> data);

    const LfShape& shape() const { return shape_; }
    std::span<const T> data() const { return data_; }
    std::span<T> data() { return data_; }
    std::size_t size() const { return data_.size(); }

    T& at(std::size_t u, std::size_t v, std::size_t x, std::size_t y, std::size_t c = 0)
    { return data_[canonical_index(shape_, u, v, x, y, c)]; }
    const T& at(std::size_t u, std::size_t v, std::size_t x, std::size_t y, std::size_t c = 0) const
    { return data_[canonical_index(shape_, u, v, x, y, c)]; }

private:
    LfShape shape_;
    std::vector<T> data_;
};

/// Light field L(u, v, x, y, c) with every sample finite and in [0, 1].
/// Immutable after construction.
class LightField {
public:
    LightField() = default;
    /// Throws ValidationError on shape mismatch, non-finite or out-of-range samples.
    LightField(const LfShape& shape, std::vector<float> data);
    explicit LightField(LfTensor<float> samples);

    static LightField constant(const LfShape& shape, float value);

    /// Clamps every sample into [0, 1]; NaN maps to 0.
    template <typename T>
    static LightField clamped(const LfTensor<T>& tensor);

    const LfShape& shape() const { return samples_.shape(); }
    std::span<const float> data() const { return samples_.data(); }
    const LfTensor<float>& samples() const { return samples_; }

    float at(std::size_t u, std::size_t v, std::size_t x, std::size_t y, std::size_t c = 0) const
    { return samples_.at(u, v, x, y, c); }

    /// Copy of one sub-aperture image, row-major (x, y, c).
    std::vector<float> view(std::size_t u, std::size_t v) const;
    /// Single-channel light field holding channel c.
    LightField channel(std::size_t c) const;

private:
    LfTensor<float> samples_;
};

/// All angular samples at one spatial location and channel, row-major (u, v).
struct AngularPatch {
    std::size_t M = 0;
    std::size_t N = 0;
    std::vector<float> values;

    float operator()(std::size_t u, std::size_t v) const { return values[u * N + v]; }
};

/// Splits a light field into H*W*C angular patches ordered by (x, y, c), row-major.
std::vector<AngularPatch> shuffle_to_batch(const LightField& lf);
/// Inverse of shuffle_to_batch.
LightField unshuffle(std::span<const AngularPatch> patches, const LfShape& shape);

enum class EpiOrientation {
    horizontal, ///< v-y slice at fixed (u, x); shape (N, W)
    vertical,   ///< u-x slice at fixed (v, y); shape (M, H)
};

/// Epipolar plane image. Rows index the angular axis, columns the spatial axis.
struct Epi {
    EpiOrientation orientation = EpiOrientation::horizontal;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;

    float operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// For horizontal EPIs `angular` is u and `spatial` is x; for vertical EPIs they are v and y.
Epi extract_epi(const LightField& lf, EpiOrientation orientation, std::size_t angular,
                std::size_t spatial, std::size_t channel = 0);

} // namespace lfcap
