#include "lfcap/lightfield.hpp"

#include <algorithm>
#include <cmath>

namespace lfcap {

std::string to_string(const LfShape& s)
{
    return std::to_string(s.M) + "x" + std::to_string(s.N) + "x" + std::to_string(s.H) + "x" +
           std::to_string(s.W) + "x" + std::to_string(s.C);
}

void validate_shape(const LfShape& s)
{
    if (s.M == 0 || s.N == 0 || s.H == 0 || s.W == 0)
        throw ValidationError("light field dimensions must be positive, got " + to_string(s));
    if (s.C != 1 && s.C != 3)
        throw ValidationError("light field must have 1 or 3 channels, got " + std::to_string(s.C));
}

template <typename T>
LfTensor<T>::LfTensor(const LfShape& shape)
    : shape_(shape)
    , data_(shape.size(), T(0))
{
    validate_shape(shape);
}

template <typename T>
LfTensor<T>::LfTensor(const LfShape& shape, std::vector<T> data)
    : shape_(shape)
    , data_(std::move(data))
{
    validate_shape(shape);
    if (data_.size() != shape.size())
        throw ValidationError("sample count " + std::to_string(data_.size()) +
                              " does not match shape " + to_string(shape));
}

template class LfTensor<float>;
template class LfTensor<double>;

LightField::LightField(const LfShape& shape, std::vector<float> data)
    : LightField(LfTensor<float>(shape, std::move(data)))
{ }

LightField::LightField(LfTensor<float> samples)
    : samples_(std::move(samples))
{
    const auto values = samples_.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = values[i];
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
            throw ValidationError("light field sample " + std::to_string(i) + " = " +
                                  std::to_string(v) + " is outside [0, 1]");
    }
}

LightField LightField::constant(const LfShape& shape, float value)
{
    return LightField(shape, std::vector<float>(shape.size(), value));
}

template <typename T>
LightField LightField::clamped(const LfTensor<T>& tensor)
{
    std::vector<float> out(tensor.size());
    const auto in = tensor.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = in[i];
        out[i] = std::isnan(v) ? 0.0f : static_cast<float>(std::clamp<T>(v, T(0), T(1)));
    }
    return LightField(tensor.shape(), std::move(out));
}

template LightField LightField::clamped<float>(const LfTensor<float>&);
template LightField LightField::clamped<double>(const LfTensor<double>&);

std::vector<float> LightField::view(std::size_t u, std::size_t v) const
{
    const auto& s = shape();
    if (u >= s.M || v >= s.N)
        throw ValidationError("view index out of range");
    const std::size_t n = s.H * s.W * s.C;
    const auto first = data().begin() + static_cast<std::ptrdiff_t>(canonical_index(s, u, v, 0, 0));
    return std::vector<float>(first, first + static_cast<std::ptrdiff_t>(n));
}

LightField LightField::channel(std::size_t c) const
{
    const auto& s = shape();
    if (c >= s.C)
        throw ValidationError("channel index out of range");
    LfShape out_shape = s;
    out_shape.C = 1;
    std::vector<float> out(out_shape.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = data()[i * s.C + c];
    return LightField(out_shape, std::move(out));
}

std::vector<AngularPatch> shuffle_to_batch(const LightField& lf)
{
    const auto& s = lf.shape();
    std::vector<AngularPatch> patches(s.H * s.W * s.C);
    for (std::size_t x = 0; x < s.H; ++x)
        for (std::size_t y = 0; y < s.W; ++y)
            for (std::size_t c = 0; c < s.C; ++c) {
                auto& p = patches[(x * s.W + y) * s.C + c];
                p.M = s.M;
                p.N = s.N;
                p.values.resize(s.views());
                for (std::size_t u = 0; u < s.M; ++u)
                    for (std::size_t v = 0; v < s.N; ++v)
                        p.values[u * s.N + v] = lf.at(u, v, x, y, c);
            }
    return patches;
}

LightField unshuffle(std::span<const AngularPatch> patches, const LfShape& s)
{
    validate_shape(s);
    if (patches.size() != s.H * s.W * s.C)
        throw ValidationError("patch count " + std::to_string(patches.size()) +
                              " does not match shape " + to_string(s));
    std::vector<float> data(s.size());
    for (std::size_t x = 0; x < s.H; ++x)
        for (std::size_t y = 0; y < s.W; ++y)
            for (std::size_t c = 0; c < s.C; ++c) {
                const auto& p = patches[(x * s.W + y) * s.C + c];
                if (p.M != s.M || p.N != s.N || p.values.size() != s.views())
                    throw ValidationError("angular patch shape mismatch");
                for (std::size_t u = 0; u < s.M; ++u)
                    for (std::size_t v = 0; v < s.N; ++v)
                        data[canonical_index(s, u, v, x, y, c)] = p.values[u * s.N + v];
            }
    return LightField(s, std::move(data));
}

Epi extract_epi(const LightField& lf, EpiOrientation orientation, std::size_t angular,
                std::size_t spatial, std::size_t channel)
{
    const auto& s = lf.shape();
    if (channel >= s.C)
        throw ValidationError("EPI channel out of range");
    Epi epi;
    epi.orientation = orientation;
    if (orientation == EpiOrientation::horizontal) {
        if (angular >= s.M || spatial >= s.H)
            throw ValidationError("horizontal EPI coordinates (u=" + std::to_string(angular) +
                                  ", x=" + std::to_string(spatial) + ") out of range for " +
                                  to_string(s));
        epi.rows = s.N;
        epi.cols = s.W;
        epi.values.resize(s.N * s.W);
        for (std::size_t v = 0; v < s.N; ++v)
            for (std::size_t y = 0; y < s.W; ++y)
                epi.values[v * s.W + y] = lf.at(angular, v, spatial, y, channel);
    } else {
        if (angular >= s.N || spatial >= s.W)
            throw ValidationError("vertical EPI coordinates (v=" + std::to_string(angular) +
                                  ", y=" + std::to_string(spatial) + ") out of range for " +
                                  to_string(s));
        epi.rows = s.M;
        epi.cols = s.H;
        epi.values.resize(s.M * s.H);
        for (std::size_t u = 0; u < s.M; ++u)
            for (std::size_t x = 0; x < s.H; ++x)
                epi.values[u * s.H + x] = lf.at(u, angular, x, spatial, channel);
    }
    return epi;
}

} // namespace lfcap
