#pragma once

#include "lfcap/diff/graph.hpp"
#include "lfcap/linops.hpp"

// Differentiable operators. Every op records its result on the operands' graph.
//
// Light-field tensors inside the graph use the planar layout (B, C, M, N, H, W):
// batch, channel, angular u, angular v, spatial x, spatial y. Measurements use
// (B, C, k, H, W).
namespace lfcap::diff {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
/// Element-wise product.
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
/// a * s for a one-element tensor s.
template <typename T> Var<T> mul_scalar(const Var<T>& a, const Var<T>& s);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> sum(const Var<T>& a);
/// Inner product <a, b>.
template <typename T> Var<T> dot(const Var<T>& a, const Var<T>& b);
/// Same data, new shape of equal element count.
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);

/// Mean absolute difference. The subgradient at an exact tie is zero.
template <typename T> Var<T> l1_loss(const Var<T>& pred, const Var<T>& target);

/// Sliding angular-plane projection (no padding, stride 1).
/// x: (B, C, M, N, H, W), kernel: (K, ku, kv) with K = 1 or K = C. Result: (B, C, k, H, W).
template <typename T> Var<T> project(const Var<T>& x, const Var<T>& kernel);
/// Transposed projection: (B, C, k, H, W) to (B, C, M, N, H, W).
template <typename T>
Var<T> backproject(const Var<T>& meas, const Var<T>& kernel, std::size_t M, std::size_t N);

/// Which pair of axes a plane convolution slides over.
enum class Plane {
    spatial, ///< (x, y), separately for every view
    angular, ///< (u, v), separately for every pixel
};

/// Same-padded 2-D convolution over one plane of a (B, Cin, M, N, H, W) tensor.
/// weight: (Cout, Cin, K, K) with odd K; bias: (Cout). Optionally followed by ReLU.
template <typename T>
Var<T> conv_plane(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, Plane plane,
                  bool relu_after);

} // namespace lfcap::diff
