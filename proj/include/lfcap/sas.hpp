#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "lfcap/diff/ops.hpp"
#include "lfcap/diff/params.hpp"

namespace lfcap {

/// Shape of the spatial-angular separable regularizer network.
struct SasConfig {
    std::size_t features = 64; ///< feature maps per layer
    std::size_t depth = 9;     ///< number of SAS blocks
    std::size_t kernel = 3;    ///< spatial and angular kernel extent
    bool residual = false;     ///< v = x + net(x) instead of v = net(x)

    bool operator==(const SasConfig&) const = default;
};

namespace sas {

/// Closed-form number of scalar parameters in one network.
std::size_t parameter_count(const SasConfig& cfg);

/// Adds He-initialized parameters named `{prefix}.lift.*`, `{prefix}.{layer}.{spatial|angular}.*`
/// and `{prefix}.proj.*`, with zero biases.
template <typename T>
void init_params(diff::ParamStore<T>& params, const std::string& prefix, const SasConfig& cfg,
                 std::mt19937_64& rng);

/// Overwrites the network parameters with centered delta kernels routed through feature 0
/// and zero biases, which makes the network the identity on nonnegative inputs.
template <typename T>
void set_identity(diff::ParamStore<T>& params, const std::string& prefix, const SasConfig& cfg);

/// One SAS layer on (B, F, M, N, H, W) features: spatial conv + ReLU, then angular conv + ReLU.
template <typename T>
diff::Var<T> sas_block(const diff::Var<T>& features, const diff::Var<T>& spatial_weight,
                       const diff::Var<T>& spatial_bias, const diff::Var<T>& angular_weight,
                       const diff::Var<T>& angular_bias);

/// v = proj(block_D(...block_1(lift(x)))) on a (B, C, M, N, H, W) light-field tensor.
/// Color channels are treated as independent batch items sharing one network.
template <typename T>
diff::Var<T> regularize(const diff::Var<T>& x, const diff::Binding<T>& params,
                        const std::string& prefix, const SasConfig& cfg);

} // namespace sas
} // namespace lfcap
