#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lfcap/linops.hpp"

namespace lfcap {

/// Classical half-quadratic splitting with an explicit proximal map.
struct HqsConfig {
    double lambda = 0.0; ///< regularization weight, >= 0
    double eta = 1.0;    ///< penalty weight, > 0
    double delta = 0.1;  ///< gradient step, > 0
    std::size_t max_iterations = 1000;
    double tolerance = 1e-8; ///< stop when ||x+ - x|| / ||x|| falls below this

    void validate() const;
};

template <typename T>
using Prox = std::function<LfTensor<T>(const LfTensor<T>&)>;

template <typename T>
Prox<T> identity_prox();
/// Closed-form v-update for J(v) = ||v||^2 / 2: v = 2 eta / (2 eta + lambda) * x.
template <typename T>
Prox<T> tikhonov_prox(double eta, double lambda);

template <typename T>
struct HqsResult {
    LfTensor<T> x;
    std::size_t iterations = 0;
    bool converged = false;
    /// ||A x_t - l|| for every iterate that was updated.
    std::vector<double> residual_norms;
};

/// x+ = x - delta [A^T (A x - l) + eta (x - v)], v+ = prox(x+), starting from v0 = prox(x0).
/// x0 defaults to zero. Running out of iterations is reported through `converged`.
template <typename T>
HqsResult<T> hqs_classical(const BasicMeasurementSet<T>& l, const ApertureCode& code,
                           std::size_t M, std::size_t N, const Prox<T>& prox, const HqsConfig& cfg,
                           const LfTensor<T>* initial = nullptr);

/// ||A|| by 50 rounds (default) of power iteration on A^T A. The operator acts
/// identically on every pixel, so one pixel suffices.
double estimate_operator_norm(const ApertureCode& code, std::size_t M, std::size_t N,
                              std::size_t iterations = 50, std::uint64_t seed = 7);

} // namespace lfcap
