#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <json.hpp>

#include "lfcap/diff/params.hpp"
#include "lfcap/linops.hpp"
#include "lfcap/sas.hpp"

namespace lfcap {

/// Geometry and capacity of an unrolled reconstruction network.
struct ModelConfig {
    std::size_t M = 7;
    std::size_t N = 7;
    std::size_t ku = 7;
    std::size_t kv = 7;
    std::size_t channels = 1;
    bool per_channel = false;
    std::size_t stages = 6;
    SasConfig sas;
    double init_delta = 0.1;
    double init_eta = 0.1;

    AngularGeometry geometry() const { return {M, N, ku, kv}; }
    std::size_t kernel_channels() const { return per_channel ? channels : 1; }
    /// Throws ValidationError when the configuration is inconsistent.
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

/// Unrolled half-quadratic-splitting network with a jointly trained acquisition code.
///
/// Parameters:
///   acq.weight                      acquisition code (kept in [0, 1])
///   init.inverse.weight             inverse projection producing x0
///   stage{t}.proj.weight            per-stage projection
///   stage{t}.inverse.weight         per-stage inverse projection
///   stage{t}.log_delta, log_eta     step size and penalty as exp(free scalar)
///   stage{t}.reg.*                  regularizer network
template <typename T>
class UnrolledModel {
public:
    /// Random acquisition code in [0, 1]; projections start from the code and its adjoint.
    explicit UnrolledModel(const ModelConfig& cfg, std::uint64_t seed = 0);
    /// Adopts parameters loaded from a checkpoint. Throws ValidationError if any
    /// expected parameter is missing or has the wrong shape.
    UnrolledModel(const ModelConfig& cfg, diff::ParamStore<T> params);

    const ModelConfig& config() const { return config_; }
    diff::ParamStore<T>& params() { return params_; }
    const diff::ParamStore<T>& params() const { return params_; }

    ApertureCode acquisition_code() const;
    void set_acquisition_code(const ApertureCode& code);
    /// Projects the acquisition weights back onto [0, 1].
    void clamp_acquisition();

    /// Sets acq, init.inverse and every stage projection/inverse projection to `code`,
    /// so each stage applies the physical operator and its adjoint.
    void tie_projections(const ApertureCode& code);
    /// delta > 0, eta >= 0 (eta = 0 stores a log of -inf).
    void set_stage_scalars(std::size_t stage, double delta, double eta);
    T stage_delta(std::size_t stage) const;
    T stage_eta(std::size_t stage) const;
    /// Makes every stage regularizer the identity on nonnegative inputs.
    void set_identity_regularizers();

    /// Coded measurements of a (B, C, M, N, H, W) light-field tensor.
    diff::Var<T> capture(const diff::Binding<T>& bound, const diff::Var<T>& lf) const;
    /// Unrolled reconstruction of (B, C, k, H, W) measurements into (B, C, M, N, H, W).
    diff::Var<T> reconstruct(const diff::Binding<T>& bound, const diff::Var<T>& meas) const;

    static std::string stage_prefix(std::size_t stage) { return "stage" + std::to_string(stage); }

private:
    void build_params(std::uint64_t seed);

    ModelConfig config_;
    diff::ParamStore<T> params_;
};

/// Canonical light fields to a (B, C, M, N, H, W) graph tensor, and back.
template <typename T>
diff::Tensor<T> batch_tensor(std::span<const LightField> batch);
template <typename T>
LfTensor<T> unbatch_lf(const diff::Tensor<T>& tensor, std::size_t index);
/// Canonical measurements to (1, C, k, H, W).
template <typename T>
diff::Tensor<T> measurement_tensor(const BasicMeasurementSet<T>& meas);

/// Unclamped unrolled reconstruction.
template <typename T>
LfTensor<T> reconstruct_tensor(const BasicMeasurementSet<T>& meas, const UnrolledModel<T>& model);
/// Unrolled reconstruction clamped to [0, 1] for export.
LightField unrolled_reconstruct(const MeasurementSet& meas, const UnrolledModel<float>& model);

extern template class UnrolledModel<float>;
extern template class UnrolledModel<double>;

} // namespace lfcap
