#include "lfcap/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lfcap/diff/ops.hpp"

namespace lfcap {

using diff::Shape;
using diff::Tensor;
using diff::Var;

void ModelConfig::validate() const
{
    if (channels != 1 && channels != 3)
        throw ValidationError("channels must be 1 or 3");
    if (stages < 1)
        throw ValidationError("need at least one stage");
    if (!(init_delta > 0.0) || !(init_eta >= 0.0))
        throw ValidationError("initial delta must be positive and eta nonnegative");
    (void)geometry();
}

nlohmann::json ModelConfig::to_json() const
{
    return {{"M", M},
            {"N", N},
            {"ku", ku},
            {"kv", kv},
            {"channels", channels},
            {"per_channel", per_channel},
            {"stages", stages},
            {"features", sas.features},
            {"depth", sas.depth},
            {"kernel", sas.kernel},
            {"residual", sas.residual},
            {"init_delta", init_delta},
            {"init_eta", init_eta}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j)
{
    try {
        ModelConfig c;
        c.M = j.at("M").get<std::size_t>();
        c.N = j.at("N").get<std::size_t>();
        c.ku = j.at("ku").get<std::size_t>();
        c.kv = j.at("kv").get<std::size_t>();
        c.channels = j.at("channels").get<std::size_t>();
        c.per_channel = j.value("per_channel", false);
        c.stages = j.at("stages").get<std::size_t>();
        c.sas.features = j.at("features").get<std::size_t>();
        c.sas.depth = j.at("depth").get<std::size_t>();
        c.sas.kernel = j.value("kernel", std::size_t{3});
        c.sas.residual = j.value("residual", false);
        c.init_delta = j.value("init_delta", 0.1);
        c.init_eta = j.value("init_eta", 0.1);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad model config: ") + e.what());
    }
}

namespace {

template <typename T>
Tensor<T> code_tensor(const ApertureCode& code)
{
    Tensor<T> t(Shape{code.mask_count(), code.ku(), code.kv()});
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data[i] = static_cast<T>(code.weights()[i]);
    return t;
}

// Scale making A^T A applied to a constant light field average to that constant.
template <typename T>
double adjoint_scale(const ApertureCode& code, const AngularGeometry& g)
{
    const std::size_t K = code.mask_count();
    std::vector<T> kernel(code.weights().begin(), code.weights().end());
    std::vector<T> ones(K * g.views(), T(1)), meas(K * g.count()), back(K * g.views());
    kernels::project<T>(ones, kernel, g, K, K, 1, meas);
    kernels::backproject<T>(meas, kernel, g, K, K, 1, back);
    double total = 0.0;
    for (T v : back)
        total += static_cast<double>(v);
    return total > 0.0 ? static_cast<double>(K * g.views()) / total : 1.0;
}

} // namespace

template <typename T>
UnrolledModel<T>::UnrolledModel(const ModelConfig& cfg, std::uint64_t seed)
    : config_(cfg)
{
    config_.validate();
    build_params(seed);
}

template <typename T>
UnrolledModel<T>::UnrolledModel(const ModelConfig& cfg, diff::ParamStore<T> params)
    : config_(cfg)
{
    config_.validate();
    build_params(0);
    for (const auto& name : params_.names()) {
        if (!params.contains(name))
            throw ValidationError("checkpoint is missing parameter " + name);
        const auto& loaded = params.value(name);
        if (loaded.shape != params_.value(name).shape)
            throw ValidationError("parameter " + name + " has shape " +
                                  diff::shape_string(loaded.shape) + ", expected " +
                                  diff::shape_string(params_.value(name).shape));
        params_.value(name) = loaded;
    }
    if (params.size() != params_.size())
        throw ValidationError("checkpoint holds parameters this model does not have");
}

template <typename T>
void UnrolledModel<T>::build_params(std::uint64_t seed)
{
    const auto& c = config_;
    const auto code = ApertureCode::random(c.ku, c.kv, seed, c.per_channel, c.channels);
    const Tensor<T> w = code_tensor<T>(code);
    const double s = adjoint_scale<T>(code, c.geometry());
    Tensor<T> w0 = w;
    for (T& v : w0.data)
        v = static_cast<T>(v * s);

    params_ = diff::ParamStore<T>();
    params_.add("acq.weight", w);
    params_.add("init.inverse.weight", w0);
    std::mt19937_64 rng(seed ^ 0x5eed5a5ull);
    for (std::size_t t = 0; t < c.stages; ++t) {
        const std::string p = stage_prefix(t);
        params_.add(p + ".proj.weight", w);
        params_.add(p + ".inverse.weight", w);
        params_.add(p + ".log_delta", Tensor<T>::scalar(static_cast<T>(std::log(c.init_delta))));
        params_.add(p + ".log_eta", Tensor<T>::scalar(static_cast<T>(std::log(c.init_eta))));
        sas::init_params(params_, p + ".reg", c.sas, rng);
    }
}

template <typename T>
ApertureCode UnrolledModel<T>::acquisition_code() const
{
    const auto& w = params_.value("acq.weight");
    KernelWeights raw{w.shape[0], w.shape[1], w.shape[2], {w.data.begin(), w.data.end()}};
    return clamp_code(raw, config_.per_channel);
}

template <typename T>
void UnrolledModel<T>::set_acquisition_code(const ApertureCode& code)
{
    auto& w = params_.value("acq.weight");
    const Tensor<T> t = code_tensor<T>(code);
    if (t.shape != w.shape)
        throw ValidationError("acquisition code of shape " + diff::shape_string(t.shape) +
                              " does not fit model shape " + diff::shape_string(w.shape));
    w = t;
}

template <typename T>
void UnrolledModel<T>::clamp_acquisition()
{
    for (T& v : params_.value("acq.weight").data)
        v = std::clamp(v, T(0), T(1));
}

template <typename T>
void UnrolledModel<T>::tie_projections(const ApertureCode& code)
{
    set_acquisition_code(code);
    const Tensor<T> t = code_tensor<T>(code);
    params_.value("init.inverse.weight") = t;
    for (std::size_t s = 0; s < config_.stages; ++s) {
        params_.value(stage_prefix(s) + ".proj.weight") = t;
        params_.value(stage_prefix(s) + ".inverse.weight") = t;
    }
}

template <typename T>
void UnrolledModel<T>::set_stage_scalars(std::size_t stage, double delta, double eta)
{
    if (stage >= config_.stages)
        throw ValidationError("stage index out of range");
    if (!(delta > 0.0) || !(eta >= 0.0))
        throw ValidationError("delta must be positive and eta nonnegative");
    const std::string p = stage_prefix(stage);
    params_.value(p + ".log_delta").data[0] = static_cast<T>(std::log(delta));
    params_.value(p + ".log_eta").data[0] =
        eta == 0.0 ? -std::numeric_limits<T>::infinity() : static_cast<T>(std::log(eta));
}

template <typename T>
T UnrolledModel<T>::stage_delta(std::size_t stage) const
{
    return std::exp(params_.value(stage_prefix(stage) + ".log_delta").data[0]);
}

template <typename T>
T UnrolledModel<T>::stage_eta(std::size_t stage) const
{
    return std::exp(params_.value(stage_prefix(stage) + ".log_eta").data[0]);
}

template <typename T>
void UnrolledModel<T>::set_identity_regularizers()
{
    for (std::size_t s = 0; s < config_.stages; ++s)
        sas::set_identity(params_, stage_prefix(s) + ".reg", config_.sas);
}

template <typename T>
Var<T> UnrolledModel<T>::capture(const diff::Binding<T>& bound, const Var<T>& lf) const
{
    return diff::project(lf, bound["acq.weight"]);
}

template <typename T>
Var<T> UnrolledModel<T>::reconstruct(const diff::Binding<T>& bound, const Var<T>& meas) const
{
    const auto& c = config_;
    Var<T> x = diff::backproject(meas, bound["init.inverse.weight"], c.M, c.N);
    for (std::size_t t = 0; t < c.stages; ++t) {
        const std::string p = stage_prefix(t);
        const Var<T> v = sas::regularize(x, bound, p + ".reg", c.sas);
        const Var<T> residual = diff::sub(diff::project(x, bound[p + ".proj.weight"]), meas);
        const Var<T> data_grad = diff::backproject(residual, bound[p + ".inverse.weight"], c.M, c.N);
        const Var<T> prior = diff::mul_scalar(diff::sub(x, v), diff::exp(bound[p + ".log_eta"]));
        const Var<T> update =
            diff::mul_scalar(diff::add(data_grad, prior), diff::exp(bound[p + ".log_delta"]));
        x = diff::sub(x, update);
    }
    return x;
}

template <typename T>
Tensor<T> batch_tensor(std::span<const LightField> batch)
{
    if (batch.empty())
        throw ValidationError("empty batch");
    const LfShape s = batch[0].shape();
    Tensor<T> out(Shape{batch.size(), s.C, s.M, s.N, s.H, s.W});
    const std::size_t item = s.size();
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (!(batch[b].shape() == s))
            throw ValidationError("batch items differ in shape: " + to_string(batch[b].shape()) +
                                  " vs " + to_string(s));
        const auto src = batch[b].data();
        std::vector<T> canonical(src.begin(), src.end());
        const auto planar = kernels::to_planar<T>(canonical, s.views(), s.pixels(), s.C);
        std::copy(planar.begin(), planar.end(), out.data.begin() + b * item);
    }
    return out;
}

template <typename T>
LfTensor<T> unbatch_lf(const Tensor<T>& tensor, std::size_t index)
{
    if (tensor.shape.size() != 6 || index >= tensor.shape[0])
        throw ValidationError("expected a (B, C, M, N, H, W) tensor");
    const auto& d = tensor.shape;
    const LfShape s{d[2], d[3], d[4], d[5], d[1]};
    const std::span<const T> planar(tensor.data.data() + index * s.size(), s.size());
    return LfTensor<T>(s, kernels::from_planar<T>(planar, s.views(), s.pixels(), s.C));
}

template <typename T>
Tensor<T> measurement_tensor(const BasicMeasurementSet<T>& meas)
{
    return Tensor<T>(Shape{1, meas.C, meas.k, meas.H, meas.W},
                     kernels::to_planar<T>(meas.data, meas.k, meas.H * meas.W, meas.C));
}

template <typename T>
LfTensor<T> reconstruct_tensor(const BasicMeasurementSet<T>& meas, const UnrolledModel<T>& model)
{
    const auto& c = model.config();
    if (meas.k != c.geometry().count() || meas.C != c.channels)
        throw ValidationError("measurements (k=" + std::to_string(meas.k) + ", C=" +
                              std::to_string(meas.C) + ") do not match the model (k=" +
                              std::to_string(c.geometry().count()) + ", C=" +
                              std::to_string(c.channels) + ")");
    diff::Graph<T> graph;
    const diff::Binding<T> bound(graph, model.params());
    const Var<T> l = graph.constant(measurement_tensor(meas));
    return unbatch_lf(model.reconstruct(bound, l).value(), 0);
}

LightField unrolled_reconstruct(const MeasurementSet& meas, const UnrolledModel<float>& model)
{
    return LightField::clamped(reconstruct_tensor(meas, model));
}

template class UnrolledModel<float>;
template class UnrolledModel<double>;

#define LFCAP_INSTANTIATE(T)                                                                      \
    template Tensor<T> batch_tensor<T>(std::span<const LightField>);                              \
    template LfTensor<T> unbatch_lf<T>(const Tensor<T>&, std::size_t);                            \
    template Tensor<T> measurement_tensor<T>(const BasicMeasurementSet<T>&);                      \
    template LfTensor<T> reconstruct_tensor<T>(const BasicMeasurementSet<T>&,                     \
                                               const UnrolledModel<T>&);
LFCAP_INSTANTIATE(float)
LFCAP_INSTANTIATE(double)
#undef LFCAP_INSTANTIATE

} // namespace lfcap
