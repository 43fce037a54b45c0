#include "lfcap/training.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "lfcap/data.hpp"
#include "lfcap/diff/ops.hpp"

namespace lfcap {

nlohmann::json TrainConfig::to_json() const
{
    return {{"steps", steps},           {"batch", batch},
            {"patch", patch},           {"lr", lr},
            {"lr_reduced", lr_reduced}, {"patience", patience},
            {"eval_every", eval_every}, {"noise_sigma", noise_sigma},
            {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j)
{
    TrainConfig c;
    try {
        c.steps = j.value("steps", c.steps);
        c.batch = j.value("batch", c.batch);
        c.patch = j.value("patch", c.patch);
        c.lr = j.value("lr", c.lr);
        c.lr_reduced = j.value("lr_reduced", c.lr_reduced);
        c.patience = j.value("patience", c.patience);
        c.eval_every = j.value("eval_every", c.eval_every);
        c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad training config: ") + e.what());
    }
    return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t step, std::uint64_t stream)
{
    // splitmix64 finalizer over a combined key
    std::uint64_t z = seed * 0x9e3779b97f4a7c15ull + step * 0xbf58476d1ce4e5b9ull + stream;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Trainer::Trainer(UnrolledModel<float>& model, const TrainConfig& cfg,
                 std::vector<LightField> dataset)
    : model_(&model), cfg_(cfg), dataset_(std::move(dataset)),
      schedule_(cfg.lr, cfg.lr_reduced, cfg.patience)
{
    if (dataset_.empty())
        throw ValidationError("training needs at least one light field");
    if (cfg.batch == 0 || cfg.patch == 0 || cfg.eval_every == 0)
        throw ValidationError("batch, patch and eval_every must be positive");
    if (!(cfg.lr >= 0.0) || !(cfg.lr_reduced >= 0.0))
        throw ValidationError("learning rates must be nonnegative");
    if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma))
        throw ValidationError("noise sigma must be finite and >= 0");
    const auto& mc = model.config();
    for (const auto& lf : dataset_) {
        const LfShape s = lf.shape();
        if (s.M != mc.M || s.N != mc.N || s.C != mc.channels)
            throw ValidationError("light field " + to_string(s) +
                                  " does not match the model's angular size or channels");
        if (s.H < cfg.patch || s.W < cfg.patch)
            throw ValidationError("light field " + to_string(s) + " is smaller than patch " +
                                  std::to_string(cfg.patch));
    }
    adam_.config.lr = cfg.lr;
}

double Trainer::step()
{
    const std::uint64_t index = adam_.step;
    const PatchSampler sampler{cfg_.patch, cfg_.batch, derive_seed(cfg_.seed, index, 1)};
    const std::vector<LightField> patches = sample_patches(dataset_, sampler);

    auto& params = model_->params();
    diff::Graph<float> graph;
    const diff::Binding<float> bound(graph, params);
    const diff::Var<float> gt = graph.constant(batch_tensor<float>(patches));
    diff::Var<float> meas = model_->capture(bound, gt);
    if (cfg_.noise_sigma > 0.0) {
        std::mt19937_64 rng(derive_seed(cfg_.seed, index, 2));
        std::normal_distribution<double> dist(0.0, cfg_.noise_sigma / 255.0);
        diff::Tensor<float> noise(meas.shape());
        for (float& v : noise.data)
            v = static_cast<float>(dist(rng));
        meas = diff::add(meas, graph.constant(std::move(noise)));
    }
    const diff::Var<float> loss = diff::l1_loss(model_->reconstruct(bound, meas), gt);
    const double value = loss.value().item();
    if (!std::isfinite(value))
        throw Error("training diverged at step " + std::to_string(index));
    graph.backward(loss);

    params.zero_grad();
    bound.accumulate_grads(params);
    adam_.config.lr = schedule_.lr();
    diff::adam_step(params, adam_);
    model_->clamp_acquisition();

    window_sum_ += value;
    if (++window_count_ == cfg_.eval_every) {
        schedule_.observe(window_sum_ / static_cast<double>(window_count_));
        window_sum_ = 0.0;
        window_count_ = 0;
    }
    return value;
}

nlohmann::json Trainer::state_json() const
{
    return {{"step", adam_.step},
            {"best", std::isfinite(schedule_.best()) ? nlohmann::json(schedule_.best()) : nlohmann::json()},
            {"since_best", schedule_.since_best()},
            {"dropped", schedule_.dropped()},
            {"window_sum", window_sum_},
            {"window_count", window_count_}};
}

void Trainer::restore(const diff::AdamState<float>& adam, const nlohmann::json& state)
{
    try {
        if (state.at("step").get<std::uint64_t>() != adam.step)
            throw ValidationError("checkpoint step does not match the optimizer state");
        adam_ = adam;
        const auto& best = state.at("best");
        schedule_.restore(best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>(),
                          state.at("since_best").get<std::size_t>(), state.at("dropped").get<bool>());
        window_sum_ = state.at("window_sum").get<double>();
        window_count_ = state.at("window_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad trainer state: ") + e.what());
    }
}

} // namespace lfcap
