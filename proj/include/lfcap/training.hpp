#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "lfcap/diff/params.hpp"
#include "lfcap/model.hpp"

namespace lfcap {

struct TrainConfig {
    std::size_t steps = 1000;
    std::size_t batch = 5;
    std::size_t patch = 32;
    double lr = 1e-4;
    double lr_reduced = 1e-5;
    std::size_t patience = 10;  ///< plateau window, in evaluations
    std::size_t eval_every = 20; ///< steps per plateau evaluation
    double noise_sigma = 0.0;   ///< 8-bit scale, fresh draw per batch
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// End-to-end training of an UnrolledModel with an l1 loss and Adam. Every step
/// derives its randomness from (seed, step), so a resumed run replays exactly.
class Trainer {
public:
    Trainer(UnrolledModel<float>& model, const TrainConfig& cfg, std::vector<LightField> dataset);

    /// One optimizer step on a fresh batch. Returns the batch loss before the update.
    double step();

    std::size_t steps_done() const { return adam_.step; }
    double lr() const { return schedule_.lr(); }
    const diff::AdamState<float>& adam() const { return adam_; }

    /// Step counter, schedule position and window accumulator.
    nlohmann::json state_json() const;
    void restore(const diff::AdamState<float>& adam, const nlohmann::json& state);

private:
    UnrolledModel<float>* model_;
    TrainConfig cfg_;
    std::vector<LightField> dataset_;
    diff::AdamState<float> adam_;
    diff::PlateauSchedule schedule_;
    double window_sum_ = 0.0;
    std::size_t window_count_ = 0;
};

/// Seed for stream `stream` at step `step` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t step, std::uint64_t stream);

} // namespace lfcap
