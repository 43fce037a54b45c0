#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lfcap/config.hpp"
#include "lfcap/data.hpp"

namespace lfcap {

/// Synthetic training and test scenes derived from a run configuration.
struct Benchmark {
    std::vector<LightField> train;
    std::vector<LightField> test;
};

Benchmark make_benchmark(const RunConfig& cfg);

struct EvalSummary {
    double psnr = 0.0; ///< mean over scenes of whole-light-field PSNR
    double ssim = 0.0;
    double epi_ssim = 0.0;
};

/// Captures each scene with the model's acquisition code, adds noise at sigma (8-bit
/// scale) and scores the clamped reconstruction.
EvalSummary evaluate_model(const UnrolledModel<float>& model, std::span<const LightField> scenes,
                           double sigma, std::uint64_t seed);

struct ExperimentResult {
    std::vector<double> losses;
    EvalSummary test;
    double seconds = 0.0;
};

/// Called after every step with (step index, loss).
using StepCallback = std::function<void(std::size_t, double, const UnrolledModel<float>&)>;

/// Trains a fresh model on bench.train for cfg.train.steps steps at cfg.noise_sigma and
/// evaluates it on bench.test at the same noise level.
ExperimentResult run_experiment(const RunConfig& cfg, const Benchmark& bench,
                                const StepCallback& on_step = {});

} // namespace lfcap
