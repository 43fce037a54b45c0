#include "lfcap/experiment.hpp"

#include <chrono>

#include "lfcap/metrics.hpp"

namespace lfcap {

Benchmark make_benchmark(const RunConfig& cfg)
{
    const LfShape shape = cfg.scene_shape();
    Benchmark b;
    for (std::size_t i = 0; i < cfg.train_scenes; ++i)
        b.train.push_back(render_synthetic(
            random_scene(shape, derive_seed(cfg.seed, i, 101), 1 + i % 2, cfg.max_disparity)));
    for (std::size_t i = 0; i < cfg.test_scenes; ++i)
        b.test.push_back(render_synthetic(
            random_scene(shape, derive_seed(cfg.seed, i, 202), 1 + i % 2, cfg.max_disparity)));
    return b;
}

EvalSummary evaluate_model(const UnrolledModel<float>& model, std::span<const LightField> scenes,
                           double sigma, std::uint64_t seed)
{
    if (scenes.empty())
        throw ValidationError("evaluation needs at least one scene");
    const ApertureCode code = model.acquisition_code();
    EvalSummary s;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const MeasurementSet meas =
            add_measurement_noise(forward_project(scenes[i], code), sigma, derive_seed(seed, i, 303));
        const LightField rec = unrolled_reconstruct(meas, model);
        s.psnr += psnr(rec, scenes[i]);
        s.ssim += lf_ssim(rec, scenes[i]);
        s.epi_ssim += epi_ssim(rec, scenes[i]);
    }
    const double n = static_cast<double>(scenes.size());
    s.psnr /= n;
    s.ssim /= n;
    s.epi_ssim /= n;
    return s;
}

ExperimentResult run_experiment(const RunConfig& cfg, const Benchmark& bench,
                                const StepCallback& on_step)
{
    const auto start = std::chrono::steady_clock::now();
    UnrolledModel<float> model(cfg.model_config(), cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.noise_sigma = cfg.noise_sigma;
    Trainer trainer(model, tc, bench.train);

    ExperimentResult r;
    for (std::size_t s = 0; s < tc.steps; ++s) {
        r.losses.push_back(trainer.step());
        if (on_step)
            on_step(s, r.losses.back(), model);
    }
    r.test = evaluate_model(model, bench.test, cfg.noise_sigma, derive_seed(cfg.seed, 0, 404));
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

} // namespace lfcap
