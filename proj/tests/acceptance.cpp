// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as arguments
// to run a subset, e.g. `acceptance 1 2 11`. `--report FILE` also writes the result lines.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "lfcap/config.hpp"
#include "lfcap/data.hpp"
#include "lfcap/diff/ops.hpp"
#include "lfcap/experiment.hpp"
#include "lfcap/hqs.hpp"
#include "lfcap/metrics.hpp"
#include "lfcap/model.hpp"
#include "lfcap/training.hpp"
#include "metric_oracles.hpp"
#include "oracles.hpp"

using namespace lfcap;
using diff::Graph;
using diff::Plane;
using diff::Shape;
using diff::Tensor;
using diff::Var;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename... Args>
std::string fmt(const char* f, Args... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    const std::size_t n = diff::numel(shape);
    return Tensor<double>(std::move(shape), oracle::random_vector(n, rng, lo, hi));
}

Tensor<double> away_from_zero(Shape shape, std::mt19937_64& rng)
{
    Tensor<double> t = random_tensor(std::move(shape), rng);
    for (double& v : t.data)
        v = v < 0 ? v - 0.05 : v + 0.05;
    return t;
}

// ---------------------------------------------------------------------------

Outcome adjoint_identity()
{
    constexpr int kInstances = 200;
    constexpr double kTol = 1e-6, kSeconds = 10.0;
    const Clock clock;
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> dim(1, 7), sp(1, 8);
    double worst = 0.0;
    for (int trial = 0; trial < kInstances; ++trial) {
        const std::size_t C = trial % 3 == 0 ? 3 : 1;
        const LfShape s{dim(rng), dim(rng), sp(rng), sp(rng), C};
        std::uniform_int_distribution<std::size_t> ku(1, s.M), kv(1, s.N);
        const ApertureCode code =
            ApertureCode::random(ku(rng), kv(rng), 1000 + trial, C == 3 && trial % 2 == 0, C);
        const auto x = oracle::random_lf(s, rng, -1.0, 1.0);
        const auto Ax = forward_project(x, code);
        BasicMeasurementSet<double> y(Ax.k, s.H, s.W, C);
        y.data = oracle::random_vector(y.data.size(), rng);
        const auto Aty = adjoint_project(y, code, s.M, s.N);
        const double lhs = dot(Ax.data, y.data), rhs = dot(x.data(), Aty.data());
        worst = std::max(worst, std::abs(lhs - rhs) / (norm(Ax.data) * norm(y.data)));
    }
    const double t = clock.seconds();
    return {worst < kTol && t < kSeconds,
            fmt("worst %.2e over %d instances (limit %.0e), %.2f s (limit %.0f s)", worst, kInstances,
                kTol, t, kSeconds)};
}

Outcome measurement_table()
{
    struct Row {
        std::size_t ku, kv, k;
    };
    const Row rows[] = {{7, 7, 1}, {7, 6, 2}, {6, 6, 4}};
    std::ostringstream detail;
    bool pass = true;
    for (const Row& r : rows) {
        const std::size_t k = measurement_count(7, 7, r.ku, r.kv);
        const auto back = kernel_for(7, 7, r.k);
        const ApertureCode code = ApertureCode::random(r.ku, r.kv, 1);
        const std::size_t captured = forward_project(LightField::constant({7, 7, 2, 2, 1}, 0.5f), code).k;
        const bool ok = k == r.k && captured == r.k && back.first == r.ku && back.second == r.kv;
        pass = pass && ok;
        detail << r.ku << "x" << r.kv << "->" << k << (ok ? "" : "(!)") << " ";
    }
    detail << "on 7x7 views";
    return {pass, detail.str()};
}

Outcome gradient_audit()
{
    constexpr double kTol = 1e-4, kSeconds = 120.0;
    const Clock clock;
    std::mt19937_64 rng(3);
    std::vector<std::pair<std::string, double>> results;
    auto record = [&](std::string name, double err) { results.emplace_back(std::move(name), err); };

    {
        const Shape s{2, 3, 4};
        auto a = random_tensor(s, rng), b = random_tensor(s, rng), r = random_tensor(s, rng);
        const auto k = random_tensor({1}, rng);
        auto weigh = [&](Graph<double>& g, const Var<double>& v) { return diff::dot(v, g.constant(r)); };
        using G = Graph<double>;
        using Vs = std::vector<Var<double>>;
        record("add", oracle::gradcheck({a, b}, [&](G& g, Vs& v) { return weigh(g, diff::add(v[0], v[1])); }));
        record("sub", oracle::gradcheck({a, b}, [&](G& g, Vs& v) { return weigh(g, diff::sub(v[0], v[1])); }));
        record("mul", oracle::gradcheck({a, b}, [&](G& g, Vs& v) { return weigh(g, diff::mul(v[0], v[1])); }));
        record("scale", oracle::gradcheck({a}, [&](G& g, Vs& v) { return weigh(g, diff::scale(v[0], -1.7)); }));
        record("mul_scalar",
               oracle::gradcheck({a, k}, [&](G& g, Vs& v) { return weigh(g, diff::mul_scalar(v[0], v[1])); }));
        record("exp", oracle::gradcheck({a}, [&](G& g, Vs& v) { return weigh(g, diff::exp(v[0])); }));
        record("relu", oracle::gradcheck({away_from_zero(s, rng)},
                                         [&](G& g, Vs& v) { return weigh(g, diff::relu(v[0])); }));
        record("sum", oracle::gradcheck({a}, [&](G&, Vs& v) { return diff::sum(diff::mul(v[0], v[0])); }));
        record("dot", oracle::gradcheck({a, b}, [&](G&, Vs& v) { return diff::dot(v[0], v[1]); }));
        record("reshape", oracle::gradcheck({a}, [&](G& g, Vs& v) {
                   return diff::dot(diff::reshape(v[0], Shape{6, 4}),
                                    g.constant(Tensor<double>(Shape{6, 4}, r.data)));
               }));
        record("l1_loss", oracle::gradcheck({away_from_zero(s, rng), b},
                                            [&](G&, Vs& v) { return diff::l1_loss(v[0], v[1]); }));
    }
    {
        const std::size_t B = 2, C = 3, M = 4, N = 3, H = 2, W = 3;
        for (std::size_t K : {1u, 3u}) {
            const auto x = random_tensor({B, C, M, N, H, W}, rng);
            const auto kernel = random_tensor({K, 2, 2}, rng);
            const auto r = random_tensor({B, C, (M - 1) * (N - 1), H, W}, rng);
            const auto back_r = random_tensor({B, C, M, N, H, W}, rng);
            record("project", oracle::gradcheck({x, kernel}, [&](auto& g, auto& v) {
                       return diff::dot(diff::project(v[0], v[1]), g.constant(r));
                   }));
            record("backproject", oracle::gradcheck({r, kernel}, [&](auto& g, auto& v) {
                       return diff::dot(diff::backproject(v[0], v[1], M, N), g.constant(back_r));
                   }));
        }
    }
    {
        const Shape s{2, 2, 3, 3, 4, 3};
        const auto r = random_tensor({2, 3, 3, 3, 4, 3}, rng);
        for (Plane plane : {Plane::spatial, Plane::angular}) {
            Tensor<double> x, w, b;
            double margin = 0.0;
            while (margin < 1e-3) {
                x = random_tensor(s, rng);
                w = random_tensor({3, 2, 3, 3}, rng);
                b = random_tensor({3}, rng);
                Graph<double> g;
                const auto pre = diff::conv_plane(g.constant(x), g.constant(w), g.constant(b), plane, false);
                margin = 1e9;
                for (double v : pre.value().data)
                    margin = std::min(margin, std::abs(v));
            }
            const std::string name = plane == Plane::spatial ? "conv_spatial" : "conv_angular";
            for (bool act : {false, true})
                record(name + (act ? "+relu" : ""), oracle::gradcheck({x, w, b}, [&](auto& g, auto& v) {
                           return diff::dot(diff::conv_plane(v[0], v[1], v[2], plane, act), g.constant(r));
                       }));
        }
    }
    {
        ModelConfig cfg;
        cfg.M = cfg.N = 3;
        cfg.ku = 3;
        cfg.kv = 2;
        cfg.stages = 2;
        cfg.sas = {3, 2, 3, false};
        UnrolledModel<double> m(cfg, 13);
        const auto gt = oracle::random_lf({3, 3, 4, 4, 1}, rng);
        const Tensor<double> gt_t(Shape{1, 1, 3, 3, 4, 4}, {gt.data().begin(), gt.data().end()});
        std::normal_distribution<double> offset(0.0, 0.05);
        for (const auto& name : m.params().names())
            if (name.ends_with(".bias"))
                for (double& v : m.params().value(name).data)
                    v = offset(rng);
        const Tensor<double> readout = random_tensor(gt_t.shape, rng);
        auto loss = [&](bool backward) {
            Graph<double> g;
            diff::Binding<double> bound(g, m.params());
            const auto l = diff::dot(m.reconstruct(bound, m.capture(bound, g.constant(gt_t))), g.constant(readout));
            if (backward) {
                g.backward(l);
                m.params().zero_grad();
                bound.accumulate_grads(m.params());
            }
            return l.value().item();
        };
        loss(true);
        const double h = 1e-5;
        double worst = 0.0;
        for (const auto& name : m.params().names()) {
            const auto analytic = m.params().grad(name);
            double scale = 0.0;
            for (double a : analytic.data)
                scale = std::max(scale, std::abs(a));
            const double floor = std::max(1e-8, 1e-3 * scale);
            auto& value = m.params().value(name).data;
            for (std::size_t i = 0; i < value.size(); ++i) {
                const double saved = value[i];
                value[i] = saved + h;
                const double up = loss(false);
                value[i] = saved - h;
                const double down = loss(false);
                value[i] = saved;
                const double fd = (up - down) / (2.0 * h);
                const double a = analytic.data[i];
                worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor}));
            }
        }
        record(fmt("unrolled T=2 D=2 (%zu params)", m.params().parameter_count()), worst);
    }

    double worst = 0.0;
    std::string worst_name;
    for (const auto& [name, err] : results)
        if (err >= worst) {
            worst = err;
            worst_name = name;
        }
    const double t = clock.seconds();
    return {worst < kTol && t < kSeconds,
            fmt("%zu checks, worst %.2e in %s (limit %.0e), %.1f s (limit %.0f s)", results.size(), worst,
                worst_name.c_str(), kTol, t, kSeconds)};
}

Outcome tikhonov_oracle()
{
    constexpr double kTol = 1e-4, kSeconds = 5.0;
    constexpr std::size_t kMaxIterations = 2000;
    const Clock clock;
    std::mt19937_64 rng(4);
    double worst = 0.0;
    std::size_t most = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const LfShape s{2, 2, 4, 4, 1};
        const ApertureCode code = ApertureCode::random(2, 2, 40 + trial);
        const auto l = forward_project(oracle::random_lf(s, rng), code);
        HqsConfig cfg;
        cfg.eta = 0.5 + 0.1 * trial;
        cfg.lambda = 0.2 + 0.15 * trial;
        // fixed point of the coupled x and v updates
        const double c = cfg.eta * cfg.lambda / (2.0 * cfg.eta + cfg.lambda);
        const double op = estimate_operator_norm(code, 2, 2);
        // a full 1 / (|A|^2 + c) step solves the rank-one case at once
        cfg.delta = 0.5 / (op * op + c);
        cfg.max_iterations = kMaxIterations;
        cfg.tolerance = 1e-12;
        const auto r = hqs_classical<double>(l, code, 2, 2, tikhonov_prox<double>(cfg.eta, cfg.lambda), cfg);

        const Eigen::MatrixXd A = oracle::sensing_matrix(code, 2, 2);
        const auto solver = (A.transpose() * A + c * Eigen::MatrixXd::Identity(4, 4)).ldlt();
        double num = 0.0, den = 0.0;
        for (std::size_t p = 0; p < 16; ++p) {
            Eigen::VectorXd lp(A.rows());
            for (Eigen::Index i = 0; i < A.rows(); ++i)
                lp(i) = l.data[static_cast<std::size_t>(i) * 16 + p];
            const Eigen::VectorXd xp = solver.solve(A.transpose() * lp);
            for (Eigen::Index v = 0; v < 4; ++v) {
                const double d = r.x.data()[static_cast<std::size_t>(v) * 16 + p] - xp(v);
                num += d * d;
                den += xp(v) * xp(v);
            }
        }
        worst = std::max(worst, std::sqrt(num / den));
        most = std::max(most, r.iterations);
    }
    const double t = clock.seconds();
    return {worst < kTol && most <= kMaxIterations && t < kSeconds,
            fmt("worst relative error %.2e (limit %.0e), at most %zu iterations, %.2f s (limit %.0f s)", worst,
                kTol, most, t, kSeconds)};
}

Outcome tied_equivalence()
{
    constexpr double kTol = 1e-6;
    double worst = 0.0;
    std::size_t cases = 0, exact = 0;
    for (std::size_t T : {1u, 2u, 4u, 6u}) {
        ModelConfig cfg;
        cfg.M = cfg.N = 5;
        cfg.ku = cfg.kv = 4;
        cfg.stages = T;
        cfg.sas = {3, 2, 3, false};
        UnrolledModel<float> m(cfg, 20 + T);
        const ApertureCode code = ApertureCode::random(4, 4, 30 + T);
        m.tie_projections(code);
        m.set_identity_regularizers();
        for (std::size_t t = 0; t < T; ++t)
            m.set_stage_scalars(t, 0.05, 0.0);
        std::mt19937_64 rng(40 + T);
        LfTensor<float> truth({5, 5, 8, 7, 1});
        for (float& v : truth.data())
            v = std::uniform_real_distribution<float>(0.f, 1.f)(rng);
        const auto l = forward_project(truth, code);
        const auto unrolled = reconstruct_tensor(l, m);
        const auto x0 = adjoint_project(l, code, 5, 5);
        HqsConfig hc;
        hc.delta = static_cast<double>(m.stage_delta(0));
        hc.max_iterations = T;
        hc.tolerance = 0.0;
        const auto classical = hqs_classical<float>(l, code, 5, 5, identity_prox<float>(), hc, &x0);
        double num = 0.0, den = 0.0;
        bool same = classical.iterations == T;
        for (std::size_t i = 0; i < unrolled.size(); ++i) {
            const double d = double(unrolled.data()[i]) - double(classical.x.data()[i]);
            num += d * d;
            den += double(classical.x.data()[i]) * classical.x.data()[i];
            same = same && unrolled.data()[i] == classical.x.data()[i];
        }
        worst = std::max(worst, classical.iterations == T ? std::sqrt(num / den) : 1.0);
        ++cases;
        exact += same;
    }
    return {worst <= kTol, fmt("T in {1,2,4,6}: %zu/%zu bit-identical, worst relative difference %.2e (limit %.0e)",
                               exact, cases, worst, kTol)};
}

// ---------------------------------------------------------------------------
// Overfit run shared by the convergence, aperture and slope criteria.

struct OverfitRun {
    ExperimentResult result;
    std::optional<UnrolledModel<float>> model;
    LightField scene;
    std::size_t checked_steps = 0;
    std::size_t infeasible_steps = 0;
    float lowest = std::numeric_limits<float>::infinity();
    float highest = -std::numeric_limits<float>::infinity();
};

const OverfitRun& overfit_run()
{
    static std::optional<OverfitRun> run;
    if (run)
        return *run;
    run.emplace();
    SceneSpec spec;
    spec.shape = {5, 5, 32, 32, 1};
    spec.layers.push_back({{TextureKind::band_noise, 7, 1.5}, 1.0, {}});
    run->scene = render_synthetic(spec);

    RunConfig cfg = RunConfig::preset_config("tiny");
    cfg.train.batch = 1; // one scene, so each step sees the whole light field
    cfg.train.patch = 32;
    const Benchmark bench{{run->scene}, {run->scene}};
    OverfitRun& r = *run;
    r.result = run_experiment(cfg, bench, [&](std::size_t step, double, const UnrolledModel<float>& m) {
        ++r.checked_steps;
        bool feasible = true;
        for (float w : m.params().value("acq.weight").data) {
            feasible = feasible && w >= 0.0f && w <= 1.0f;
            r.lowest = std::min(r.lowest, w);
            r.highest = std::max(r.highest, w);
        }
        r.infeasible_steps += !feasible;
        if (step + 1 == cfg.train.steps)
            r.model.emplace(m);
    });
    return *run;
}

Outcome overfit_convergence()
{
    constexpr double kPsnr = 40.0, kSeconds = 900.0;
    constexpr std::size_t kSteps = 2000;
    const OverfitRun& r = overfit_run();
    const double psnr_db = r.result.test.psnr;
    return {psnr_db > kPsnr && r.result.losses.size() <= kSteps && r.result.seconds < kSeconds,
            fmt("PSNR %.2f dB on the training light field after %zu steps (limit > %.0f dB), %.0f s (limit %.0f s)",
                psnr_db, r.result.losses.size(), kPsnr, r.result.seconds, kSeconds)};
}

Outcome aperture_constraint()
{
    const OverfitRun& r = overfit_run();
    return {r.checked_steps > 0 && r.infeasible_steps == 0,
            fmt("%zu steps checked, %zu outside [0, 1], weights seen in [%.4f, %.4f]", r.checked_steps,
                r.infeasible_steps, double(r.lowest), double(r.highest))};
}

Outcome epi_slope()
{
    constexpr double kTol = 0.3;
    const OverfitRun& r = overfit_run();
    const LightField rec = unrolled_reconstruct(forward_project(r.scene, r.model->acquisition_code()), *r.model);
    const double est = estimate_disparity(rec), truth_est = estimate_disparity(r.scene);
    return {std::abs(est - 1.0) < kTol,
            fmt("reconstruction slope %.3f px/view, ground truth 1 (estimate on ground truth %.3f), limit %.1f",
                est, truth_est, kTol)};
}

// ---------------------------------------------------------------------------
// Trend sweeps on a fixed synthetic benchmark.

RunConfig trend_config()
{
    RunConfig cfg = RunConfig::preset_config("tiny");
    cfg.test_scenes = 4;
    cfg.seed = 1;
    return cfg;
}

struct TrendPoint {
    double psnr = 0.0;
    double seconds = 0.0;
};

// Training is deterministic, so a configuration shared between sweeps is trained once.
TrendPoint trend_point(const RunConfig& cfg, const Benchmark& bench, std::ostringstream& log,
                       const std::string& label)
{
    static std::map<std::string, TrendPoint> cache;
    const std::string key = cfg.to_json().dump();
    auto it = cache.find(key);
    if (it == cache.end()) {
        const ExperimentResult r = run_experiment(cfg, bench);
        it = cache.emplace(key, TrendPoint{r.test.psnr, r.seconds}).first;
        std::printf("      %s: %.3f dB, %.0f s\n", label.c_str(), r.test.psnr, r.seconds);
        std::fflush(stdout);
    }
    log << label << " " << fmt("%.2f", it->second.psnr) << " dB; ";
    return it->second;
}

Outcome capacity_trends()
{
    constexpr double kStageGain = 0.2, kDepthGain = 0.1, kSweepSeconds = 7200.0;
    const RunConfig base = trend_config();
    const Benchmark bench = make_benchmark(base);
    std::ostringstream log;

    RunConfig c = base;
    c.stages = 1;
    const TrendPoint t1 = trend_point(c, bench, log, "T=1");
    c.stages = 3;
    const TrendPoint t3 = trend_point(c, bench, log, "T=3");

    c = base;
    c.stages = 3;
    c.depth = 3;
    const TrendPoint d3 = trend_point(c, bench, log, "D=3");
    c.depth = 6;
    const TrendPoint d6 = trend_point(c, bench, log, "D=6");

    const double stage_seconds = t1.seconds + t3.seconds, depth_seconds = d3.seconds + d6.seconds;
    const bool pass = t3.psnr >= t1.psnr + kStageGain && d6.psnr >= d3.psnr + kDepthGain &&
                      stage_seconds < kSweepSeconds && depth_seconds < kSweepSeconds;
    log << fmt("stage gain %+.2f dB (limit %+.1f), depth gain %+.2f dB (limit %+.1f), "
               "sweeps %.0f s and %.0f s (limit %.0f s each)",
               t3.psnr - t1.psnr, kStageGain, d6.psnr - d3.psnr, kDepthGain, stage_seconds, depth_seconds,
               kSweepSeconds);
    return {pass, log.str()};
}

Outcome noise_trend()
{
    const RunConfig base = trend_config();
    const Benchmark bench = make_benchmark(base);
    std::ostringstream log;
    std::vector<double> p;
    for (double sigma : {0.0, 3.0, 30.0}) {
        RunConfig c = base;
        c.noise_sigma = sigma;
        p.push_back(trend_point(c, bench, log, fmt("sigma=%g", sigma)).psnr);
    }
    const double drop3 = p[0] - p[1], drop30 = p[1] - p[2];
    const bool pass = p[0] > p[1] && p[1] > p[2] && drop30 > drop3;
    log << fmt("drop to sigma 3: %.2f dB, further drop to sigma 30: %.2f dB", drop3, drop30);
    return {pass, log.str()};
}

// ---------------------------------------------------------------------------

Outcome metrics_consistency()
{
    std::vector<std::string> failures;
    std::size_t checks = 0;
    auto expect = [&](bool ok, const char* what) {
        ++checks;
        if (!ok)
            failures.emplace_back(what);
    };
    std::mt19937_64 rng(11);
    auto random_field = [&](const LfShape& s) { return LightField::clamped(oracle::random_lf(s, rng)); };
    auto random_image = [&](std::size_t rows, std::size_t cols) {
        Image2D img{rows, cols, oracle::random_vector(rows * cols, rng, 0.0, 1.0)};
        return img;
    };

    const LightField a = random_field({3, 3, 12, 12, 3});
    const LightField b = random_field({3, 3, 12, 12, 3});
    expect(psnr(a, a) == kPsnrExact, "psnr(a, a) is the exact sentinel");
    const LightField lo = LightField::constant({2, 2, 4, 4, 1}, 0.25f);
    const LightField hi = LightField::constant({2, 2, 4, 4, 1}, 0.25f + 16.0f / 255.0f);
    expect(std::abs(psnr(lo, hi) - 20.0 * std::log10(255.0 / 16.0)) < 1e-5, "16/255 offset gives 24.03 dB");
    expect(std::abs(psnr(a, b) - oracle::psnr(a, b)) < 1e-9, "psnr loop oracle");
    expect(psnr(a, b) == psnr(b, a), "psnr symmetry");

    const Image2D ia = random_image(20, 24), ib = random_image(20, 24);
    expect(std::abs(ssim(ia, ia) - 1.0) < 1e-12, "ssim(a, a) = 1");
    expect(std::abs(ssim(ia, ib) - ssim(ib, ia)) < 1e-12, "ssim symmetry");
    expect(ssim(ia, ib) >= -1.0 && ssim(ia, ib) <= 1.0, "ssim range");
    expect(std::abs(ssim(ia, ib) - oracle::ssim(ia, ib, 11, 11)) < 1e-12, "ssim two-pass oracle");
    Image2D bin{16, 16, std::vector<double>(256)};
    std::bernoulli_distribution coin(0.5);
    for (double& v : bin.values)
        v = coin(rng) ? 1.0 : 0.0;
    Image2D neg = bin;
    for (double& v : neg.values)
        v = 1.0 - v;
    expect(ssim(bin, neg) < 0.3, "binary image against its negative");

    expect(std::abs(epi_ssim(a, a) - 1.0) < 1e-12, "epi_ssim(a, a) = 1");
    expect(std::abs(epi_ssim(a, b) - oracle::epi_ssim(a, b)) < 1e-12, "epi_ssim slice oracle");
    expect(epi_ssim(a, b) >= -1.0 && epi_ssim(a, b) <= 1.0, "epi_ssim range");
    SceneSpec spec;
    spec.shape = {5, 5, 24, 24, 1};
    spec.layers.push_back({{TextureKind::band_noise, 3, 1.5}, 1.0, {}});
    const LightField planar = render_synthetic(spec);
    std::vector<float> data(planar.data().begin(), planar.data().end());
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (std::size_t x = 0; x < 24; ++x)
        for (std::size_t y = 0; y < 24; ++y)
            data[canonical_index(planar.shape(), 2, 3, x, y)] = unit(rng);
    expect(epi_ssim(LightField(planar.shape(), data), planar) < epi_ssim(planar, planar),
           "one noisy view lowers epi_ssim");

    const ViewPsnrMap same = per_view_psnr(a, a);
    bool all_exact = true;
    for (double v : same.values)
        all_exact = all_exact && v == kPsnrExact;
    expect(all_exact, "per-view psnr of identical fields");
    const ViewPsnrMap map = per_view_psnr(a, b);
    bool views_ok = true;
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t v = 0; v < 3; ++v) {
            std::vector<float> va, vb;
            for (std::size_t x = 0; x < 12; ++x)
                for (std::size_t y = 0; y < 12; ++y)
                    for (std::size_t c = 0; c < 3; ++c) {
                        va.push_back(a.at(u, v, x, y, c));
                        vb.push_back(b.at(u, v, x, y, c));
                    }
            views_ok = views_ok && std::abs(map(u, v) - psnr(va, vb)) < 1e-9;
        }
    expect(views_ok, "per-view psnr matches scalar psnr per view");

    std::string detail = failures.empty() ? fmt("%zu identity and oracle checks hold", checks) : "failed:";
    for (const auto& f : failures)
        detail += " [" + f + "]";
    return {failures.empty(), detail};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> criteria = {
        {1, "adjoint identity", adjoint_identity},
        {2, "measurement-count table", measurement_table},
        {3, "gradient audit", gradient_audit},
        {4, "classical HQS against dense ridge", tikhonov_oracle},
        {5, "tied unrolled model equals classical HQS", tied_equivalence},
        {6, "overfit convergence", overfit_convergence},
        {7, "stage-count and depth trends", capacity_trends},
        {8, "noise trend", noise_trend},
        {9, "aperture stays in [0, 1]", aperture_constraint},
        {10, "EPI slope of a reconstruction", epi_slope},
        {11, "metrics self-consistency", metrics_consistency},
    };
    std::set<int> wanted;
    std::ofstream report;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--report" && i + 1 < argc)
            report.open(argv[++i]);
        else
            wanted.insert(std::stoi(arg));
    }

    int failed = 0;
    for (const Criterion& c : criteria) {
        if (!wanted.empty() && !wanted.contains(c.id))
            continue;
        std::printf("... %2d %s\n", c.id, c.name);
        std::fflush(stdout);
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        const std::string line = fmt("%s %2d %s: ", o.pass ? "PASS" : "FAIL", c.id, c.name) + o.detail;
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        if (report.is_open())
            report << line << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
