#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <random>

#include "lfcap/data.hpp"
#include "lfcap/diff/ops.hpp"
#include "lfcap/hqs.hpp"
#include "lfcap/model.hpp"
#include "lfcap/training.hpp"
#include "oracles.hpp"

using namespace lfcap;

namespace {

double rel_error(std::span<const double> a, std::span<const double> b)
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

// Per-pixel ridge solution (A^T A + c I)^-1 A^T l for a single-channel light field.
std::vector<double> ridge(const ApertureCode& code, std::size_t M, std::size_t N,
                          const BasicMeasurementSet<double>& l, double c)
{
    const Eigen::MatrixXd A = oracle::sensing_matrix(code, M, N);
    const Eigen::MatrixXd lhs = A.transpose() * A + c * Eigen::MatrixXd::Identity(A.cols(), A.cols());
    const auto solver = lhs.ldlt();
    std::vector<double> x(M * N * l.H * l.W);
    for (std::size_t p = 0; p < l.H * l.W; ++p) {
        Eigen::VectorXd lp(A.rows());
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            lp(i) = l.data[static_cast<std::size_t>(i) * l.H * l.W + p];
        const Eigen::VectorXd xp = solver.solve(A.transpose() * lp);
        for (Eigen::Index v = 0; v < A.cols(); ++v)
            x[static_cast<std::size_t>(v) * l.H * l.W + p] = xp(v);
    }
    return x;
}

double dense_norm(const ApertureCode& code, std::size_t M, std::size_t N)
{
    const Eigen::MatrixXd A = oracle::sensing_matrix(code, M, N);
    return Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
}

ModelConfig small_config(std::size_t stages, std::size_t depth, std::size_t features)
{
    ModelConfig c;
    c.M = c.N = 3;
    c.ku = 3;
    c.kv = 2;
    c.stages = stages;
    c.sas = {features, depth, 3, false};
    return c;
}

} // namespace

TEST_CASE("operator norm")
{
    CHECK(estimate_operator_norm(ApertureCode::selector(3, 3, 1, 1), 3, 3) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(estimate_operator_norm(ApertureCode::ones(2, 2), 2, 2) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(dense_norm(ApertureCode::ones(2, 2), 2, 2) == doctest::Approx(2.0).epsilon(1e-12));
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> side(3, 7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t M = side(rng), N = side(rng);
        const std::size_t ku = trial < 10 ? 3 : std::uniform_int_distribution<std::size_t>(1, M)(rng);
        const std::size_t kv = trial < 10 ? 3 : std::uniform_int_distribution<std::size_t>(1, N)(rng);
        const ApertureCode code = ApertureCode::random(ku, kv, 50 + trial);
        const double est = estimate_operator_norm(code, M, N), ref = dense_norm(code, M, N);
        CHECK(std::abs(est - ref) / ref < 0.01);
    }
}

TEST_CASE("hqs config validation")
{
    HqsConfig c;
    c.eta = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = HqsConfig{};
    c.lambda = -1.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = HqsConfig{};
    c.delta = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("tikhonov hqs converges to the ridge solution")
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const LfShape s{2, 2, 4, 4, 1};
        const ApertureCode code = ApertureCode::random(2, 2, 10 + trial);
        const auto x_true = oracle::random_lf(s, rng);
        const auto l = forward_project(x_true, code);
        HqsConfig cfg;
        cfg.eta = 0.5 + 0.1 * trial;
        cfg.lambda = 0.2 + 0.15 * trial;
        const double c = cfg.eta * cfg.lambda / (2.0 * cfg.eta + cfg.lambda);
        const double norm = estimate_operator_norm(code, 2, 2);
        cfg.delta = 1.0 / (norm * norm + c);
        cfg.max_iterations = 2000;
        cfg.tolerance = 1e-12;
        const auto result = hqs_classical<double>(l, code, 2, 2, tikhonov_prox<double>(cfg.eta, cfg.lambda), cfg);
        const auto ref = ridge(code, 2, 2, l, c);
        // canonical (u, v, x, y) with one channel is view-major, as is the oracle
        CHECK(rel_error(result.x.data(), ref) < 1e-4);
        CHECK(result.iterations <= 2000);
    }
}

TEST_CASE("landweber residual is non-increasing below the step bound")
{
    std::mt19937_64 rng(3);
    const LfShape s{5, 5, 4, 4, 1};
    const ApertureCode code = ApertureCode::random(4, 4, 4);
    const auto l = forward_project(oracle::random_lf(s, rng), code);
    HqsConfig cfg;
    const double norm = estimate_operator_norm(code, 5, 5);
    cfg.delta = 0.99 / (norm * norm);
    cfg.max_iterations = 300;
    cfg.tolerance = 0.0;
    const auto r = hqs_classical<double>(l, code, 5, 5, identity_prox<double>(), cfg);
    CHECK_FALSE(r.converged);
    REQUIRE(r.residual_norms.size() == 300);
    for (std::size_t i = 1; i < r.residual_norms.size(); ++i)
        CHECK(r.residual_norms[i] <= r.residual_norms[i - 1] * (1.0 + 1e-12));
    CHECK(r.residual_norms.back() < 0.5 * r.residual_norms.front());
}

TEST_CASE("full-rank selector measurements are recovered exactly")
{
    std::mt19937_64 rng(4);
    const LfShape s{3, 3, 4, 4, 1};
    const auto x_true = oracle::random_lf(s, rng);
    const ApertureCode code = ApertureCode::ones(1, 1);
    const auto l = forward_project(x_true, code);
    CHECK(l.k == 9);
    HqsConfig cfg;
    cfg.delta = 0.5;
    cfg.max_iterations = 200;
    cfg.tolerance = 1e-13;
    const auto r = hqs_classical<double>(l, code, 3, 3, identity_prox<double>(), cfg);
    CHECK(r.converged);
    CHECK(rel_error(r.x.data(), x_true.data()) < 1e-10);
}

TEST_CASE("classical hqs rejects inconsistent inputs")
{
    const BasicMeasurementSet<double> l(3, 2, 2, 1);
    HqsConfig cfg;
    CHECK_THROWS_AS(hqs_classical<double>(l, ApertureCode::random(2, 2, 1), 3, 3, identity_prox<double>(), cfg),
                    ValidationError);
}

TEST_CASE("model parameters and configuration")
{
    const ModelConfig cfg = small_config(2, 1, 4);
    const UnrolledModel<float> m(cfg, 3);
    const auto& p = m.params();
    CHECK(p.contains("acq.weight"));
    CHECK(p.contains("init.inverse.weight"));
    CHECK(p.contains("stage1.proj.weight"));
    CHECK(p.contains("stage1.inverse.weight"));
    CHECK(p.contains("stage0.log_delta"));
    CHECK(p.contains("stage0.log_eta"));
    CHECK(p.contains("stage1.reg.proj.bias"));
    CHECK(m.stage_delta(0) == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(m.stage_eta(1) == doctest::Approx(0.1).epsilon(1e-6));
    for (float w : p.value("acq.weight").data) {
        CHECK(w >= 0.0f);
        CHECK(w <= 1.0f);
    }
    CHECK(p.value("stage0.proj.weight").data == p.value("acq.weight").data);

    const ModelConfig back = ModelConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    ModelConfig bad = cfg;
    bad.stages = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.ku = 4;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    auto params = p;
    params.value("stage0.proj.weight") = diff::Tensor<float>(diff::Shape{1, 2, 2});
    CHECK_THROWS_AS(UnrolledModel<float>(cfg, params), ValidationError);
}

TEST_CASE("acquisition clamp")
{
    UnrolledModel<float> m(small_config(1, 1, 2), 1);
    auto& w = m.params().value("acq.weight").data;
    w[0] = -0.5f;
    w[1] = 1.5f;
    m.clamp_acquisition();
    CHECK(w[0] == 0.0f);
    CHECK(w[1] == 1.0f);
}

TEST_CASE("one identity stage with eta zero is a gradient step")
{
    const ModelConfig cfg = small_config(1, 2, 3);
    UnrolledModel<double> m(cfg, 5);
    const ApertureCode code = ApertureCode::random(3, 2, 6);
    m.tie_projections(code);
    m.set_identity_regularizers();
    m.set_stage_scalars(0, 0.3, 0.0);
    std::mt19937_64 rng(7);
    const LfShape s{3, 3, 4, 4, 1};
    const auto l = forward_project(oracle::random_lf(s, rng), code);
    const auto out = reconstruct_tensor(l, m);

    const auto x0 = adjoint_project(l, code, 3, 3);
    auto r = forward_project(x0, code);
    for (std::size_t i = 0; i < r.data.size(); ++i)
        r.data[i] -= l.data[i];
    const auto g = adjoint_project(r, code, 3, 3);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(x0.data()[i] - 0.3 * g.data()[i]).epsilon(1e-12));
}

TEST_CASE("zero step sizes freeze the initial estimate")
{
    const ModelConfig cfg = small_config(3, 1, 3);
    UnrolledModel<double> m(cfg, 8);
    for (std::size_t t = 0; t < 3; ++t)
        m.params().value(UnrolledModel<double>::stage_prefix(t) + ".log_delta").data[0] =
            -std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(9);
    const auto l = forward_project(oracle::random_lf({3, 3, 5, 4, 1}, rng), m.acquisition_code());
    const auto out = reconstruct_tensor(l, m);
    const auto& w0 = m.params().value("init.inverse.weight");
    const ApertureCode inverse(3, 2, {w0.data.begin(), w0.data.end()});
    const auto x0 = adjoint_project(l, inverse, 3, 3);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == x0.data()[i]);
}

TEST_CASE("reconstruction shape for any stage count")
{
    for (std::size_t T : {1u, 2u, 4u}) {
        const UnrolledModel<float> m(small_config(T, 1, 2), T);
        const LightField lf = LightField::constant({3, 3, 6, 5, 1}, 0.5f);
        const LightField rec = unrolled_reconstruct(forward_project(lf, m.acquisition_code()), m);
        CHECK(rec.shape() == lf.shape());
    }
    const UnrolledModel<float> m(small_config(1, 1, 2), 1);
    const MeasurementSet wrong(4, 3, 3, 1);
    CHECK_THROWS_AS(unrolled_reconstruct(wrong, m), ValidationError);
}

TEST_CASE("tied unrolled model bit-matches classical hqs")
{
    const std::size_t T = 4;
    ModelConfig cfg = small_config(T, 2, 3);
    UnrolledModel<float> m(cfg, 10);
    const ApertureCode code = ApertureCode::random(3, 2, 11);
    m.tie_projections(code);
    m.set_identity_regularizers();
    for (std::size_t t = 0; t < T; ++t)
        m.set_stage_scalars(t, 0.125, 0.0);
    std::mt19937_64 rng(12);
    LfTensor<float> truth({3, 3, 6, 6, 1});
    for (float& v : truth.data())
        v = std::uniform_real_distribution<float>(0.f, 1.f)(rng);
    const auto l = forward_project(truth, code);

    const auto unrolled = reconstruct_tensor(l, m);
    const auto x0 = adjoint_project(l, code, 3, 3);
    HqsConfig hc;
    hc.delta = static_cast<double>(m.stage_delta(0));
    hc.eta = 1.0;
    hc.max_iterations = T;
    hc.tolerance = 0.0;
    const auto classical = hqs_classical<float>(l, code, 3, 3, identity_prox<float>(), hc, &x0);
    CHECK(classical.iterations == T);
    std::size_t mismatched = 0;
    for (std::size_t i = 0; i < unrolled.size(); ++i)
        mismatched += unrolled.data()[i] != classical.x.data()[i];
    CHECK(mismatched == 0);
}

TEST_CASE("full unrolled graph passes the finite-difference audit")
{
    ModelConfig cfg = small_config(2, 2, 3);
    UnrolledModel<double> m(cfg, 13);
    std::mt19937_64 rng(14);
    const auto gt = oracle::random_lf({3, 3, 4, 4, 1}, rng);
    const diff::Tensor<double> gt_t(diff::Shape{1, 1, 3, 3, 4, 4}, {gt.data().begin(), gt.data().end()});
    // Zero biases put dead receptive fields exactly on a ReLU kink; move them off it.
    std::normal_distribution<double> offset(0.0, 0.05);
    for (const auto& name : m.params().names())
        if (name.ends_with(".bias"))
            for (double& v : m.params().value(name).data)
                v = offset(rng);
    // Smooth readout; the l1 loss has its own gradient check.
    diff::Tensor<double> readout(gt_t.shape);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (double& v : readout.data)
        v = unit(rng);
    auto loss = [&](bool backward) {
        diff::Graph<double> g;
        diff::Binding<double> bound(g, m.params());
        const auto target = g.constant(gt_t);
        const auto l = diff::dot(m.reconstruct(bound, m.capture(bound, target)), g.constant(readout));
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
    std::size_t checked = 0;
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
            ++checked;
        }
    }
    CHECK(checked == m.params().parameter_count());
    CHECK(worst < 1e-4);
}

TEST_CASE("training reduces the loss and keeps the code feasible")
{
    const LightField lf = render_synthetic(random_scene({3, 3, 8, 8, 1}, 15, 1, 1.0));
    UnrolledModel<float> m(small_config(2, 1, 4), 16);
    TrainConfig tc;
    tc.batch = 2;
    tc.patch = 8;
    tc.lr = 2e-3;
    Trainer trainer(m, tc, {lf});
    std::vector<double> losses;
    for (int i = 0; i < 100; ++i) {
        losses.push_back(trainer.step());
        for (float w : m.params().value("acq.weight").data) {
            REQUIRE(w >= 0.0f);
            REQUIRE(w <= 1.0f);
        }
    }
    CHECK(trainer.steps_done() == 100);
    // Patches are resampled every step, so compare window means.
    const auto mean = [&](std::size_t from) {
        return std::accumulate(losses.begin() + from, losses.begin() + from + 10, 0.0) / 10.0;
    };
    MESSAGE("first 10: " << mean(0) << ", last 10: " << mean(90));
    CHECK(mean(90) < mean(0));
}

TEST_CASE("zero learning rate keeps the loss constant")
{
    const LightField lf = render_synthetic(random_scene({3, 3, 8, 8, 1}, 17, 1, 1.0));
    UnrolledModel<float> m(small_config(1, 1, 2), 18);
    TrainConfig tc;
    tc.batch = 2;
    tc.patch = 8;
    tc.lr = 0.0;
    tc.lr_reduced = 0.0;
    Trainer trainer(m, tc, {lf});
    const double first = trainer.step();
    for (int i = 0; i < 5; ++i)
        CHECK(trainer.step() == first);
}

TEST_CASE("training is deterministic and resumes exactly")
{
    const LightField lf = render_synthetic(random_scene({3, 3, 12, 12, 1}, 19, 1, 1.0));
    TrainConfig tc;
    tc.batch = 2;
    tc.patch = 8;
    tc.lr = 1e-3;
    tc.eval_every = 3;
    tc.patience = 1;
    tc.noise_sigma = 3.0;
    tc.seed = 20;
    const ModelConfig cfg = small_config(2, 1, 3);

    UnrolledModel<float> a(cfg, 21);
    Trainer ta(a, tc, {lf});
    std::vector<double> straight;
    for (int i = 0; i < 12; ++i)
        straight.push_back(ta.step());

    UnrolledModel<float> b(cfg, 21);
    Trainer tb(b, tc, {lf});
    std::vector<double> resumed;
    for (int i = 0; i < 7; ++i)
        resumed.push_back(tb.step());
    const auto path = std::filesystem::temp_directory_path() / "lfcap_test_resume.ck";
    diff::save_checkpoint(path, b.params(), &tb.adam(), tb.state_json().dump());

    auto ck = diff::load_checkpoint<float>(path);
    UnrolledModel<float> c(cfg, std::move(ck.params));
    Trainer tcn(c, tc, {lf});
    tcn.restore(*ck.adam, nlohmann::json::parse(ck.meta));
    for (int i = 7; i < 12; ++i)
        resumed.push_back(tcn.step());
    CHECK(resumed == straight);
    CHECK(c.params().value("stage1.reg.proj.weight").data == a.params().value("stage1.reg.proj.weight").data);
}

TEST_CASE("trainer validates its inputs")
{
    UnrolledModel<float> m(small_config(1, 1, 2), 1);
    TrainConfig tc;
    tc.patch = 8;
    CHECK_THROWS_AS(Trainer(m, tc, {}), ValidationError);
    CHECK_THROWS_AS(Trainer(m, tc, {LightField::constant({3, 3, 4, 4, 1}, 0.5f)}), ValidationError);
    CHECK_THROWS_AS(Trainer(m, tc, {LightField::constant({5, 5, 8, 8, 1}, 0.5f)}), ValidationError);
    tc.noise_sigma = -1.0;
    CHECK_THROWS_AS(Trainer(m, tc, {LightField::constant({3, 3, 8, 8, 1}, 0.5f)}), ValidationError);
}
