#include <doctest.h>

#include <filesystem>
#include <random>

#include "lfcap/linops.hpp"
#include "oracles.hpp"

using namespace lfcap;

namespace {

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

} // namespace

TEST_CASE("measurement counts")
{
    CHECK(measurement_count(7, 7, 7, 7) == 1);
    CHECK(measurement_count(7, 7, 7, 6) == 2);
    CHECK(measurement_count(7, 7, 6, 6) == 4);
    CHECK(measurement_count(5, 5, 5, 4) == 2);
    for (std::size_t M = 1; M <= 7; ++M)
        for (std::size_t N = 1; N <= 7; ++N)
            CHECK(measurement_count(M, N, 1, 1) == M * N);
    CHECK_THROWS_AS(measurement_count(7, 7, 8, 1), ValidationError);
    CHECK_THROWS_AS(measurement_count(7, 7, 0, 1), ValidationError);
}

TEST_CASE("aperture code invariants")
{
    CHECK_THROWS_AS(ApertureCode(2, 2, {0.1, 0.2, 0.3}), ValidationError);
    CHECK_THROWS_AS(ApertureCode(1, 2, {0.1, 1.2}), ValidationError);
    CHECK_THROWS_AS(ApertureCode(1, 2, {-0.1, 0.2}), ValidationError);
    const ApertureCode r = ApertureCode::random(6, 6, 3);
    for (double w : r.weights()) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
    }
    CHECK_THROWS_AS(r.check_fits({5, 7, 8, 8, 1}), ValidationError);
    CHECK_NOTHROW(r.check_fits({7, 7, 8, 8, 1}));
    const ApertureCode pc = ApertureCode::random(2, 2, 4, true, 3);
    CHECK(pc.mask_count() == 3);
    CHECK_THROWS_AS(pc.check_fits({3, 3, 2, 2, 1}), ValidationError);
    const ApertureCode back = ApertureCode::from_json(pc.to_json());
    CHECK(back.per_channel());
    CHECK(std::equal(back.weights().begin(), back.weights().end(), pc.weights().begin()));
}

TEST_CASE("clamp_code")
{
    const ApertureCode c = clamp_code(KernelWeights{1, 1, 3, {-0.3, 1.7, 0.42}});
    CHECK(c.weight(0, 0, 0) == 0.0);
    CHECK(c.weight(0, 0, 1) == 1.0);
    CHECK(c.weight(0, 0, 2) == 0.42);
    const ApertureCode twice = clamp_code(c);
    CHECK(std::equal(twice.weights().begin(), twice.weights().end(), c.weights().begin()));
}

TEST_CASE("all-ones code sums every view")
{
    std::mt19937_64 rng(1);
    const LfShape s{7, 7, 3, 4, 1};
    const auto lf = oracle::random_lf(s, rng);
    const auto meas = forward_project(lf, ApertureCode::ones(7, 7));
    REQUIRE(meas.k == 1);
    for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t y = 0; y < 4; ++y) {
            double sum = 0.0;
            for (std::size_t u = 0; u < 7; ++u)
                for (std::size_t v = 0; v < 7; ++v)
                    sum += lf.at(u, v, x, y);
            CHECK(meas.at(0, x, y) == doctest::Approx(sum).epsilon(1e-12));
        }
}

TEST_CASE("selector code returns one view")
{
    std::mt19937_64 rng(2);
    const LfShape s{7, 7, 4, 4, 3};
    const LightField lf = LightField::clamped(oracle::random_lf(s, rng));
    const auto meas = forward_project(lf, ApertureCode::selector(7, 7, 2, 5));
    REQUIRE(meas.k == 1);
    for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(meas.at(0, x, y, c) == lf.at(2, 5, x, y, c));
}

TEST_CASE("forward projection matches the loop oracle")
{
    std::mt19937_64 rng(3);
    SUBCASE("5x5x8x8 with a 4x4 code gives 4 measurements")
    {
        const LfShape s{5, 5, 8, 8, 1};
        const auto lf = oracle::random_lf(s, rng);
        const ApertureCode code = ApertureCode::random(4, 4, 9);
        const auto meas = forward_project(lf, code);
        CHECK(meas.k == 4);
        const auto ref = oracle::project({lf.data().begin(), lf.data().end()}, s, code);
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(meas.data[i] - ref[i]) < 1e-6);
    }
    SUBCASE("random shapes, shared and per-channel masks")
    {
        for (int trial = 0; trial < 20; ++trial) {
            std::uniform_int_distribution<std::size_t> dim(1, 6);
            const std::size_t C = trial % 2 ? 3 : 1;
            const LfShape s{dim(rng), dim(rng), dim(rng), dim(rng), C};
            std::uniform_int_distribution<std::size_t> ku(1, s.M), kv(1, s.N);
            const ApertureCode code =
                ApertureCode::random(ku(rng), kv(rng), trial, trial % 4 == 1, C);
            const auto lf = oracle::random_lf(s, rng);
            const auto meas = forward_project(lf, code);
            const auto ref = oracle::project({lf.data().begin(), lf.data().end()}, s, code);
            REQUIRE(meas.data.size() == ref.size());
            double worst = 0.0;
            for (std::size_t i = 0; i < ref.size(); ++i)
                worst = std::max(worst, std::abs(meas.data[i] - ref[i]));
            CHECK(worst < 1e-12);
        }
    }
}

TEST_CASE("projection is linear")
{
    std::mt19937_64 rng(4);
    const LfShape s{5, 5, 6, 6, 1};
    const auto a = oracle::random_lf(s, rng), b = oracle::random_lf(s, rng);
    const ApertureCode code = ApertureCode::random(3, 4, 5);
    const double alpha = 0.7, beta = -1.3;
    LfTensor<double> mix(s);
    for (std::size_t i = 0; i < s.size(); ++i)
        mix.data()[i] = alpha * a.data()[i] + beta * b.data()[i];
    const auto ma = forward_project(a, code), mb = forward_project(b, code), mm = forward_project(mix, code);
    for (std::size_t i = 0; i < mm.data.size(); ++i) {
        const double expect = alpha * ma.data[i] + beta * mb.data[i];
        CHECK(std::abs(mm.data[i] - expect) <= 1e-6 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("adjoint of the all-ones code broadcasts")
{
    BasicMeasurementSet<double> m(1, 3, 2, 1);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = 0.1 * double(i + 1);
    const auto back = adjoint_project(m, ApertureCode::ones(7, 7), 7, 7);
    for (std::size_t u = 0; u < 7; ++u)
        for (std::size_t v = 0; v < 7; ++v)
            for (std::size_t x = 0; x < 3; ++x)
                for (std::size_t y = 0; y < 2; ++y)
                    CHECK(back.at(u, v, x, y) == m.at(0, x, y));
}

TEST_CASE("adjoint of zero is zero")
{
    const BasicMeasurementSet<double> m(4, 3, 3, 1);
    const auto back = adjoint_project(m, ApertureCode::random(4, 4, 1), 5, 5);
    for (double v : back.data())
        CHECK(v == 0.0);
}

TEST_CASE("dot-product adjoint identity")
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> dim(1, 7), sp(1, 6);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t C = trial % 3 == 0 ? 3 : 1;
        const LfShape s{dim(rng), dim(rng), sp(rng), sp(rng), C};
        std::uniform_int_distribution<std::size_t> ku(1, s.M), kv(1, s.N);
        const ApertureCode code = ApertureCode::random(ku(rng), kv(rng), 100 + trial,
                                                       C == 3 && trial % 2 == 0, C);
        const auto x = oracle::random_lf(s, rng, -1.0, 1.0);
        const auto Ax = forward_project(x, code);
        BasicMeasurementSet<double> y(Ax.k, s.H, s.W, C);
        y.data = oracle::random_vector(y.data.size(), rng);
        const auto Aty = adjoint_project(y, code, s.M, s.N);
        const double lhs = dot(Ax.data, y.data), rhs = dot(x.data(), Aty.data());
        CHECK(std::abs(lhs - rhs) / (norm(Ax.data) * norm(y.data)) < 1e-6);
    }
}

TEST_CASE("adjoint matches the transposed dense matrix")
{
    const ApertureCode code = ApertureCode::random(2, 3, 7);
    const auto A = oracle::sensing_matrix(code, 4, 4);
    BasicMeasurementSet<double> y(static_cast<std::size_t>(A.rows()), 1, 1, 1);
    for (std::size_t i = 0; i < y.data.size(); ++i)
        y.data[i] = double(i) - 1.5;
    const auto back = adjoint_project(y, code, 4, 4);
    const Eigen::VectorXd ref = A.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data.data(), A.rows());
    for (std::size_t i = 0; i < back.size(); ++i)
        CHECK(back.data()[i] == doctest::Approx(ref(static_cast<Eigen::Index>(i))).epsilon(1e-12));
}

TEST_CASE("geometry errors")
{
    const LightField lf = LightField::constant({5, 5, 4, 4, 1}, 0.5f);
    CHECK_THROWS_AS(forward_project(lf, ApertureCode::random(6, 6, 1)), ValidationError);
    const BasicMeasurementSet<double> m(3, 2, 2, 1);
    CHECK_THROWS_AS(adjoint_project(m, ApertureCode::random(4, 4, 1), 5, 5), ValidationError);
}

TEST_CASE("measurement file round trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "lfcap_test_meas";
    std::filesystem::create_directories(dir);
    const LightField lf = LightField::constant({5, 5, 4, 3, 3}, 0.25f);
    MeasurementSet m = forward_project(lf, ApertureCode::random(4, 5, 2));
    m.noise_sigma = 30.0;
    write_measurements(m, dir / "m.lfms");
    const MeasurementSet back = read_measurements(dir / "m.lfms");
    CHECK(back.k == m.k);
    CHECK(back.H == 4);
    CHECK(back.W == 3);
    CHECK(back.C == 3);
    CHECK(back.data == m.data);
    REQUIRE(back.noise_sigma);
    CHECK(*back.noise_sigma == 30.0);
    CHECK_THROWS_AS(read_measurements(dir / "none.lfms"), IoError);
}
