#include "lfcap/hqs.hpp"

#include <cmath>
#include <random>

namespace lfcap {

void HqsConfig::validate() const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ValidationError("lambda must be finite and >= 0");
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw ValidationError("eta must be finite and > 0");
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw ValidationError("delta must be finite and > 0");
    if (max_iterations == 0)
        throw ValidationError("max_iterations must be positive");
}

template <typename T>
Prox<T> identity_prox()
{
    return [](const LfTensor<T>& x) { return x; };
}

template <typename T>
Prox<T> tikhonov_prox(double eta, double lambda)
{
    if (!(eta > 0.0) || !(lambda >= 0.0))
        throw ValidationError("tikhonov prox needs eta > 0 and lambda >= 0");
    const T alpha = static_cast<T>(2.0 * eta / (2.0 * eta + lambda));
    return [alpha](const LfTensor<T>& x) {
        LfTensor<T> v = x;
        for (T& e : v.data())
            e *= alpha;
        return v;
    };
}

namespace {

template <typename T>
double norm(std::span<const T> a)
{
    double s = 0.0;
    for (T v : a)
        s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
}

} // namespace

template <typename T>
HqsResult<T> hqs_classical(const BasicMeasurementSet<T>& l, const ApertureCode& code,
                           std::size_t M, std::size_t N, const Prox<T>& prox, const HqsConfig& cfg,
                           const LfTensor<T>* initial)
{
    cfg.validate();
    const AngularGeometry g = code.geometry(M, N);
    if (l.k != g.count())
        throw ValidationError("measurement count " + std::to_string(l.k) + " does not match code (" +
                              std::to_string(g.count()) + ")");
    if (code.per_channel() && code.mask_count() != l.C)
        throw ValidationError("per-channel code does not match the channel count");
    const LfShape shape{M, N, l.H, l.W, l.C};
    if (initial && !(initial->shape() == shape))
        throw ValidationError("initial estimate has shape " + to_string(initial->shape()));

    const std::size_t pixels = l.H * l.W, K = code.mask_count();
    const std::vector<T> kernel(code.weights().begin(), code.weights().end());
    const std::vector<T> meas = kernels::to_planar<T>(l.data, l.k, pixels, l.C);

    HqsResult<T> result;
    result.x = initial ? *initial : LfTensor<T>(shape);
    std::vector<T> x = kernels::to_planar<T>(result.x.data(), g.views(), pixels, l.C);
    std::vector<T> v = kernels::to_planar<T>(prox(result.x).data(), g.views(), pixels, l.C);
    std::vector<T> residual(meas.size()), back(x.size());
    const T eta = static_cast<T>(cfg.eta), delta = static_cast<T>(cfg.delta);

    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        kernels::project<T>(x, kernel, g, l.C, K, pixels, residual);
        for (std::size_t i = 0; i < residual.size(); ++i)
            residual[i] = residual[i] - meas[i];
        result.residual_norms.push_back(norm<T>(residual));
        kernels::backproject<T>(residual, kernel, g, l.C, K, pixels, back);

        double step_sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const T step = (back[i] + (x[i] - v[i]) * eta) * delta;
            const T next = x[i] - step;
            const double d = static_cast<double>(next) - static_cast<double>(x[i]);
            step_sq += d * d;
            x[i] = next;
        }
        result.iterations = it + 1;
        const LfTensor<T> xt(shape, kernels::from_planar<T>(x, g.views(), pixels, l.C));
        v = kernels::to_planar<T>(prox(xt).data(), g.views(), pixels, l.C);

        const double xn = norm<T>(x);
        const double rel = std::sqrt(step_sq) / (xn > 0.0 ? xn : 1.0);
        if (rel < cfg.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.x = LfTensor<T>(shape, kernels::from_planar<T>(x, g.views(), pixels, l.C));
    return result;
}

double estimate_operator_norm(const ApertureCode& code, std::size_t M, std::size_t N,
                              std::size_t iterations, std::uint64_t seed)
{
    const AngularGeometry g = code.geometry(M, N);
    const std::size_t K = code.mask_count();
    const std::vector<double> kernel(code.weights().begin(), code.weights().end());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;

    double best = 0.0;
    // Masks act independently, so the norm is the largest over single-mask operators.
    for (std::size_t m = 0; m < K; ++m) {
        const std::span<const double> mask(kernel.data() + m * g.taps(), g.taps());
        std::vector<double> x(g.views()), meas(g.count()), y(g.views());
        for (double& e : x)
            e = std::abs(dist(rng)) + 0.1;
        double lambda = 0.0;
        for (std::size_t it = 0; it < iterations; ++it) {
            const double xn = norm<double>(x);
            if (xn == 0.0)
                break;
            for (double& e : x)
                e /= xn;
            kernels::project<double>(x, mask, g, 1, 1, 1, meas);
            kernels::backproject<double>(meas, mask, g, 1, 1, 1, y);
            lambda = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                lambda += x[i] * y[i];
            x = y;
        }
        best = std::max(best, std::sqrt(std::max(lambda, 0.0)));
    }
    return best;
}

template Prox<float> identity_prox<float>();
template Prox<double> identity_prox<double>();
template Prox<float> tikhonov_prox<float>(double, double);
template Prox<double> tikhonov_prox<double>(double, double);
template HqsResult<float> hqs_classical<float>(const BasicMeasurementSet<float>&,
                                               const ApertureCode&, std::size_t, std::size_t,
                                               const Prox<float>&, const HqsConfig&,
                                               const LfTensor<float>*);
template HqsResult<double> hqs_classical<double>(const BasicMeasurementSet<double>&,
                                                 const ApertureCode&, std::size_t, std::size_t,
                                                 const Prox<double>&, const HqsConfig&,
                                                 const LfTensor<double>*);

} // namespace lfcap
