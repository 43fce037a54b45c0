#include "lfcap/sas.hpp"

#include <cmath>

namespace lfcap::sas {

using diff::Plane;
using diff::Shape;
using diff::Tensor;
using diff::Var;

std::size_t parameter_count(const SasConfig& cfg)
{
    const std::size_t k2 = cfg.kernel * cfg.kernel;
    const std::size_t f = cfg.features;
    const std::size_t lift = k2 * f + f;
    const std::size_t block = 2 * (k2 * f * f + f);
    const std::size_t proj = k2 * f + 1;
    return lift + cfg.depth * block + proj;
}

namespace {

void check(const SasConfig& cfg)
{
    if (cfg.depth < 1 || cfg.features < 1 || cfg.kernel % 2 == 0)
        throw ValidationError("SAS network needs depth >= 1, features >= 1 and an odd kernel");
}

template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Tensor<T> t(std::move(shape));
    for (T& v : t.data)
        v = static_cast<T>(dist(rng));
    return t;
}

std::string layer_name(const std::string& prefix, std::size_t layer, const char* plane,
                       const char* what)
{
    return prefix + "." + std::to_string(layer) + "." + plane + "." + what;
}

} // namespace

template <typename T>
void init_params(diff::ParamStore<T>& params, const std::string& prefix, const SasConfig& cfg,
                 std::mt19937_64& rng)
{
    check(cfg);
    const std::size_t k = cfg.kernel, f = cfg.features;
    params.add(prefix + ".lift.weight", he_normal<T>({f, 1, k, k}, k * k, rng));
    params.add(prefix + ".lift.bias", Tensor<T>(Shape{f}));
    for (std::size_t l = 0; l < cfg.depth; ++l)
        for (const char* plane : {"spatial", "angular"}) {
            params.add(layer_name(prefix, l, plane, "weight"),
                       he_normal<T>({f, f, k, k}, f * k * k, rng));
            params.add(layer_name(prefix, l, plane, "bias"), Tensor<T>(Shape{f}));
        }
    // The output layer has no activation; unit-variance scaling keeps its range moderate.
    Tensor<T> proj = he_normal<T>({1, f, k, k}, f * k * k, rng);
    for (T& v : proj.data)
        v = static_cast<T>(v / std::sqrt(2.0));
    params.add(prefix + ".proj.weight", std::move(proj));
    params.add(prefix + ".proj.bias", Tensor<T>(Shape{1}));
}

template <typename T>
void set_identity(diff::ParamStore<T>& params, const std::string& prefix, const SasConfig& cfg)
{
    check(cfg);
    const std::size_t k = cfg.kernel, f = cfg.features, c = k / 2;
    auto delta = [&](const std::string& name, std::size_t cin) {
        auto& w = params.value(name);
        std::fill(w.data.begin(), w.data.end(), T(0));
        w.data[(0 * cin * k + c) * k + c] = T(1);
    };
    auto zero = [&](const std::string& name) {
        auto& b = params.value(name);
        std::fill(b.data.begin(), b.data.end(), T(0));
    };
    delta(prefix + ".lift.weight", 1);
    zero(prefix + ".lift.bias");
    for (std::size_t l = 0; l < cfg.depth; ++l)
        for (const char* plane : {"spatial", "angular"}) {
            delta(layer_name(prefix, l, plane, "weight"), f);
            zero(layer_name(prefix, l, plane, "bias"));
        }
    delta(prefix + ".proj.weight", f);
    zero(prefix + ".proj.bias");
}

template <typename T>
Var<T> sas_block(const Var<T>& features, const Var<T>& spatial_weight, const Var<T>& spatial_bias,
                 const Var<T>& angular_weight, const Var<T>& angular_bias)
{
    const Var<T> s = diff::conv_plane(features, spatial_weight, spatial_bias, Plane::spatial, true);
    return diff::conv_plane(s, angular_weight, angular_bias, Plane::angular, true);
}

template <typename T>
Var<T> regularize(const Var<T>& x, const diff::Binding<T>& params, const std::string& prefix,
                  const SasConfig& cfg)
{
    check(cfg);
    const Shape& s = x.shape();
    if (s.size() != 6)
        throw ValidationError("regularize: expected (B, C, M, N, H, W), got " +
                              diff::shape_string(s));
    const Var<T> flat = diff::reshape(x, Shape{s[0] * s[1], 1, s[2], s[3], s[4], s[5]});
    Var<T> h = diff::conv_plane(flat, params[prefix + ".lift.weight"],
                                params[prefix + ".lift.bias"], Plane::spatial, true);
    for (std::size_t l = 0; l < cfg.depth; ++l)
        h = sas_block(h, params[layer_name(prefix, l, "spatial", "weight")],
                      params[layer_name(prefix, l, "spatial", "bias")],
                      params[layer_name(prefix, l, "angular", "weight")],
                      params[layer_name(prefix, l, "angular", "bias")]);
    h = diff::conv_plane(h, params[prefix + ".proj.weight"], params[prefix + ".proj.bias"],
                         Plane::spatial, false);
    Var<T> v = diff::reshape(h, s);
    if (cfg.residual)
        v = diff::add(x, v);
    return v;
}

#define LFCAP_INSTANTIATE_SAS(T)                                                                 \
    template void init_params<T>(diff::ParamStore<T>&, const std::string&, const SasConfig&,     \
                                 std::mt19937_64&);                                              \
    template void set_identity<T>(diff::ParamStore<T>&, const std::string&, const SasConfig&);   \
    template Var<T> sas_block<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,     \
                                 const Var<T>&);                                                 \
    template Var<T> regularize<T>(const Var<T>&, const diff::Binding<T>&, const std::string&,    \
                                  const SasConfig&);

LFCAP_INSTANTIATE_SAS(float)
LFCAP_INSTANTIATE_SAS(double)
#undef LFCAP_INSTANTIATE_SAS

} // namespace lfcap::sas
