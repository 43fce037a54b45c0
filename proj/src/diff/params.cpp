#include "lfcap/diff/params.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "lfcap/binary.hpp"

namespace lfcap::diff {

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> value)
{
    if (contains(name))
        throw ValidationError("duplicate parameter " + name);
    index_.emplace(name, entries_.size());
    names_.push_back(name);
    Tensor<T> grad(value.shape);
    entries_.push_back({std::move(value), std::move(grad)});
    return entries_.back().value;
}

template <typename T>
std::size_t ParamStore<T>::lookup(const std::string& name) const
{
    const auto it = index_.find(name);
    if (it == index_.end())
        throw ValidationError("unknown parameter " + name);
    return it->second;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& e : entries_)
        n += e.value.size();
    return n;
}

template <typename T>
void ParamStore<T>::zero_grad()
{
    for (auto& e : entries_)
        std::fill(e.grad.data.begin(), e.grad.data.end(), T(0));
}

template <typename T>
Binding<T>::Binding(Graph<T>& graph, const ParamStore<T>& params)
    : graph_(&graph)
{
    for (const auto& name : params.names())
        vars_.emplace(name, graph.variable(params.value(name)));
}

template <typename T>
Var<T> Binding<T>::operator[](const std::string& name) const
{
    const auto it = vars_.find(name);
    if (it == vars_.end())
        throw ValidationError("parameter " + name + " is not bound");
    return it->second;
}

template <typename T>
void Binding<T>::accumulate_grads(ParamStore<T>& params) const
{
    for (const auto& [name, var] : vars_) {
        const Tensor<T> g = graph_->grad(var);
        auto& dst = params.grad(name).data;
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] += g.data[i];
    }
}

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state)
{
    const auto& cfg = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (const auto& name : params.names()) {
        auto& p = params.value(name).data;
        const auto& g = params.grad(name).data;
        if (g.size() != p.size())
            throw ValidationError("gradient shape mismatch for " + name);
        auto& m = state.first_moment.try_emplace(name, params.value(name).shape).first->second.data;
        auto& v = state.second_moment.try_emplace(name, params.value(name).shape).first->second.data;
        if (m.size() != p.size() || v.size() != p.size())
            throw ValidationError("optimizer state shape mismatch for " + name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = static_cast<T>(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i]);
            v[i] = static_cast<T>(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i]);
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] = static_cast<T>(p[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

PlateauSchedule::PlateauSchedule(double initial, double reduced, std::size_t patience)
    : initial_(initial)
    , reduced_(reduced)
    , patience_(patience)
    , best_(std::numeric_limits<double>::infinity())
{ }

double PlateauSchedule::observe(double loss)
{
    if (loss < best_) {
        best_ = loss;
        since_best_ = 0;
    } else if (++since_best_ >= patience_) {
        dropped_ = true;
    }
    return lr();
}

void PlateauSchedule::restore(double best, std::size_t since_best, bool dropped)
{
    best_ = best;
    since_best_ = since_best;
    dropped_ = dropped;
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_tensor_data(std::ostream& out, const Tensor<T>& t)
{
    if constexpr (std::is_same_v<T, float>) {
        binary::write_f32s(out, t.data);
    } else {
        for (T v : t.data)
            binary::write_f32(out, static_cast<float>(v));
    }
}

template <typename T>
void read_tensor_data(std::istream& in, Tensor<T>& t)
{
    std::vector<float> buf(t.size());
    binary::read_f32s(in, buf, "checkpoint tensor");
    for (std::size_t i = 0; i < buf.size(); ++i)
        t.data[i] = static_cast<T>(buf[i]);
}

} // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& params,
                     const AdamState<T>* adam, const std::string& meta)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write("LFCK", 4);
    binary::write_u32(out, kCheckpointVersion);
    binary::write_string(out, meta);
    binary::write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& name : params.names()) {
        const auto& t = params.value(name);
        binary::write_string(out, name);
        binary::write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t d : t.shape)
            binary::write_u32(out, static_cast<std::uint32_t>(d));
        write_tensor_data(out, t);
    }
    binary::write_u32(out, adam ? 1u : 0u);
    if (adam) {
        binary::write_u32(out, static_cast<std::uint32_t>(adam->step & 0xffffffffu));
        binary::write_u32(out, static_cast<std::uint32_t>(adam->step >> 32));
        // hyper-parameters as raw float64 bits, low word first
        for (double h : {adam->config.lr, adam->config.beta1, adam->config.beta2, adam->config.eps}) {
            const auto bits = std::bit_cast<std::uint64_t>(h);
            binary::write_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffu));
            binary::write_u32(out, static_cast<std::uint32_t>(bits >> 32));
        }
        for (const auto& name : params.names()) {
            const Tensor<T> zeros(params.value(name).shape);
            const auto m = adam->first_moment.find(name);
            const auto v = adam->second_moment.find(name);
            write_tensor_data(out, m != adam->first_moment.end() ? m->second : zeros);
            write_tensor_data(out, v != adam->second_moment.end() ? v->second : zeros);
        }
    }
    if (!out)
        throw IoError("write failed for " + path.string());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint " + path.string());
    binary::expect_magic(in, "LFCK");
    if (const auto version = binary::read_u32(in, "version"); version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint<T> ck;
    ck.meta = binary::read_string(in);
    const std::uint32_t count = binary::read_u32(in, "parameter count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = binary::read_string(in, 4096);
        const std::uint32_t rank = binary::read_u32(in, "rank");
        if (rank > 8)
            throw IoError("implausible tensor rank in checkpoint");
        Shape shape(rank);
        for (auto& d : shape)
            d = binary::read_u32(in, "dim");
        if (numel(shape) > (std::size_t{1} << 31))
            throw IoError("implausible tensor size in checkpoint");
        Tensor<T> t(shape);
        read_tensor_data(in, t);
        ck.params.add(name, std::move(t));
    }
    if (binary::read_u32(in, "optimizer flag") != 0) {
        AdamState<T> st;
        const std::uint64_t lo = binary::read_u32(in, "step");
        const std::uint64_t hi = binary::read_u32(in, "step");
        st.step = lo | (hi << 32);
        double h[4];
        for (double& x : h) {
            const std::uint64_t lo = binary::read_u32(in, "hyper-parameter");
            const std::uint64_t hi = binary::read_u32(in, "hyper-parameter");
            x = std::bit_cast<double>(lo | (hi << 32));
        }
        st.config = {h[0], h[1], h[2], h[3]};
        for (const auto& name : ck.params.names()) {
            Tensor<T> m(ck.params.value(name).shape), v(ck.params.value(name).shape);
            read_tensor_data(in, m);
            read_tensor_data(in, v);
            st.first_moment.emplace(name, std::move(m));
            st.second_moment.emplace(name, std::move(v));
        }
        ck.adam = std::move(st);
    }
    return ck;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Binding<float>;
template class Binding<double>;
template void adam_step<float>(ParamStore<float>&, AdamState<float>&);
template void adam_step<double>(ParamStore<double>&, AdamState<double>&);
template void save_checkpoint<float>(const std::filesystem::path&, const ParamStore<float>&,
                                     const AdamState<float>*, const std::string&);
template void save_checkpoint<double>(const std::filesystem::path&, const ParamStore<double>&,
                                      const AdamState<double>*, const std::string&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

} // namespace lfcap::diff
