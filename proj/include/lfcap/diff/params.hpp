#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfcap/diff/graph.hpp"

namespace lfcap::diff {

/// Named trainable tensors with their accumulated gradients, in insertion order.
template <typename T>
class ParamStore {
public:
    Tensor<T>& add(const std::string& name, Tensor<T> value);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Tensor<T>& value(const std::string& name) { return entries_[lookup(name)].value; }
    const Tensor<T>& value(const std::string& name) const { return entries_[lookup(name)].value; }
    Tensor<T>& grad(const std::string& name) { return entries_[lookup(name)].grad; }
    const Tensor<T>& grad(const std::string& name) const { return entries_[lookup(name)].grad; }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    /// Total number of scalar parameters.
    std::size_t parameter_count() const;
    void zero_grad();

private:
    struct Entry {
        Tensor<T> value;
        Tensor<T> grad;
    };

    std::size_t lookup(const std::string& name) const;

    std::vector<std::string> names_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Graph leaves mirroring a ParamStore for one forward/backward pass.
template <typename T>
class Binding {
public:
    Binding(Graph<T>& graph, const ParamStore<T>& params);

    Var<T> operator[](const std::string& name) const;
    /// Adds the graph gradients of every bound parameter into the store.
    void accumulate_grads(ParamStore<T>& params) const;

private:
    Graph<T>* graph_;
    std::unordered_map<std::string, Var<T>> vars_;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::unordered_map<std::string, Tensor<T>> first_moment;
    std::unordered_map<std::string, Tensor<T>> second_moment;
};

/// One bias-corrected Adam update of every parameter from its stored gradient.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state);

/// Learning rate that drops once from `initial` to `reduced` after `patience`
/// consecutive evaluations without improving on the best loss seen so far.
class PlateauSchedule {
public:
    PlateauSchedule(double initial = 1e-4, double reduced = 1e-5, std::size_t patience = 10);

    /// Records an evaluation and returns the learning rate to use next.
    double observe(double loss);

    double lr() const { return dropped_ ? reduced_ : initial_; }
    double best() const { return best_; }
    std::size_t since_best() const { return since_best_; }
    bool dropped() const { return dropped_; }

    /// Restores a saved position.
    void restore(double best, std::size_t since_best, bool dropped);

private:
    double initial_;
    double reduced_;
    std::size_t patience_;
    double best_;
    std::size_t since_best_ = 0;
    bool dropped_ = false;
};

/// Contents of an "LFCK" checkpoint: free-form JSON metadata, named float32
/// tensors and an optional optimizer state.
template <typename T>
struct Checkpoint {
    std::string meta;
    ParamStore<T> params;
    std::optional<AdamState<T>> adam;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& params,
                     const AdamState<T>* adam, const std::string& meta);
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

} // namespace lfcap::diff
