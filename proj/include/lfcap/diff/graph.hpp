#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "lfcap/error.hpp"

namespace lfcap::diff {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0))
        : shape(std::move(s)), data(numel(shape), fill)
    { }
    Tensor(Shape s, std::vector<T> values)
        : shape(std::move(s)), data(std::move(values))
    {
        if (data.size() != numel(shape))
            throw ValidationError("tensor data size " + std::to_string(data.size()) +
                                  " does not match shape " + shape_string(shape));
    }

    static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

    std::size_t size() const { return data.size(); }
    T item() const
    {
        if (data.size() != 1)
            throw ValidationError("item() on tensor of shape " + shape_string(shape));
        return data[0];
    }
};

template <typename T>
class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
public:
    Var() = default;

    Graph<T>& graph() const { return *graph_; }
    std::size_t id() const { return id_; }
    const Tensor<T>& value() const { return graph_->value(*this); }
    const Shape& shape() const { return value().shape; }
    bool valid() const { return graph_ != nullptr; }

private:
    friend class Graph<T>;
    Var(Graph<T>* g, std::size_t id) : graph_(g), id_(id) { }

    Graph<T>* graph_ = nullptr;
    std::size_t id_ = 0;
};

/// Tape of differentiable operations. Nodes are appended in creation order, so the
/// tape order is a topological order and backward() walks it in reverse, visiting
/// each node once. Single-threaded; independent graphs may run concurrently.
template <typename T>
class Graph {
public:
    /// Reads grad(self) and accumulates into the parents' gradient buffers.
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var<T> constant(Tensor<T> value);
    Var<T> variable(Tensor<T> value);
    Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn backward);

    const Tensor<T>& value(const Var<T>& v) const { return node(v).value; }
    bool requires_grad(const Var<T>& v) const { return node(v).requires_grad; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

    /// Value and gradient buffer by node id, for use inside backward functions.
    const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor<T>& grad(std::size_t id) const { return nodes_[id].grad; }
    /// Zero-initialized on first use.
    Tensor<T>& grad_buffer(std::size_t id);

    /// Gradient of the last backward() loss with respect to v; zeros if v was not reached.
    Tensor<T> grad(const Var<T>& v) const;

    /// Throws ValidationError unless loss holds exactly one element.
    void backward(const Var<T>& loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        bool requires_grad = false;
        bool has_grad = false;
    };

    const Node& node(const Var<T>& v) const;

    std::deque<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

} // namespace lfcap::diff
