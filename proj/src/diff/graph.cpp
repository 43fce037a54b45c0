#include "lfcap/diff/graph.hpp"

#include <algorithm>

namespace lfcap::diff {

std::size_t numel(const Shape& shape)
{
    std::size_t n = 1;
    for (std::size_t d : shape)
        n *= d;
    return n;
}

std::string shape_string(const Shape& shape)
{
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i)
        s += (i ? ", " : "") + std::to_string(shape[i]);
    return s + ")";
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value)
{
    nodes_.push_back(Node{std::move(value), {}, {}, {}, false, false});
    return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::variable(Tensor<T> value)
{
    nodes_.push_back(Node{std::move(value), {}, {}, {}, true, false});
    return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, std::initializer_list<Var<T>> parents,
                        BackwardFn backward)
{
    const std::size_t self = nodes_.size();
    Node n;
    n.value = std::move(value);
    for (const auto& p : parents) {
        if (p.graph_ != this)
            throw ValidationError("operand belongs to a different graph");
        // Parents always precede their consumers; anything else would be a cycle.
        if (p.id_ >= self)
            throw ValidationError("cycle in op graph at node " + std::to_string(self));
        n.parents.push_back(p.id_);
        n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
    }
    if (n.requires_grad)
        n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var<T>(this, self);
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(const Var<T>& v) const
{
    if (v.graph_ != this || v.id_ >= nodes_.size())
        throw ValidationError("variable does not belong to this graph");
    return nodes_[v.id_];
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(std::size_t id)
{
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor<T>(n.value.shape);
        n.has_grad = true;
    }
    return n.grad;
}

template <typename T>
Tensor<T> Graph<T>::grad(const Var<T>& v) const
{
    const Node& n = node(v);
    return n.has_grad ? n.grad : Tensor<T>(n.value.shape);
}

template <typename T>
void Graph<T>::backward(const Var<T>& loss)
{
    const Node& root = node(loss);
    if (root.value.size() != 1)
        throw ValidationError("backward() needs a scalar loss, got shape " +
                              shape_string(root.value.shape));
    for (auto& n : nodes_) {
        n.has_grad = false;
        n.grad = Tensor<T>();
    }
    if (!root.requires_grad)
        return;
    grad_buffer(loss.id_).data[0] = T(1);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.has_grad || !n.backward)
            continue;
        for (std::size_t p : n.parents)
            if (p >= i)
                throw ValidationError("cycle in op graph at node " + std::to_string(i));
        n.backward(*this, i);
    }
}

template class Graph<float>;
template class Graph<double>;

} // namespace lfcap::diff
