#pragma once

// Minimal reverse-mode autodiff over dense row-major tensors.
//
// A Tensor is a shared handle to a graph node. Ops build new nodes holding a
// backward closure; Tensor::backward() walks the graph in reverse topological
// order. Gradients accumulate, so a tensor used twice (skip connections)
// receives the sum of both contributions.

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "dualsr/error.hpp"

namespace dualsr::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s)
{
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s)
{
    std::string out = "[";
    for (std::size_t k = 0; k < s.size(); ++k) out += (k ? "," : "") + std::to_string(s[k]);
    return out + "]";
}

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad; // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::vector<T>& grad_buffer()
    {
        if (grad.empty()) grad.assign(value.size(), T(0));
        return grad;
    }
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false) : node_(std::make_shared<Node<T>>())
    {
        require(ad::numel(shape) == values.size(),
                "tensor: " + std::to_string(values.size()) + " values do not fill shape " + shape_string(shape));
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false)
    {
        const auto n = ad::numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }

    static Tensor scalar(T v, bool requires_grad = false) { return Tensor({1}, {v}, requires_grad); }

    /// Result node of an op; requires grad if any parent does.
    static Tensor from_op(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                          std::function<void(Node<T>&)> backward)
    {
        Tensor out(std::move(shape), std::move(values));
        bool any = false;
        for (auto& p : parents) any = any || p.requires_grad();
        if (any) {
            out.node_->requires_grad = true;
            for (auto& p : parents) out.node_->parents.push_back(p.node_);
            out.node_->backward = std::move(backward);
        }
        return out;
    }

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t k) const { return node_->shape.at(k); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    std::vector<T>& values() { return node_->value; }
    const std::vector<T>& values() const { return node_->value; }

    /// Accumulated gradient; zeros if nothing has flowed in yet.
    std::vector<T> grad() const
    {
        if (node_->grad.empty()) return std::vector<T>(node_->value.size(), T(0));
        return node_->grad;
    }
    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<T>& grad_buffer() { return node_->grad_buffer(); }

    void zero_grad() { node_->grad.clear(); }

    /// Value-only copy cut off from the graph.
    Tensor detach() const { return Tensor(node_->shape, node_->value, false); }

    Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

    /// Seeds this tensor's gradient with ones and back-propagates.
    void backward()
    {
        require(defined(), "backward: undefined tensor");
        if (!node_->requires_grad) return;

        std::vector<Node<T>*> order;
        std::unordered_set<Node<T>*> seen;
        // iterative post-order DFS
        std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->parents.size()) {
                Node<T>* p = n->parents[next++].get();
                if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }

        auto& g = node_->grad_buffer();
        for (auto& v : g) v += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<T>* n = *it;
            if (n->backward && !n->grad.empty()) n->backward(*n);
        }
    }

private:
    std::shared_ptr<Node<T>> node_;
};

} // namespace dualsr::ad
