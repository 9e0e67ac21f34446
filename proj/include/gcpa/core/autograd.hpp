#ifndef GCPA_CORE_AUTOGRAD_HPP
#define GCPA_CORE_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gcpa/core/tensor.hpp"

namespace gcpa {

// Reverse-mode tape. Every op produces a Node holding the forward value plus
// a closure that scatters the node's accumulated gradient into its parents.
// backward() walks the graph once in reverse topological order.

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on demand, same shape as value
    bool requires_grad = false;
    std::string name;  // non-empty for named leaves (parameters, buffers)
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;

    void ensure_grad() {
        if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
    }
    void zero_grad() {
        if (grad.numel()) grad.fill(T(0));
    }
};

inline bool& grad_mode_slot() {
    thread_local bool enabled = true;
    return enabled;
}

inline bool grad_enabled() { return grad_mode_slot(); }

// Disables graph construction in scope; ops run value-only.
class NoGradGuard {
public:
    NoGradGuard() : prev_(grad_mode_slot()) { grad_mode_slot() = false; }
    ~NoGradGuard() { grad_mode_slot() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}
    explicit Var(Tensor<T> value, bool requires_grad = false) : n_(std::make_shared<Node<T>>()) {
        n_->value = std::move(value);
        n_->requires_grad = requires_grad && grad_enabled();
    }

    static Var leaf(Tensor<T> value, bool requires_grad, std::string name = {}) {
        Var v;
        v.n_ = std::make_shared<Node<T>>();
        v.n_->value = std::move(value);
        v.n_->requires_grad = requires_grad;
        v.n_->name = std::move(name);
        return v;
    }

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor<T>& value() const { return n_->value; }
    Tensor<T>& value() { return n_->value; }
    Tensor<T>& grad() {
        n_->ensure_grad();
        return n_->grad;
    }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    const std::string& name() const { return n_->name; }
    const std::shared_ptr<Node<T>>& node() const { return n_; }
    const std::vector<long>& shape() const { return n_->value.shape(); }

private:
    std::shared_ptr<Node<T>> n_;
};

// Builds an op node: value plus a backward closure. make_backward receives the
// finished node (self) so the closure can read self->grad; it is only invoked
// when grad mode is on and some input carries requires_grad.
template <typename T, typename MakeBackward>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, MakeBackward&& make_backward) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    bool needs = false;
    if (grad_enabled())
        for (const auto& in : inputs)
            if (in.defined() && in.requires_grad()) needs = true;
    if (needs) {
        node->requires_grad = true;
        for (const auto& in : inputs)
            if (in.defined()) node->parents.push_back(in.node());
        node->backward_fn = make_backward(node.get());
    }
    return Var<T>(node);
}

// Reverse topological order over the subgraph reachable from root.
template <typename T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    // iterative post-order DFS
    std::vector<std::pair<Node<T>*, size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;  // parents before children; iterate reversed to backprop
}

// Seeds root's gradient with ones and propagates to every reachable leaf.
template <typename T>
void backward(const Var<T>& root) {
    Node<T>* r = root.node().get();
    if (!r->requires_grad)
        throw std::runtime_error("backward() on a node that does not require grad");
    auto order = topo_order(r);
    for (Node<T>* n : order) n->ensure_grad();
    r->grad.fill(T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

}  // namespace gcpa

#endif
