#include "nilm/nn/graph.hpp"

#include <algorithm>

namespace nilm::nn {

Var Graph::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, false, {}, {}});
    return Var(this, nodes_.size() - 1);
}

Var Graph::variable(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, true, {}, {}});
    return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(const ParamStore& store, const std::string& name) {
    if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var(this, it->second);
    nodes_.push_back(Node{Tensor(), {}, &store.at(name), true, {}, {}});
    Var v(this, nodes_.size() - 1);
    param_ids_.emplace(name, v.id());
    param_order_.emplace_back(name, v.id());
    return v;
}

Var Graph::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
    bool needs = false;
    for (auto p : parents) needs = needs || nodes_[p].requires_grad;
    Node n{std::move(value), {}, nullptr, needs, std::move(parents), needs ? std::move(backward) : BackwardFn{}};
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.get().shape(), 0.0);
    return n.grad;
}

void Graph::backward(const Var& loss) {
    if (loss.value().size() != 1)
        throw ShapeError("backward requires a scalar loss", loss.shape(), Shape{1});
    if (!loss.value().all_finite()) throw std::runtime_error("backward on a non-finite loss");
    for (auto& n : nodes_) n.grad = Tensor();
    grad_buffer(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        n.backward(*this, i);
    }
}

Tensor Graph::grad(const Var& v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.empty()) return Tensor(n.get().shape(), 0.0);
    return n.grad;
}

ParamStore Graph::parameter_gradients() const {
    ParamStore out;
    accumulate_gradients(out);
    return out;
}

void Graph::accumulate_gradients(ParamStore& acc, double scale) const {
    for (const auto& [name, id] : param_order_) {
        const Node& n = nodes_[id];
        if (!acc.contains(name)) acc.set(name, Tensor(n.get().shape(), 0.0));
        Tensor& dst = acc.at(name);
        if (dst.shape() != n.get().shape()) throw ShapeError("gradient accumulator for '" + name + "'", dst.shape(), n.get().shape());
        if (n.grad.empty()) continue;
        const double* g = n.grad.data();
        double* d = dst.data();
        for (std::size_t k = 0; k < dst.size(); ++k) d[k] += scale * g[k];
    }
}

}  // namespace nilm::nn
