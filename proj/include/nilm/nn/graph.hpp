#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "nilm/nn/param_store.hpp"
#include "nilm/nn/tensor.hpp"

namespace nilm::nn {

class Graph;

// Handle to a recorded value on a Graph. Cheap to copy; valid while the graph lives.
class Var {
public:
    Var() = default;
    Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

    Graph& graph() const { return *graph_; }
    std::size_t id() const { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool valid() const { return graph_ != nullptr; }

private:
    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse sweep
// visits every node after all of its consumers.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    // Leaf that receives a gradient but is not tied to a ParamStore.
    Var variable(Tensor value);
    // Leaf bound to `store[name]`. Repeated requests return the same node. The
    // node refers to the stored tensor, so the store must outlive the graph and
    // stay unmodified while it is in use.
    Var parameter(const ParamStore& store, const std::string& name);

    // Records a derived node. `parents` are node ids; requires_grad propagates.
    Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

    void backward(const Var& loss);

    const Tensor& value(std::size_t id) const { return nodes_[id].get(); }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    // Gradient buffer of a node, allocated as zeros on first access.
    Tensor& grad_buffer(std::size_t id);
    // Gradient of a node after backward(); zeros if nothing reached it.
    Tensor grad(const Var& v) const;

    // Gradients of every bound parameter, keyed by parameter name.
    ParamStore parameter_gradients() const;
    // Adds this graph's parameter gradients into `acc`, creating zero entries as needed.
    void accumulate_gradients(ParamStore& acc, double scale = 1.0) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        const Tensor* external = nullptr;  // parameter leaves alias the store
        const Tensor& get() const { return external ? *external : value; }
        bool requires_grad = false;
        std::vector<std::size_t> parents;
        BackwardFn backward;
    };
    std::deque<Node> nodes_;  // stable addresses: values stay valid while the tape grows
    std::unordered_map<std::string, std::size_t> param_ids_;
    std::vector<std::pair<std::string, std::size_t>> param_order_;
};

inline const Tensor& Var::value() const { return graph_->value(id_); }

}  // namespace nilm::nn
