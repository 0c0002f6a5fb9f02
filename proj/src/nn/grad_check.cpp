#include "nilm/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace nilm::nn {

namespace {

double evaluate(const LossBuilder& fn, const ParamStore& params) {
    Graph g;
    const Var loss = fn(g, params);
    if (loss.value().size() != 1) throw ShapeError("grad_check: loss must be scalar", loss.shape(), Shape{1});
    const double v = loss.value()[0];
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: loss is not finite");
    return v;
}

}  // namespace

ParamStore analytic_gradient(const LossBuilder& fn, const ParamStore& params) {
    Graph g;
    const Var loss = fn(g, params);
    g.backward(loss);
    ParamStore out = params.zeros_like();
    g.accumulate_gradients(out);
    return out;
}

ParamStore numeric_gradient(const LossBuilder& fn, const ParamStore& params, double epsilon) {
    ParamStore work = params;
    ParamStore out = params.zeros_like();
    for (auto& [name, t] : work) {
        Tensor& dst = out.at(name);
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double orig = t[k];
            t[k] = orig + epsilon;
            const double up = evaluate(fn, work);
            t[k] = orig - epsilon;
            const double down = evaluate(fn, work);
            t[k] = orig;
            dst[k] = (up - down) / (2.0 * epsilon);
        }
    }
    return out;
}

double max_relative_error(const ParamStore& analytic, const ParamStore& numeric) {
    double worst = 0.0;
    for (const auto& [name, a] : analytic) {
        const Tensor& n = numeric.at(name);
        if (n.shape() != a.shape()) throw ShapeError("max_relative_error: '" + name + "'", a.shape(), n.shape());
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double denom = std::max({std::abs(a[k]), std::abs(n[k]), 1e-8});
            worst = std::max(worst, std::abs(a[k] - n[k]) / denom);
        }
    }
    return worst;
}

double grad_check(const LossBuilder& fn, const ParamStore& params, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw std::invalid_argument("grad_check: epsilon must lie in (0, 1e-2]");
    evaluate(fn, params);
    return max_relative_error(analytic_gradient(fn, params), numeric_gradient(fn, params, epsilon));
}

}  // namespace nilm::nn
