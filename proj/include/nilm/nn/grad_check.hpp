#pragma once

#include <functional>

#include "nilm/nn/graph.hpp"

namespace nilm::nn {

// Builds a scalar loss from parameters looked up in `params` via g.parameter().
using LossBuilder = std::function<Var(Graph& g, const ParamStore& params)>;

ParamStore analytic_gradient(const LossBuilder& fn, const ParamStore& params);
// Central differences, one element at a time.
ParamStore numeric_gradient(const LossBuilder& fn, const ParamStore& params, double epsilon);

// max over elements of |a - n| / max(|a|, |n|, 1e-8)
double max_relative_error(const ParamStore& analytic, const ParamStore& numeric);

// Compares analytic and central-difference gradients of `fn` over every entry
// of `params`. epsilon must lie in (0, 1e-2]. Throws on a non-finite loss.
double grad_check(const LossBuilder& fn, const ParamStore& params, double epsilon = 1e-5);

}  // namespace nilm::nn
