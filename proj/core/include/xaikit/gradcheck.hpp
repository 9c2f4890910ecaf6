#pragma once

#include <functional>

#include "xaikit/autodiff.hpp"

namespace xaikit {

// A differentiable scalar function expressed over the tape: given a graph and
// a leaf holding x, build and return the scalar output node.
using DiffFn = std::function<Var(Graph&, Var)>;

// Compares the analytic gradient of f at x against central finite differences
// and returns the worst relative error
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// over all coordinates. Throws on a non-finite f(x).
double grad_check(const DiffFn& f, const Tensor& x, double eps);

}  // namespace xaikit
