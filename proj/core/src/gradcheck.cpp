#include "xaikit/gradcheck.hpp"

#include <cmath>

namespace xaikit {

namespace {

double evaluate(const DiffFn& f, const Tensor& x) {
  Graph g;
  Var out = f(g, g.leaf(x, "x"));
  const Tensor& v = g.value(out);
  if (v.numel() != 1) throw ContractError("grad_check requires a scalar-valued function");
  return v[0];
}

}  // namespace

double grad_check(const DiffFn& f, const Tensor& x, double eps) {
  Tensor analytic;
  {
    Graph g;
    Var leaf = g.leaf(x, "x");
    Var out = f(g, leaf);
    if (g.value(out).numel() != 1) throw ContractError("grad_check requires a scalar-valued function");
    if (!std::isfinite(g.value(out)[0])) throw Error("grad_check: f(x) is not finite");
    g.backward(out);
    analytic = g.grad(leaf);
  }

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = evaluate(f, probe);
    probe[i] = saved - eps;
    const double down = evaluate(f, probe);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double rel = std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace xaikit
