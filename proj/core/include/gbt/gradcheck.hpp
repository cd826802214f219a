#pragma once

#include <utility>
#include <vector>

#include "gbt/graph.hpp"
#include "gbt/rng.hpp"

namespace gbt {

// Runs `build` (a generic callable taking GraphT<S>& and returning the loss
// Var) on a fresh double graph, backpropagates, and leaves gradients in the
// store. Returns the loss value.
template <class Builder>
double compute_gradients(ParamStore& ps, Builder&& build) {
  ps.zero_grads();
  Graph g(&ps);
  Var loss = build(g);
  double value = g.scalar(loss);
  g.backward(loss);
  return value;
}

struct FdProbe {
  std::string tensor;
  int index = 0;  // flat index within the tensor
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct FdReport {
  double max_rel_err = 0.0;
  FdProbe worst;
  std::vector<FdProbe> probes;
};

// Central-difference audit of the analytic gradients at `n_probes` randomly
// chosen scalar parameters (uniform over tensors, then over coordinates).
// The two loss evaluations per probe run in compensated double-double
// arithmetic: with the step size pinned at h = 1e-6, plain double rounding
// noise (~1e-9 absolute on the difference quotient) would swamp any gradient
// smaller than ~1e-4, while in dd the quotient is truncation-limited and the
// comparison against the double-precision analytic value is meaningful.
// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
template <class Builder>
FdReport finite_diff_check(ParamStore& ps, Builder&& build, int n_probes, double h, Rng rng) {
  if (n_probes <= 0 || !(h > 0.0)) throw BadArgument("finite_diff_check needs n_probes > 0 and h > 0");
  compute_gradients(ps, build);

  BasicParamStore<dd> wide = widen(ps);
  const auto& tensors = ps.tensors();
  if (tensors.empty()) throw BadArgument("parameter store is empty");

  auto eval = [&]() {
    GraphT<dd> g(&wide);
    Var loss = build(g);
    const auto& m = g.value(loss);
    if (m.rows != 1 || m.cols != 1) throw NonScalarLoss("loss is " + m.shape());
    return m.a[0];
  };

  FdReport report;
  report.probes.reserve(static_cast<size_t>(n_probes));
  const dd two_h = dd(2.0) * dd(h);
  for (int p = 0; p < n_probes; ++p) {
    size_t ti = static_cast<size_t>(rng.below(tensors.size()));
    const auto& t = *tensors[ti];
    int ci = static_cast<int>(rng.below(t.value.size()));

    dd& slot = wide.get(t.name).value.a[static_cast<size_t>(ci)];
    const dd orig = slot;
    slot = orig + dd(h);
    dd fp = eval();
    slot = orig - dd(h);
    dd fm = eval();
    slot = orig;

    FdProbe probe;
    probe.tensor = t.name;
    probe.index = ci;
    probe.analytic = t.grad.a[static_cast<size_t>(ci)];
    probe.numeric = to_double((fp - fm) / two_h);
    double denom = std::max({std::fabs(probe.analytic), std::fabs(probe.numeric), 1e-8});
    probe.rel_err = std::fabs(probe.analytic - probe.numeric) / denom;
    if (probe.rel_err >= report.max_rel_err) {
      report.max_rel_err = probe.rel_err;
      report.worst = probe;
    }
    report.probes.push_back(std::move(probe));
  }
  return report;
}

}  // namespace gbt
