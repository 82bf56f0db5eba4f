#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace viscogs::ode {

using State = std::vector<double>;
using Rhs = std::function<void(double t, const State& y, State& dy)>;

struct Options {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h_init = 0.0;  // 0 selects automatically
  double h_max = std::numeric_limits<double>::infinity();
  double h_min_rel = 1e-14;
  std::size_t max_steps = 2'000'000;
};

// Continuous extension of one accepted Dormand-Prince step (4th order).
struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  State r1, r2, r3, r4, r5;

  double t1() const { return t0 + h; }
  void eval(double t, State& out) const;
  double eval(double t, std::size_t component) const;
};

enum class AfterStep { proceed, modified, stop };

struct Hooks {
  // Returning false rejects the step and retries at half the step size.
  std::function<bool(const State& y)> admissible;
  // Called after every accepted step; may edit y (return modified) or end the run.
  std::function<AfterStep(const DenseSegment& seg, State& y)> on_accept;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t inadmissible = 0;
  std::size_t rhs_evals = 0;
  bool stopped_early = false;
  double t_final = 0.0;
};

// Adaptive Dormand-Prince 5(4) with PI step control. Integrates y in place.
Stats dopri5(const Rhs& f, double t0, State& y, double t_end, const Options& opts, const Hooks& hooks = {});

}  // namespace viscogs::ode
