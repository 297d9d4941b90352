#pragma once

#include <vector>

#include "sgrl/constraints.hpp"

namespace sgrl {

struct ALParams {
  double penalty_init = 100.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e8;
  double tol_feas = 1e-4;
  double tol_step = 1e-6;
  int max_outer = 30;
  int max_inner = 100;

  void validate() const;
};

struct NLPResult {
  VecX z;
  bool feasible = false;
  double violation = 0.0;
  int n_evals = 0;
  double cost = 0.0;  // |s* - s_bar|^2
  /// max_violation after each outer iteration.
  std::vector<double> outer_violation;
};

/// Warm start: s = s_bar clamped to the box, each point of attack on the
/// support witness point, forces sharing the object weight along -n.
VecX initial_decision(const ConstraintSpec& cs, const Vec6& s_bar);

/// min 1/2 |s - s_bar|^2  s.t.  g(z) <= 0, h(z) = 0 over the full decision
/// vector. Never throws on infeasibility; geometry errors propagate.
NLPResult solve_proximal(const ConstraintSpec& cs, const Vec6& s_bar,
                         const ALParams& params = {});

}  // namespace sgrl
