#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sgrl/common.hpp"
#include "sgrl/random.hpp"

namespace sgrl {

struct CmaOptions {
  double sigma0 = 0.1;
  long budget = 20000;
  /// Population size; 0 selects 4 + floor(3 ln d).
  int lambda = 0;
  /// Stop as soon as the best-ever value reaches this.
  double f_target = -std::numeric_limits<double>::infinity();
  /// Range of recent generation-best values below which the run stops.
  double tol_fun = 1e-12;
  /// Stop when sigma * sqrt(max diag C) drops below this.
  double tol_x = 1e-12;
  /// Stop when the best-ever value improved by less than stall_tol (relative)
  /// over this many generations; 0 disables.
  int stall_generations = 0;
  double stall_tol = 1e-3;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Mean, covariance, step size and evolution paths of a running search.
struct CmaState {
  VecX mean;
  MatX cov;
  double sigma = 0.0;
  VecX path_sigma;
  VecX path_c;
  int lambda = 0;
  int generation = 0;
};

struct CmaResult {
  VecX x_best;
  double f_best = std::numeric_limits<double>::infinity();
  long n_evals = 0;
  int generations = 0;
  /// Best-ever value after each generation.
  std::vector<double> best_history;
  /// Smallest covariance eigenvalue seen after any update.
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  /// Candidates whose objective was not finite.
  long rejected = 0;
  std::string stop_reason;
  CmaState final_state;
};

using Objective = std::function<double(const VecX&)>;

inline int default_population(int dim) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim))));
}

/// (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu covariance updates and
/// cumulative step-size adaptation. Returns the best-ever candidate.
/// Candidates within a generation are evaluated on up to `workers` threads.
CmaResult cma_minimize(const Objective& f, const VecX& x0, const CmaOptions& options);

}  // namespace sgrl
