#include "sgrl/cma.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "sgrl/log.hpp"
#include "sgrl/parallel.hpp"

namespace sgrl {

CmaResult cma_minimize(const Objective& f, const VecX& x0, const CmaOptions& options) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw ConfigError("CMA-ES needs at least one dimension");
  if (!(options.sigma0 > 0.0)) throw ConfigError("CMA-ES sigma0 must be positive");
  const int lambda = options.lambda > 0 ? options.lambda : default_population(n);
  if (lambda < 2) throw ConfigError("CMA-ES population must be at least 2");
  if (options.budget < lambda) throw ConfigError("CMA-ES budget is smaller than one generation");

  // Strategy parameters (Hansen's defaults).
  const int mu = lambda / 2;
  VecX w(mu);
  for (int i = 0; i < mu; ++i) w(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mu_eff = 1.0 / w.squaredNorm();
  const double dn = n;
  const double c_sigma = (mu_eff + 2.0) / (dn + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (dn + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / dn) / (dn + 4.0 + 2.0 * mu_eff / dn);
  const double c_1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mu_eff);
  const double c_mu =
      std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dn + 2.0) * (dn + 2.0) + mu_eff));
  const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));
  const int history_len = 10 + static_cast<int>(std::ceil(30.0 * dn / lambda));

  CmaState st;
  st.mean = x0;
  st.cov = MatX::Identity(n, n);
  st.sigma = options.sigma0;
  st.path_sigma = VecX::Zero(n);
  st.path_c = VecX::Zero(n);
  st.lambda = lambda;

  MatX basis = MatX::Identity(n, n);  // eigenvectors of C
  VecX scale = VecX::Ones(n);         // sqrt of eigenvalues

  Rng rng = make_rng(options.seed);
  std::normal_distribution<double> normal;

  CmaResult res;
  res.x_best = x0;
  std::deque<double> recent;
  MatX z(n, lambda), y(n, lambda), x(n, lambda);
  std::vector<double> fx(lambda);
  std::vector<int> order(lambda);

  while (res.n_evals + lambda <= options.budget) {
    for (int k = 0; k < lambda; ++k) {
      for (int i = 0; i < n; ++i) z(i, k) = normal(rng);
    }
    y = basis * scale.asDiagonal() * z;
    x = (st.sigma * y).colwise() + st.mean;
    parallel_for(0, lambda, options.workers, [&](long k) { fx[k] = f(x.col(k)); });
    res.n_evals += lambda;

    for (int k = 0; k < lambda; ++k) {
      if (!std::isfinite(fx[k])) {
        ++res.rejected;
        log_warn("CMA-ES: non-finite objective at generation " +
                 std::to_string(st.generation) + ", candidate ranked last");
        fx[k] = std::numeric_limits<double>::infinity();
      }
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    const double gen_best = fx[order[0]];
    if (gen_best < res.f_best) {
      res.f_best = gen_best;
      res.x_best = x.col(order[0]);
    }
    res.best_history.push_back(res.f_best);
    ++st.generation;
    if (res.f_best <= options.f_target) {
      res.stop_reason = "target";
      break;
    }

    // Recombination and evolution paths.
    VecX y_w = VecX::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += w(i) * y.col(order[i]);
    st.mean += st.sigma * y_w;
    const MatX inv_sqrt = basis * scale.cwiseInverse().asDiagonal() * basis.transpose();
    st.path_sigma = (1.0 - c_sigma) * st.path_sigma +
                    std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * (inv_sqrt * y_w);
    const double ps_norm = st.path_sigma.norm();
    const double ps_denom = std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * st.generation));
    const bool h_sigma = ps_norm / ps_denom < (1.4 + 2.0 / (dn + 1.0)) * chi_n;
    st.path_c = (1.0 - c_c) * st.path_c;
    if (h_sigma) st.path_c += std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w;

    MatX rank_mu = MatX::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const auto yi = y.col(order[i]);
      rank_mu.noalias() += w(i) * yi * yi.transpose();
    }
    const double delta_h = h_sigma ? 0.0 : c_c * (2.0 - c_c);
    st.cov = (1.0 - c_1 - c_mu + c_1 * delta_h) * st.cov +
             c_1 * st.path_c * st.path_c.transpose() + c_mu * rank_mu;
    st.cov = 0.5 * (st.cov + st.cov.transpose());
    st.sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<MatX> eig(st.cov);
    const double min_eig = eig.eigenvalues().minCoeff();
    res.min_eigenvalue = std::min(res.min_eigenvalue, min_eig);
    if (!(min_eig > 1e-14) || !std::isfinite(st.sigma)) {
      res.stop_reason = "covariance conditioning";
      break;
    }
    basis = eig.eigenvectors();
    scale = eig.eigenvalues().cwiseSqrt();
    if (eig.eigenvalues().maxCoeff() > 1e14 * min_eig) {
      res.stop_reason = "covariance conditioning";
      break;
    }

    // Termination on stagnation.
    recent.push_back(gen_best);
    if (static_cast<int>(recent.size()) > history_len) recent.pop_front();
    if (static_cast<int>(recent.size()) == history_len) {
      const auto [lo, hi] = std::minmax_element(recent.begin(), recent.end());
      const double gen_range = fx[order[lambda - 1]] - fx[order[0]];
      if (std::isfinite(*hi) && *hi - *lo < options.tol_fun &&
          std::isfinite(gen_range) && gen_range < options.tol_fun) {
        res.stop_reason = "tol_fun";
        break;
      }
    }
    if (st.sigma * std::sqrt(st.cov.diagonal().maxCoeff()) < options.tol_x) {
      res.stop_reason = "tol_x";
      break;
    }
    const int g = options.stall_generations;
    if (g > 0 && static_cast<int>(res.best_history.size()) > g) {
      const double before = res.best_history[res.best_history.size() - 1 - g];
      if (before - res.f_best <= options.stall_tol * std::abs(before)) {
        res.stop_reason = "stall";
        break;
      }
    }
  }
  if (res.stop_reason.empty()) res.stop_reason = "budget";
  res.generations = st.generation;
  res.final_state = std::move(st);
  return res;
}

}  // namespace sgrl
