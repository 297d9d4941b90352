#include "sgrl/nlp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

namespace sgrl {

void ALParams::validate() const {
  if (!(penalty_growth > 1.0)) throw ConfigError("penalty_growth must exceed 1");
  if (!(penalty_init > 0.0)) throw ConfigError("penalty_init must be positive");
  if (!(tol_feas > 0.0) || !(tol_step > 0.0)) throw ConfigError("tolerances must be positive");
  if (max_outer < 1 || max_inner < 1) throw ConfigError("iteration limits must be positive");
}

VecX initial_decision(const ConstraintSpec& cs, const Vec6& s_bar) {
  const SceneSpec& spec = cs.scene;
  const Vec6 s = s_bar.cwiseMax(spec.box_lower).cwiseMin(spec.box_upper);
  VecX z(cs.decision_dim());
  z.head<6>() = s;
  const int nc = cs.num_contacts();
  const double weight = cs.gravity_wrench.head<3>().norm();
  for (int k = 0; k < nc; ++k) {
    const PairDistance pd = pair_distance(spec, kObjectId, cs.supports[k], s);
    z.segment<3>(6 + 6 * k) = pd.witness_j;
    z.segment<3>(9 + 6 * k) = -(weight / nc) * pd.normal;
  }
  return z;
}

namespace {

// Augmented Lagrangian in PHR form:
//   f + kappa^T h + nu |h|^2 + 1/(4 mu) sum (max(0, lambda + 2 mu g)^2 - lambda^2)
class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const ConstraintSpec& cs, const Vec6& s_bar)
      : cs_(cs), s_bar_(s_bar),
        kappa_(VecX::Zero(cs.num_eq())), lambda_(VecX::Zero(cs.num_ineq())) {}

  struct Point {
    VecX z;
    ConstraintEval ev;
    double value = 0.0;
  };

  Point at(const VecX& z) {
    Point pt;
    pt.z = z;
    pt.ev = evaluate(cs_, z);
    ++evals_;
    const VecX ds = z.head<6>() - s_bar_;
    double v = 0.5 * ds.squaredNorm();
    v += kappa_.dot(pt.ev.h) + nu_ * pt.ev.h.squaredNorm();
    for (int k = 0; k < pt.ev.g.size(); ++k) {
      const double shifted = std::max(0.0, lambda_(k) + 2.0 * mu_ * pt.ev.g(k));
      v += (shifted * shifted - lambda_(k) * lambda_(k)) / (4.0 * mu_);
    }
    pt.value = v;
    return pt;
  }

  void gauss_newton(const Point& pt, VecX* grad, MatX* hess) const {
    const int n = cs_.decision_dim();
    grad->setZero(n);
    hess->setZero(n, n);
    grad->head<6>() = pt.z.head<6>() - s_bar_;
    hess->topLeftCorner<6, 6>().setIdentity();
    const VecX weq = kappa_ + 2.0 * nu_ * pt.ev.h;
    *grad += pt.ev.jac_h.transpose() * weq;
    hess->noalias() += 2.0 * nu_ * pt.ev.jac_h.transpose() * pt.ev.jac_h;
    for (int k = 0; k < pt.ev.g.size(); ++k) {
      const double shifted = lambda_(k) + 2.0 * mu_ * pt.ev.g(k);
      if (shifted <= 0.0) continue;
      const auto row = pt.ev.jac_g.row(k);
      *grad += shifted * row.transpose();
      hess->noalias() += 2.0 * mu_ * row.transpose() * row;
    }
  }

  void update_multipliers(const ConstraintEval& ev) {
    kappa_ += 2.0 * nu_ * ev.h;
    lambda_ = (lambda_ + 2.0 * mu_ * ev.g).cwiseMax(0.0);
  }

  void scale_penalty(double factor, double cap) {
    nu_ = std::min(nu_ * factor, cap);
    mu_ = std::min(mu_ * factor, cap);
  }

  void set_penalty(double value) { nu_ = mu_ = value; }
  int evals() const { return evals_; }

 private:
  const ConstraintSpec& cs_;
  Vec6 s_bar_;
  VecX kappa_;
  VecX lambda_;
  double nu_ = 1.0;
  double mu_ = 1.0;
  int evals_ = 0;
};

}  // namespace

NLPResult solve_proximal(const ConstraintSpec& cs, const Vec6& s_bar,
                         const ALParams& params) {
  params.validate();
  const SceneSpec& spec = cs.scene;
  AugmentedLagrangian al(cs, s_bar);
  al.set_penalty(params.penalty_init);

  auto clamp_box = [&](VecX z) {
    z.head<6>() = z.head<6>().cwiseMax(spec.box_lower).cwiseMin(spec.box_upper);
    return z;
  };

  NLPResult result;
  auto pt = al.at(initial_decision(cs, s_bar));
  double damping = 1e-6;
  double prev_violation = max_violation(pt.ev.g, pt.ev.h);
  const int n = cs.decision_dim();
  VecX grad(n);
  MatX hess(n, n);

  for (int outer = 0; outer < params.max_outer; ++outer) {
    double last_move = 0.0;
    for (int inner = 0; inner < params.max_inner; ++inner) {
      al.gauss_newton(pt, &grad, &hess);
      hess.diagonal().array() += damping;
      const VecX delta = -hess.ldlt().solve(grad);
      if (!delta.allFinite()) {
        damping *= 10.0;
        continue;
      }
      double alpha = 1.0;
      bool accepted = false;
      AugmentedLagrangian::Point trial;
      for (int ls = 0; ls < 30; ++ls) {
        const VecX z_new = clamp_box(pt.z + alpha * delta);
        trial = al.at(z_new);
        if (trial.value <= pt.value + 1e-4 * grad.dot(z_new - pt.z)) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        damping = std::min(damping * 10.0, 1e6);
        if (damping >= 1e6) break;
        continue;
      }
      last_move = (trial.z - pt.z).lpNorm<Eigen::Infinity>();
      pt = std::move(trial);
      damping = alpha == 1.0 ? std::max(damping * 0.5, 1e-9) : damping * 2.0;
      if (last_move < params.tol_step) break;
    }
    const double violation = max_violation(pt.ev.g, pt.ev.h);
    result.outer_violation.push_back(violation);
    if (violation <= params.tol_feas && last_move < 10.0 * params.tol_step) break;
    al.update_multipliers(pt.ev);
    if (violation > 0.25 * prev_violation) {
      al.scale_penalty(params.penalty_growth, params.penalty_max);
    }
    prev_violation = violation;
    pt = al.at(pt.z);
  }

  result.z = pt.z;
  result.violation = max_violation(pt.ev.g, pt.ev.h);
  result.feasible = result.violation <= params.tol_feas;
  result.n_evals = al.evals();
  result.cost = (pt.z.head<6>() - s_bar).squaredNorm();
  return result;
}

}  // namespace sgrl
