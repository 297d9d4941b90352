#include "sgrl/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sgrl {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

std::vector<std::pair<int, int>> collision_pairs(const SceneSpec& spec) {
  std::vector<std::pair<int, int>> pairs;
  const int m = spec.num_shapes();
  for (int i = 1; i <= m; ++i) {
    for (int j = i + 1; j <= m; ++j) {
      if (spec.shape(i).body == Body::kStatic && spec.shape(j).body == Body::kStatic) {
        continue;
      }
      pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

ConstraintSpec build_constraints(const SceneSpec& spec, const ContactMode& mode) {
  ConstraintSpec cs;
  cs.scene = spec;
  cs.supports = mode.supports;
  std::sort(cs.supports.begin(), cs.supports.end());
  if (cs.supports.size() > 3) throw ConfigError("at most 3 support contacts");
  const std::set<int> allowed(spec.support_set.begin(), spec.support_set.end());
  for (std::size_t k = 0; k < cs.supports.size(); ++k) {
    const int j = cs.supports[k];
    if (j < 1 || j > spec.num_shapes()) {
      throw ConfigError("unknown shape id " + std::to_string(j));
    }
    if (!allowed.count(j)) {
      throw ConfigError("shape " + std::to_string(j) + " is not a support");
    }
    if (k > 0 && cs.supports[k - 1] == j) throw ConfigError("duplicate support");
  }
  const std::set<int> active(cs.supports.begin(), cs.supports.end());
  for (const auto& [i, j] : collision_pairs(spec)) {
    if (i == kObjectId && active.count(j)) continue;
    cs.free_pairs.emplace_back(i, j);
    cs.ineq_rows.push_back({RowKind::kNonCollision, i, j});
  }
  for (int j : cs.supports) {
    cs.ineq_rows.push_back({RowKind::kNormalForce, kObjectId, j});
    cs.ineq_rows.push_back({RowKind::kFrictionCone, kObjectId, j});
  }
  for (int j : cs.supports) {
    cs.eq_rows.push_back({RowKind::kTouch, kObjectId, j});
    cs.eq_rows.push_back({RowKind::kObjectSurface, kObjectId, j});
    cs.eq_rows.push_back({RowKind::kSupportSurface, kObjectId, j});
  }
  for (int k = 0; k < 3; ++k) cs.eq_rows.push_back({RowKind::kForceBalance, kObjectId, 0});
  for (int k = 0; k < 3; ++k) cs.eq_rows.push_back({RowKind::kTorqueBalance, kObjectId, 0});
  Vec6 grav = Vec6::Zero();
  grav.head<3>() = spec.gravity_vector();
  cs.gravity_wrench = spec.object_inertia * grav;
  return cs;
}

ConstraintEval evaluate(const ConstraintSpec& cs, const VecX& z) {
  if (z.size() != cs.decision_dim()) {
    throw ConfigError("decision vector has wrong dimension");
  }
  const SceneSpec& spec = cs.scene;
  const int n = cs.decision_dim();
  const Vec6 s = z.head<6>();
  const Vec3 p_obj = s.tail<3>();
  ConstraintEval ev;
  ev.g = VecX::Zero(cs.num_ineq());
  ev.h = VecX::Zero(cs.num_eq());
  ev.jac_g = MatX::Zero(cs.num_ineq(), n);
  ev.jac_h = MatX::Zero(cs.num_eq(), n);

  int gi = 0;
  for (const auto& [i, j] : cs.free_pairs) {
    const PairDistance pd = pair_distance(spec, i, j, s);
    ev.g(gi) = -pd.distance;
    ev.jac_g.block<1, 6>(gi, 0) = -pd.d_distance;
    ++gi;
  }

  const double cone = 1.0 + spec.mu * spec.mu;
  int hi = 0;
  Vec3 force_sum = Vec3::Zero();
  Vec3 torque_sum = Vec3::Zero();
  const int nc = cs.num_contacts();
  const int balance_row = 3 * nc;
  for (int k = 0; k < nc; ++k) {
    const int j = cs.supports[k];
    const int off_p = 6 + 6 * k;
    const int off_f = off_p + 3;
    const Vec3 poa = z.segment<3>(off_p);
    const Vec3 f = z.segment<3>(off_f);
    const PairDistance pd = pair_distance(spec, kObjectId, j, s);
    const double nf = pd.normal.dot(f);

    ev.g(gi) = nf;
    ev.jac_g.block<1, 6>(gi, 0) = f.transpose() * pd.d_normal;
    ev.jac_g.block<1, 3>(gi, off_f) = pd.normal.transpose();
    ++gi;

    ev.g(gi) = f.squaredNorm() - cone * nf * nf;
    ev.jac_g.block<1, 6>(gi, 0) = -2.0 * cone * nf * f.transpose() * pd.d_normal;
    ev.jac_g.block<1, 3>(gi, off_f) =
        2.0 * f.transpose() - 2.0 * cone * nf * pd.normal.transpose();
    ++gi;

    ev.h(hi) = pd.distance;
    ev.jac_h.block<1, 6>(hi, 0) = pd.d_distance;
    ++hi;

    const SurfaceDistance on_obj = poa_surface_distance(spec, kObjectId, poa, s);
    ev.h(hi) = on_obj.distance;
    ev.jac_h.block<1, 6>(hi, 0) = on_obj.d_config;
    ev.jac_h.block<1, 3>(hi, off_p) = on_obj.d_point.transpose();
    ++hi;

    const SurfaceDistance on_sup = poa_surface_distance(spec, j, poa, s);
    ev.h(hi) = on_sup.distance;
    ev.jac_h.block<1, 6>(hi, 0) = on_sup.d_config;
    ev.jac_h.block<1, 3>(hi, off_p) = on_sup.d_point.transpose();
    ++hi;

    const Vec3 arm = poa - p_obj;
    force_sum += f;
    torque_sum += arm.cross(f);
    ev.jac_h.block<3, 3>(balance_row, off_f) = Mat3::Identity();
    ev.jac_h.block<3, 3>(balance_row + 3, off_p) = -skew(f);
    ev.jac_h.block<3, 3>(balance_row + 3, off_f) = skew(arm);
    ev.jac_h.block<3, 3>(balance_row + 3, 3) += skew(f);
  }
  ev.h.segment<3>(balance_row) = force_sum - cs.gravity_wrench.head<3>();
  ev.h.segment<3>(balance_row + 3) = torque_sum - cs.gravity_wrench.tail<3>();
  return ev;
}

double max_violation(const VecX& g, const VecX& h) {
  double v = 0.0;
  if (g.size() > 0) v = std::max(v, g.maxCoeff());
  if (h.size() > 0) v = std::max(v, h.cwiseAbs().maxCoeff());
  return v;
}

double max_violation(const ConstraintSpec& cs, const VecX& z) {
  const ConstraintEval ev = evaluate(cs, z);
  return max_violation(ev.g, ev.h);
}

VecX pack_decision(const Vec6& s, const ContactMode& mode) {
  const int nc = mode.arity();
  if (static_cast<int>(mode.poa.size()) != nc || static_cast<int>(mode.force.size()) != nc) {
    throw ConfigError("contact mode auxiliaries do not match its supports");
  }
  // Auxiliaries follow the sorted support order.
  std::vector<int> order(nc);
  for (int k = 0; k < nc; ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return mode.supports[a] < mode.supports[b]; });
  VecX z(6 + 6 * nc);
  z.head<6>() = s;
  for (int k = 0; k < nc; ++k) {
    z.segment<3>(6 + 6 * k) = mode.poa[order[k]];
    z.segment<3>(9 + 6 * k) = mode.force[order[k]];
  }
  return z;
}

void unpack_decision(const ConstraintSpec& cs, const VecX& z, Vec6* s,
                     ContactMode* mode) {
  if (z.size() != cs.decision_dim()) throw ConfigError("decision vector has wrong dimension");
  if (s) *s = z.head<6>();
  if (mode) {
    mode->supports = cs.supports;
    mode->poa.clear();
    mode->force.clear();
    for (int k = 0; k < cs.num_contacts(); ++k) {
      mode->poa.push_back(z.segment<3>(6 + 6 * k));
      mode->force.push_back(z.segment<3>(9 + 6 * k));
    }
  }
}

double revalidate(const SceneSpec& spec, const StaticConfig& config) {
  const ConstraintSpec cs = build_constraints(spec, config.mode);
  return max_violation(cs, pack_decision(config.s, config.mode));
}

}  // namespace sgrl
