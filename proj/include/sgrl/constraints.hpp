#pragma once

#include <utility>
#include <vector>

#include "sgrl/scene.hpp"

namespace sgrl {

/// What a single constraint row encodes.
enum class RowKind {
  kNonCollision,    // -d_ij <= 0 for pairs not in the mode
  kNormalForce,     // n^T f <= 0
  kFrictionCone,    // |f|^2 - (1 + mu^2) (n^T f)^2 <= 0
  kTouch,           // d_1j = 0
  kObjectSurface,   // point of attack on the object surface
  kSupportSurface,  // point of attack on the support surface
  kForceBalance,
  kTorqueBalance,
};

struct RowInfo {
  RowKind kind;
  int i = 0;
  int j = 0;
};

/// Constraint system for one contact mode over the decision vector
///   z = (s, p_1j1, f_1j1, p_1j2, f_1j2, ...), contacts sorted by support id.
///
/// The force f_1j is the force the object exerts on support j, so the
/// static balance reads sum_j [f_1j; (p_1j - p) x f_1j] = M_1 [g; 0], and the
/// normal n_1j (pointing from the support toward the object) satisfies
/// n^T f <= 0 for a pushing contact.
struct ConstraintSpec {
  SceneSpec scene;
  std::vector<int> supports;
  std::vector<std::pair<int, int>> free_pairs;
  std::vector<RowInfo> ineq_rows;
  std::vector<RowInfo> eq_rows;
  Vec6 gravity_wrench = Vec6::Zero();

  int num_contacts() const { return static_cast<int>(supports.size()); }
  int num_ineq() const { return static_cast<int>(ineq_rows.size()); }
  int num_eq() const { return static_cast<int>(eq_rows.size()); }
  int decision_dim() const { return 6 + 6 * num_contacts(); }
};

/// All shape pairs that involve at least one movable body, i < j.
std::vector<std::pair<int, int>> collision_pairs(const SceneSpec& spec);

ConstraintSpec build_constraints(const SceneSpec& spec, const ContactMode& mode);

struct ConstraintEval {
  VecX g;
  VecX h;
  MatX jac_g;
  MatX jac_h;
};

ConstraintEval evaluate(const ConstraintSpec& cs, const VecX& z);

/// max(max_k max(0, g_k), max_k |h_k|); zero for empty systems.
double max_violation(const VecX& g, const VecX& h);
double max_violation(const ConstraintSpec& cs, const VecX& z);

VecX pack_decision(const Vec6& s, const ContactMode& mode);
/// Splits z into s and the auxiliaries of cs's mode.
void unpack_decision(const ConstraintSpec& cs, const VecX& z, Vec6* s,
                     ContactMode* mode);

/// Re-validates a static configuration from scratch.
double revalidate(const SceneSpec& spec, const StaticConfig& config);

Mat3 skew(const Vec3& v);

}  // namespace sgrl
