#pragma once

#include <array>
#include <vector>

#include "sgrl/sim.hpp"

namespace sgrl {

/// Clamped quadratic B-spline reference over [0, horizon] with control points
/// (start, start, theta_1, ..., theta_4, theta_4). The doubled first and last
/// points pin zero velocity at both ends.
struct ControlSpline {
  static constexpr int kKnots = 4;
  static constexpr int kParamDim = 3 * kKnots;

  Vec3 start = Vec3::Zero();
  std::array<Vec3, kKnots> theta{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  double horizon = 1.0;
  /// Interior knot times. Must sit on the MDP grid for compilation.
  std::array<double, kKnots> interior{0.2, 0.4, 0.6, 0.8};

  /// Spline holding `q0` for the whole horizon.
  static ControlSpline hold(const Vec3& q0, double horizon = 1.0);
  /// theta_k = start + x.segment<3>(3k).
  static ControlSpline from_offsets(const Vec3& q0, const VecX& x, double horizon = 1.0);
  VecX offsets() const;
};

struct SplinePoint {
  Vec3 position;
  Vec3 velocity;
};

/// Exact polynomial evaluation; throws std::out_of_range outside [0, horizon].
SplinePoint eval_spline(const ControlSpline& sp, double t);
/// Constant second derivative on the polynomial span containing t (right-continuous).
Vec3 spline_acceleration(const ControlSpline& sp, double t);

/// The spline cut into MDP-step pieces. Throws ConfigError when a breakpoint
/// or the horizon is off the step grid.
std::vector<RefSegment> spline_pieces(const ControlSpline& sp, const SimParams& params);

/// Actions whose action segments reproduce the spline pieces from `start`.
/// The start reference must coincide with the spline start at rest.
std::vector<Vec3> compile_to_actions(const ControlSpline& sp, const DynState& start,
                                     const SimParams& params);

/// Runs the spline pieces through the physics; returns horizon/step + 1 snapshots.
std::vector<DynState> rollout_spline(const SceneSpec& spec, const SimParams& params,
                                     const ControlSpline& sp, const DynState& start);

/// Replays actions through mdp_transition; same snapshot layout as rollout_spline.
std::vector<DynState> replay_actions(const SceneSpec& spec, const SimParams& params,
                                     const std::vector<Vec3>& actions, const DynState& start);

/// Largest per-axis action magnitude in the list.
double max_action_magnitude(const std::vector<Vec3>& actions);

}  // namespace sgrl
