#pragma once

#include <string>
#include <vector>

#include "sgrl/scene.hpp"

namespace sgrl {

struct SimParams {
  double dt = 1e-3;
  double contact_stiffness = 1e4;   // N/m
  double contact_damping = 50.0;    // N s/m
  double friction_viscosity = 15.0; // N s/m, slope of the regularized Coulomb law
  double kp = 1000.0;               // N/m
  double kd = 60.0;                 // N s/m
  double robot_mass = 1.0;          // kg, gravity compensated
  double actuator_force_limit = 20.0; // N, saturation of the PD force
  double action_limit = 0.1;        // m per step, per axis
  double step_duration = 0.05;      // s (20 Hz)
  double segment_horizon = 0.1;     // s, zero-velocity end of an action spline
  double goal_tolerance = 0.01;     // m
  double divergence_bound = 1e3;
  int time_limit_steps = 40;        // 2 s

  void validate() const;
  int substeps() const;
};

/// Quadratic actuator reference r(tau) = c0 + c1 tau + c2 tau^2 on [0, duration].
struct RefSegment {
  Vec3 c0 = Vec3::Zero();
  Vec3 c1 = Vec3::Zero();
  Vec3 c2 = Vec3::Zero();
  double duration = 0.05;

  Vec3 position(double tau) const { return c0 + tau * (c1 + tau * c2); }
  Vec3 velocity(double tau) const { return c1 + 2.0 * tau * c2; }
};

/// Constant reference held at `target` for `duration` seconds.
RefSegment hold_segment(const Vec3& target, double duration);

/// First piece of the two-piece quadratic B-spline that starts at
/// (ref, ref_vel) and ends at ref + a with zero velocity after the horizon.
RefSegment action_segment(const DynState& state, const Vec3& action, const SimParams& params);
/// Inverse of action_segment: the unique action whose first piece is `seg`.
Vec3 segment_action(const RefSegment& seg, const SimParams& params);

/// Advances duration/dt substeps of penalty-contact dynamics with semi-implicit
/// Euler. Throws SimulationDivergedError when the state leaves the bound.
DynState step_physics(const SceneSpec& spec, const DynState& state,
                      const RefSegment& segment, const SimParams& params);

inline constexpr int kObsDim = 21;
using Observation = Eigen::Matrix<double, kObsDim, 1>;

/// (q, p, qd, pd, 0.1 omega, 0.01 kp (ref - q), goal - p).
Observation observe(const DynState& state, const Vec3& goal, const SimParams& params);

struct StepResult {
  Observation obs = Observation::Zero();
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  bool diverged = false;
};

/// Deterministic MDP transition without episode bookkeeping (action clipped).
DynState mdp_transition(const SceneSpec& spec, const SimParams& params,
                        const DynState& state, const Vec3& action);

bool goal_reached(const DynState& state, const Vec3& goal, const SimParams& params);

/// Goal-conditioned 20 Hz environment over the contact simulator.
class Env {
 public:
  Env(SceneSpec spec, SimParams params);

  Observation reset(const StaticConfig& start, const StaticConfig& goal);
  Observation reset(const DynState& start, const Vec3& goal);
  StepResult step(const Vec3& action);

  void set_time_limit(int steps) { time_limit_ = steps; }
  int time_limit() const { return time_limit_; }
  int steps() const { return steps_; }
  const DynState& state() const { return state_; }
  const Vec3& goal() const { return goal_; }
  const SceneSpec& scene() const { return spec_; }
  const SimParams& params() const { return params_; }

 private:
  SceneSpec spec_;
  SimParams params_;
  DynState state_;
  Vec3 goal_ = Vec3::Zero();
  int steps_ = 0;
  int time_limit_ = 40;
};

/// One row of the fixed-order rollout dump: t, q(3), p(3), quat(w,x,y,z), reward.
struct DumpRow {
  double t = 0.0;
  Vec3 q = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Eigen::Quaterniond quat = Eigen::Quaterniond::Identity();
  double reward = 0.0;
};

std::string rollout_dump_csv(const std::vector<DumpRow>& rows);

}  // namespace sgrl
