#include "sgrl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sgrl {

void SimParams::validate() const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(contact_stiffness > 0.0) || !(contact_damping > 0.0) || !(kp > 0.0) ||
      !(kd > 0.0) || !(friction_viscosity > 0.0) || !(robot_mass > 0.0) ||
      !(actuator_force_limit > 0.0)) {
    throw ConfigError("stiffness, damping, gains and masses must be positive");
  }
  if (std::abs(segment_horizon - 2.0 * step_duration) > 1e-12) {
    throw ConfigError("action horizon must span two MDP steps");
  }
  if (!(action_limit > 0.0)) throw ConfigError("action limit must be positive");
  const double n = step_duration / dt;
  if (std::abs(n - std::round(n)) > 1e-9) {
    throw ConfigError("step duration must be a multiple of dt");
  }
}

int SimParams::substeps() const { return static_cast<int>(std::lround(step_duration / dt)); }

RefSegment hold_segment(const Vec3& target, double duration) {
  RefSegment seg;
  seg.c0 = target;
  seg.duration = duration;
  return seg;
}

RefSegment action_segment(const DynState& state, const Vec3& action, const SimParams& params) {
  // Control points ref, ref + v0 h/2, ref + a, ref + a on knots (0,0,0,h,2h,2h,2h):
  // the first piece ends at (P1 + P2)/2.
  const double h = params.step_duration;
  RefSegment seg;
  seg.duration = h;
  seg.c0 = state.ref;
  seg.c1 = state.ref_vel;
  seg.c2 = (0.5 * action - 0.75 * h * state.ref_vel) / (h * h);
  return seg;
}

Vec3 segment_action(const RefSegment& seg, const SimParams& params) {
  const double h = params.step_duration;
  return 2.0 * h * h * seg.c2 + 1.5 * h * seg.c1;
}

namespace {

struct Contact {
  double distance;
  Vec3 normal;  // from the other shape toward the sphere
};

Contact sphere_contact(const Vec3& c, double r, const Shape& other, const Vec3& other_center) {
  Contact ct{};
  switch (other.kind) {
    case ShapeKind::kSphere: {
      const Vec3 u = c - other_center;
      const double len = u.norm();
      ct.normal = len > 1e-12 ? Vec3(u / len) : Vec3::UnitZ();
      ct.distance = len - r - other.radius;
      break;
    }
    case ShapeKind::kFloor:
      ct.normal = Vec3::UnitZ();
      ct.distance = c.z() - other.height - r;
      break;
    case ShapeKind::kBox: {
      Vec3 grad;
      ct.distance = box_signed_distance(other.center, other.half_extents, c, &grad) - r;
      ct.normal = grad;
      break;
    }
  }
  return ct;
}

struct BodyForces {
  Vec3 f_obj = Vec3::Zero();
  Vec3 tau_obj = Vec3::Zero();
  Vec3 f_rob = Vec3::Zero();
};

// Penalty normal force plus regularized Coulomb friction on sphere A (center
// ca, velocity va, spin wa) against B moving with velocity vb (no spin).
Vec3 contact_force(const Contact& ct, double ra, const Vec3& va,
                   const Vec3& wa, const Vec3& vb, const SimParams& prm, double mu,
                   Vec3* lever) {
  const double pen = -ct.distance;
  *lever = -(ra - 0.5 * pen) * ct.normal;
  const Vec3 v_rel = va + wa.cross(*lever) - vb;
  const double vn = ct.normal.dot(v_rel);
  const double fn = std::max(0.0, prm.contact_stiffness * pen - prm.contact_damping * vn);
  Vec3 f = fn * ct.normal;
  const Vec3 vt = v_rel - vn * ct.normal;
  const double speed = vt.norm();
  if (speed > 1e-12 && fn > 0.0) {
    const double ft = std::min(mu * fn, prm.friction_viscosity * speed);
    f -= (ft / speed) * vt;
  }
  return f;
}

void check_finite(const DynState& s, double bound) {
  auto bad = [bound](const Vec3& v) {
    return !v.allFinite() || v.cwiseAbs().maxCoeff() > bound;
  };
  if (bad(s.q) || bad(s.p) || bad(s.qd) || bad(s.pd) || bad(s.omega)) {
    throw SimulationDivergedError("simulation diverged at t = " + std::to_string(s.t));
  }
}

}  // namespace

DynState step_physics(const SceneSpec& spec, const DynState& start,
                      const RefSegment& segment, const SimParams& params) {
  const Shape& obj = spec.shape(kObjectId);
  const int robot = spec.robot_id();
  const Shape& rob = spec.shape(robot);
  const double m_obj = spec.object_mass;
  const double inertia = spec.object_inertia(3, 3);
  const Vec3 grav = spec.gravity_vector();
  const double dt = params.dt;
  const int n = static_cast<int>(std::lround(segment.duration / dt));

  DynState x = start;
  for (int k = 0; k < n; ++k) {
    const double tau = k * dt;
    BodyForces bf;
    bf.f_obj = m_obj * grav;
    bf.f_rob = params.kp * (segment.position(tau) - x.q) +
               params.kd * (segment.velocity(tau) - x.qd);
    const double pd_norm = bf.f_rob.norm();
    if (pd_norm > params.actuator_force_limit) {
      bf.f_rob *= params.actuator_force_limit / pd_norm;
    }

    for (const Shape& other : spec.shapes) {
      if (other.id == kObjectId) continue;
      const bool is_robot = other.id == robot;
      const Vec3 oc = is_robot ? x.q : other.center;
      const Contact ct = sphere_contact(x.p, obj.radius, other, oc);
      if (ct.distance >= 0.0) continue;
      Vec3 lever;
      const Vec3 vb = is_robot ? x.qd : Vec3::Zero();
      const Vec3 f = contact_force(ct, obj.radius, x.pd, x.omega, vb, params,
                                   spec.mu, &lever);
      bf.f_obj += f;
      bf.tau_obj += lever.cross(f);
      if (is_robot) bf.f_rob -= f;
    }
    for (const Shape& other : spec.shapes) {
      if (other.body != Body::kStatic) continue;
      const Contact ct = sphere_contact(x.q, rob.radius, other, other.center);
      if (ct.distance >= 0.0) continue;
      Vec3 lever;
      bf.f_rob += contact_force(ct, rob.radius, x.qd, Vec3::Zero(), Vec3::Zero(),
                                params, spec.mu, &lever);
    }

    x.qd += (dt / params.robot_mass) * bf.f_rob;
    x.q += dt * x.qd;
    x.pd += (dt / m_obj) * bf.f_obj;
    x.p += dt * x.pd;
    x.omega += (dt / inertia) * bf.tau_obj;
    const double angle = x.omega.norm() * dt;
    if (angle > 0.0) {
      x.quat = Eigen::Quaterniond(Eigen::AngleAxisd(angle, x.omega.normalized())) * x.quat;
      x.quat.normalize();
    }
    check_finite(x, params.divergence_bound);
  }
  x.ref = segment.position(segment.duration);
  x.ref_vel = segment.velocity(segment.duration);
  x.t = start.t + segment.duration;
  return x;
}

Observation observe(const DynState& s, const Vec3& goal, const SimParams& params) {
  Observation o;
  o << s.q, s.p, s.qd, s.pd, 0.1 * s.omega, 0.01 * params.kp * (s.ref - s.q), goal - s.p;
  return o;
}

DynState mdp_transition(const SceneSpec& spec, const SimParams& params,
                        const DynState& state, const Vec3& action) {
  const Vec3 a = action.cwiseMax(-params.action_limit).cwiseMin(params.action_limit);
  return step_physics(spec, state, action_segment(state, a, params), params);
}

bool goal_reached(const DynState& state, const Vec3& goal, const SimParams& params) {
  return (state.p - goal).norm() <= params.goal_tolerance;
}

Env::Env(SceneSpec spec, SimParams params)
    : spec_(std::move(spec)), params_(params), time_limit_(params.time_limit_steps) {
  spec_.validate();
  params_.validate();
}

Observation Env::reset(const StaticConfig& start, const StaticConfig& goal) {
  return reset(DynState::at_rest(start.s), Vec3(object_position(goal.s)));
}

Observation Env::reset(const DynState& start, const Vec3& goal) {
  state_ = start;
  state_.t = 0.0;
  goal_ = goal;
  steps_ = 0;
  return observe(state_, goal_, params_);
}

StepResult Env::step(const Vec3& action) {
  StepResult r;
  ++steps_;
  try {
    state_ = mdp_transition(spec_, params_, state_, action);
  } catch (const SimulationDivergedError&) {
    r.diverged = true;
    r.truncated = true;
    r.obs = observe(state_, goal_, params_);
    return r;
  }
  r.obs = observe(state_, goal_, params_);
  if (goal_reached(state_, goal_, params_)) {
    r.reward = 1.0;
    r.terminated = true;
  } else {
    r.truncated = steps_ >= time_limit_;
  }
  return r;
}

std::string rollout_dump_csv(const std::vector<DumpRow>& rows) {
  std::ostringstream os;
  os << "t,q_x,q_y,q_z,p_x,p_y,p_z,quat_w,quat_x,quat_y,quat_z,reward\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.t, r.q.x(), r.q.y(), r.q.z(), r.p.x(), r.p.y(), r.p.z(), r.quat.w(),
                  r.quat.x(), r.quat.y(), r.quat.z(), r.reward);
    os << buf;
  }
  return os.str();
}

}  // namespace sgrl
