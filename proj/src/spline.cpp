#include "sgrl/spline.hpp"

#include <cmath>
#include <stdexcept>

namespace sgrl {

namespace {

constexpr int kDegree = 2;
constexpr int kNumCtrl = ControlSpline::kKnots + 3;

struct Basis {
  std::array<double, kNumCtrl + kDegree + 1> u;
  std::array<Vec3, kNumCtrl> ctrl;
  std::array<Vec3, kNumCtrl - 1> dctrl;  // control points of the derivative spline
};

Basis make_basis(const ControlSpline& sp) {
  if (!(sp.horizon > 0.0)) throw ConfigError("spline horizon must be positive");
  double prev = 0.0;
  for (double k : sp.interior) {
    if (!(k > prev) || !(k < sp.horizon)) {
      throw ConfigError("spline interior knots must increase strictly inside (0, horizon)");
    }
    prev = k;
  }
  Basis b;
  b.u = {0.0, 0.0, 0.0, sp.interior[0], sp.interior[1], sp.interior[2], sp.interior[3],
         sp.horizon, sp.horizon, sp.horizon};
  b.ctrl = {sp.start, sp.start, sp.theta[0], sp.theta[1], sp.theta[2], sp.theta[3], sp.theta[3]};
  for (int j = 0; j + 1 < kNumCtrl; ++j) {
    b.dctrl[j] = kDegree * (b.ctrl[j + 1] - b.ctrl[j]) / (b.u[j + kDegree + 1] - b.u[j + 1]);
  }
  return b;
}

// Span i with u[i] <= t < u[i+1]; the last span is closed on the right.
int find_span(const Basis& b, double t) {
  for (int i = kDegree; i < kNumCtrl - 1; ++i) {
    if (t < b.u[i + 1]) return i;
  }
  return kNumCtrl - 1;
}

Vec3 position_on_span(const Basis& b, int i, double t) {
  std::array<Vec3, kDegree + 1> d{b.ctrl[i - 2], b.ctrl[i - 1], b.ctrl[i]};
  for (int r = 1; r <= kDegree; ++r) {
    for (int j = kDegree; j >= r; --j) {
      const double lo = b.u[j + i - kDegree];
      const double hi = b.u[j + 1 + i - r];
      const double alpha = (t - lo) / (hi - lo);
      d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
    }
  }
  return d[kDegree];
}

Vec3 velocity_on_span(const Basis& b, int i, double t) {
  const double w = (t - b.u[i]) / (b.u[i + 1] - b.u[i]);
  return (1.0 - w) * b.dctrl[i - 2] + w * b.dctrl[i - 1];
}

Vec3 acceleration_on_span(const Basis& b, int i) {
  return (b.dctrl[i - 1] - b.dctrl[i - 2]) / (b.u[i + 1] - b.u[i]);
}

void check_range(const ControlSpline& sp, double t) {
  if (!(t >= 0.0 && t <= sp.horizon)) {
    throw std::out_of_range("spline time " + std::to_string(t) + " outside [0, " +
                            std::to_string(sp.horizon) + "]");
  }
}

bool on_grid(double t, double h) {
  const double n = t / h;
  return std::abs(n - std::round(n)) <= 1e-9;
}

}  // namespace

ControlSpline ControlSpline::hold(const Vec3& q0, double horizon) {
  ControlSpline sp;
  sp.start = q0;
  sp.theta.fill(q0);
  sp.horizon = horizon;
  sp.interior = {0.2 * horizon, 0.4 * horizon, 0.6 * horizon, 0.8 * horizon};
  return sp;
}

ControlSpline ControlSpline::from_offsets(const Vec3& q0, const VecX& x, double horizon) {
  if (x.size() != kParamDim) {
    throw ConfigError("spline parameter vector must have " + std::to_string(kParamDim) +
                      " entries");
  }
  ControlSpline sp = hold(q0, horizon);
  for (int k = 0; k < kKnots; ++k) sp.theta[k] = q0 + x.segment<3>(3 * k);
  return sp;
}

VecX ControlSpline::offsets() const {
  VecX x(kParamDim);
  for (int k = 0; k < kKnots; ++k) x.segment<3>(3 * k) = theta[k] - start;
  return x;
}

SplinePoint eval_spline(const ControlSpline& sp, double t) {
  check_range(sp, t);
  const Basis b = make_basis(sp);
  const int i = find_span(b, t);
  return {position_on_span(b, i, t), velocity_on_span(b, i, t)};
}

Vec3 spline_acceleration(const ControlSpline& sp, double t) {
  check_range(sp, t);
  const Basis b = make_basis(sp);
  return acceleration_on_span(b, find_span(b, t));
}

std::vector<RefSegment> spline_pieces(const ControlSpline& sp, const SimParams& params) {
  const double h = params.step_duration;
  if (!on_grid(sp.horizon, h)) {
    throw ConfigError("spline horizon is not a multiple of the step duration");
  }
  for (double k : sp.interior) {
    if (!on_grid(k, h)) {
      throw ConfigError("spline breakpoint " + std::to_string(k) +
                        " is not aligned with the step grid");
    }
  }
  const Basis b = make_basis(sp);
  const int n = static_cast<int>(std::lround(sp.horizon / h));
  std::vector<RefSegment> pieces(n);
  for (int k = 0; k < n; ++k) {
    const double t0 = k * h;
    const int i = find_span(b, t0 + 0.5 * h);
    RefSegment& seg = pieces[k];
    seg.duration = h;
    seg.c0 = position_on_span(b, i, t0);
    seg.c1 = velocity_on_span(b, i, t0);
    seg.c2 = 0.5 * acceleration_on_span(b, i);
  }
  return pieces;
}

std::vector<Vec3> compile_to_actions(const ControlSpline& sp, const DynState& start,
                                     const SimParams& params) {
  if ((start.ref - sp.start).cwiseAbs().maxCoeff() > 1e-9 ||
      start.ref_vel.cwiseAbs().maxCoeff() > 1e-9) {
    throw ConfigError("start reference does not match the spline start at rest");
  }
  const auto pieces = spline_pieces(sp, params);
  std::vector<Vec3> actions;
  actions.reserve(pieces.size());
  for (const auto& seg : pieces) actions.push_back(segment_action(seg, params));
  return actions;
}

std::vector<DynState> rollout_spline(const SceneSpec& spec, const SimParams& params,
                                     const ControlSpline& sp, const DynState& start) {
  const auto pieces = spline_pieces(sp, params);
  std::vector<DynState> path;
  path.reserve(pieces.size() + 1);
  path.push_back(start);
  for (const auto& seg : pieces) path.push_back(step_physics(spec, path.back(), seg, params));
  return path;
}

std::vector<DynState> replay_actions(const SceneSpec& spec, const SimParams& params,
                                     const std::vector<Vec3>& actions, const DynState& start) {
  std::vector<DynState> path;
  path.reserve(actions.size() + 1);
  path.push_back(start);
  for (const auto& a : actions) path.push_back(mdp_transition(spec, params, path.back(), a));
  return path;
}

double max_action_magnitude(const std::vector<Vec3>& actions) {
  double m = 0.0;
  for (const auto& a : actions) m = std::max(m, a.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace sgrl
