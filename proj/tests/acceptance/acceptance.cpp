// Acceptance run: one PASS/FAIL line per criterion. `--skip N` and `--only N`
// select criteria; the exit status is nonzero when any selected one fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "../test_util.hpp"
#include "sgrl/evaluation.hpp"
#include "sgrl/io.hpp"
#include "sgrl/log.hpp"

using namespace sgrl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

const SceneSpec& scene() {
  static const SceneSpec spec = default_double_sphere_scene();
  return spec;
}

// ---------------------------------------------------------------------------
// Independent constraint assembly. Distances are written out per shape kind
// and the normals come from finite differences of those distances, so none of
// the library's geometry or constraint code is involved.

Vec3 center_of(const Shape& sh, const Vec6& s) {
  if (sh.body == Body::kObject) return s.tail<3>();
  if (sh.body == Body::kRobot) return s.head<3>();
  return sh.center;
}

double box_sdf(const Vec3& x, const Vec3& c, const Vec3& e) {
  const Vec3 d = (x - c).cwiseAbs() - e;
  return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
}

// Signed distance from a point to the surface of a shape.
double point_sdf(const Shape& sh, const Vec6& s, const Vec3& x) {
  switch (sh.kind) {
    case ShapeKind::kSphere:
      return (x - center_of(sh, s)).norm() - sh.radius;
    case ShapeKind::kFloor:
      return x.z() - sh.height;
    case ShapeKind::kBox:
      return box_sdf(x, sh.center, sh.half_extents);
  }
  return 0.0;
}

// Every movable shape in the default scene is a sphere.
double pair_gap(const Shape& a, const Shape& b, const Vec6& s) {
  if (a.kind == ShapeKind::kSphere && a.body != Body::kStatic) {
    return point_sdf(b, s, center_of(a, s)) - a.radius;
  }
  return point_sdf(a, s, center_of(b, s)) - b.radius;
}

Vec3 support_normal(const Shape& sup, const Vec6& s) {
  const Vec3 p = s.tail<3>();
  const double h = 1e-7;
  Vec3 n;
  for (int k = 0; k < 3; ++k) {
    Vec3 a = p, b = p;
    a(k) += h;
    b(k) -= h;
    n(k) = (point_sdf(sup, s, a) - point_sdf(sup, s, b)) / (2 * h);
  }
  return n.normalized();
}

double oracle_violation(const SceneSpec& spec, const StaticConfig& c) {
  const Vec6& s = c.s;
  const Vec3 p = s.tail<3>();
  const std::set<int> active(c.mode.supports.begin(), c.mode.supports.end());
  double v = 0.0;
  for (const Shape& a : spec.shapes) {
    for (const Shape& b : spec.shapes) {
      if (a.id >= b.id) continue;
      if (a.body == Body::kStatic && b.body == Body::kStatic) continue;
      const double d = pair_gap(a, b, s);
      if (a.id == kObjectId && active.count(b.id)) {
        v = std::max(v, std::abs(d));
      } else {
        v = std::max(v, -d);
      }
    }
  }
  const Shape& obj = spec.shape(kObjectId);
  const double cone = 1.0 + spec.mu * spec.mu;
  Vec3 force = Vec3::Zero(), torque = Vec3::Zero();
  for (int k = 0; k < c.mode.arity(); ++k) {
    const Shape& sup = spec.shape(c.mode.supports[k]);
    const Vec3& x = c.mode.poa[k];
    const Vec3& f = c.mode.force[k];
    const double nf = support_normal(sup, s).dot(f);
    v = std::max(v, nf);
    v = std::max(v, f.squaredNorm() - cone * nf * nf);
    v = std::max(v, std::abs((x - p).norm() - obj.radius));
    v = std::max(v, std::abs(point_sdf(sup, s, x)));
    force += f;
    torque += (x - p).cross(f);
  }
  force -= Vec3(0.0, 0.0, -spec.object_mass * spec.gravity);
  v = std::max(v, force.cwiseAbs().maxCoeff());
  v = std::max(v, torque.cwiseAbs().maxCoeff());
  return v;
}

// Shared datasets, built once per run.
const StateDataset& states_1000() {
  static StateDataset ds = [] {
    const auto t0 = Clock::now();
    StateDataset d = generate_states(scene(), 1000, 2024);
    d.wall_time = seconds_since(t0);
    return d;
  }();
  return ds;
}

Verdict criterion_1() {
  const StateDataset& ds = states_1000();
  double worst = 0.0;
  int bad = 0;
  for (const auto& c : ds.samples) {
    const double v = oracle_violation(scene(), c);
    worst = std::max(worst, v);
    if (!(v <= 1e-4)) ++bad;
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu samples, %d above 1e-4, worst %.3g, %.1f s",
                ds.samples.size(), bad, worst, ds.wall_time);
  return {ds.samples.size() == 1000 && bad == 0 && ds.wall_time <= 300.0, buf};
}

// ---------------------------------------------------------------------------

double jacobian_error(const ConstraintSpec& cs, const VecX& z) {
  const double h = 1e-6;
  const ConstraintEval ev = evaluate(cs, z);
  MatX jac(ev.jac_g.rows() + ev.jac_h.rows(), z.size());
  jac << ev.jac_g, ev.jac_h;
  MatX fd(jac.rows(), jac.cols());
  for (int k = 0; k < z.size(); ++k) {
    VecX zp = z, zm = z;
    zp(k) += h;
    zm(k) -= h;
    const ConstraintEval a = evaluate(cs, zp);
    const ConstraintEval b = evaluate(cs, zm);
    VecX col(jac.rows());
    col << (a.g - b.g), (a.h - b.h);
    fd.col(k) = col / (2 * h);
  }
  double worst = 0.0;
  for (int r = 0; r < jac.rows(); ++r) {
    const double scale = std::max(1.0, fd.row(r).norm());
    worst = std::max(worst, (jac.row(r) - fd.row(r)).norm() / scale);
  }
  return worst;
}

// Points where a distance is not differentiable: coincident sphere centers
// and centers on a box's edge or corner regions.
bool degenerate(const SceneSpec& spec, const Vec6& s) {
  if ((s.head<3>() - s.tail<3>()).norm() < 1e-3) return true;
  for (const Shape& sh : spec.shapes) {
    if (sh.kind != ShapeKind::kBox) continue;
    for (const Vec3& c : {Vec3(s.head<3>()), Vec3(s.tail<3>())}) {
      const Vec3 d = (c - sh.center).cwiseAbs() - sh.half_extents;
      for (int k = 0; k < 3; ++k) {
        if (std::abs(d(k)) < 1e-3) return true;
      }
    }
  }
  return false;
}

Verdict criterion_2() {
  Rng rng = make_rng(2025);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  int checked = 0;
  while (checked < 100) {
    const ContactMode mode = sample_contact_mode(scene(), rng);
    Vec6 s;
    for (int k = 0; k < 6; ++k) s(k) = uniform(rng, scene().box_lower(k), scene().box_upper(k));
    if (degenerate(scene(), s)) continue;
    ContactMode m = mode;
    m.poa.clear();
    m.force.clear();
    for (int k = 0; k < mode.arity(); ++k) {
      m.poa.push_back(s.tail<3>() + 0.1 * Vec3(n01(rng), n01(rng), n01(rng)));
      m.force.push_back(Vec3(n01(rng), n01(rng), n01(rng)));
    }
    const ConstraintSpec cs = build_constraints(scene(), mode);
    worst = std::max(worst, jacobian_error(cs, pack_decision(s, m)));
    ++checked;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d points, worst relative error %.3g", checked, worst);
  return {worst < 1e-4, buf};
}

Verdict criterion_3() {
  const StateDataset& ds = states_1000();
  char buf[128];
  std::snprintf(buf, sizeof(buf), "rate %.4f over %ld attempts", ds.stats.feasibility_rate,
                ds.stats.attempts);
  const bool ok = ds.stats.attempts >= 1000 && ds.stats.feasibility_rate >= 0.30 &&
                  ds.stats.feasibility_rate <= 0.85;
  return {ok, buf};
}

Verdict criterion_4() {
  ContactMode mode;
  mode.supports = {3};
  const ConstraintSpec cs = build_constraints(scene(), mode);
  Vec6 s_bar;
  s_bar << 0.8, 0.8, 0.4, 0.5, 0.5, 0.12;
  const NLPResult res = solve_proximal(cs, s_bar);
  ContactMode out;
  unpack_decision(cs, res.z, nullptr, &out);
  const double weight = scene().object_mass * 9.81;
  const double rel = std::abs(out.force[0].norm() - weight) / weight;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "feasible %d, |f| = %.9f N vs %.9f N, relative %.2g",
                res.feasible ? 1 : 0, out.force[0].norm(), weight, rel);
  return {res.feasible && rel <= 1e-6, buf};
}

Verdict criterion_5() {
  const SimParams params;
  const StateDataset& ds = states_1000();
  Rng rng = make_rng(2026);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  int used = 0;
  while (used < 100) {
    const DynState start = DynState::at_rest(ds.samples[uniform_index(rng, 1000)].s);
    VecX x(ControlSpline::kParamDim);
    for (int k = 0; k < x.size(); ++k) x(k) = 0.05 * n01(rng);
    const ControlSpline sp = ControlSpline::from_offsets(start.ref, x);
    const auto actions = compile_to_actions(sp, start, params);
    // Only splines an agent could issue count.
    if (max_action_magnitude(actions) > params.action_limit) continue;
    const auto direct = rollout_spline(scene(), params, sp, start);
    const auto replay = replay_actions(scene(), params, actions, start);
    for (std::size_t k = 0; k < direct.size(); ++k) {
      worst = std::max(worst, (direct[k].flatten() - replay[k].flatten()).cwiseAbs().maxCoeff());
    }
    ++used;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d splines, worst coordinate gap %.3g", used, worst);
  return {worst <= 1e-9, buf};
}

Verdict criterion_6() {
  bool monotone = true;
  double f_first = 0.0;
  long evals_first = 0;
  for (int run = 0; run < 5; ++run) {
    CmaOptions opt;
    opt.sigma0 = 0.5;
    opt.budget = 10000;
    opt.seed = 300 + run;
    Rng rng = make_rng(opt.seed, {99});
    VecX x0(12);
    for (int k = 0; k < 12; ++k) x0(k) = uniform(rng, -1, 1);
    const CmaResult res = cma_minimize([](const VecX& x) { return x.squaredNorm(); }, x0, opt);
    for (std::size_t k = 1; k < res.best_history.size(); ++k) {
      monotone = monotone && res.best_history[k] <= res.best_history[k - 1];
    }
    if (run == 0) {
      f_first = res.f_best;
      evals_first = res.n_evals;
    } else {
      f_first = std::max(f_first, res.f_best);
      evals_first = std::max(evals_first, res.n_evals);
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "5 runs, worst f %.3g, most evals %ld, monotone %d", f_first,
                evals_first, monotone ? 1 : 0);
  return {f_first < 1e-8 && evals_first <= 10000 && monotone, buf};
}

Verdict criterion_7() {
  const TrajectoryDataset du = generate_trajectories(scene(), states_1000(), 20, 2027);
  const SimParams params;
  double worst = 0.0;
  for (const auto& rec : du.records) {
    // Replay the compiled actions and measure the goal gap from scratch.
    const auto actions = compile_to_actions(rec.spline, DynState::at_rest(rec.start.s), params);
    const auto path = replay_actions(scene(), params, actions, DynState::at_rest(rec.start.s));
    const VecX d = feature_embed(scene(), rec.goal.s) - feature_embed(scene(), path.back());
    worst = std::max(worst, d.squaredNorm());
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu records, worst recomputed cost %.3g",
                du.records.size(), worst);
  return {du.records.size() == 20 && worst <= 1e-3, buf};
}

Verdict criterion_8() {
  const PhiIndex index = PhiIndex::from_states(scene(), states_1000());
  Rng rng = make_rng(2028);
  int mismatches = 0;
  for (int q = 0; q < 1000; ++q) {
    Vec6 s;
    for (int k = 0; k < 6; ++k) s(k) = uniform(rng, scene().box_lower(k), scene().box_upper(k));
    const VecX x = feature_embed(scene(), s);
    if (index.nearest(x) != index.brute_force_nearest(x)) ++mismatches;
  }
  // Ties: duplicated points resolve to the lower index.
  MatX pts = index.points();
  pts.col(700) = pts.col(200);
  const PhiIndex dup(pts);
  const bool ties = dup.nearest(pts.col(200)) == 200 && dup.brute_force_nearest(pts.col(200)) == 200;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "1000 queries over %d points, %d mismatches, ties %s",
                index.size(), mismatches, ties ? "ok" : "wrong");
  return {mismatches == 0 && ties && index.size() == 1000, buf};
}

Verdict criterion_9() {
  const TrajectoryDataset du = generate_trajectories(scene(), states_1000(), 5, 2029);
  const int draws = 100000, bins = 20;
  const double critical = testutil::chi2_critical_01(bins - 1);
  bool ok = true;
  std::string detail;
  for (double alpha : {0.1, 0.5, 1.0}) {
    Rng rng = make_rng(2029, {static_cast<std::uint64_t>(alpha * 10)});
    std::vector<long> counts(bins, 0);
    int outside = 0;
    for (int k = 0; k < draws; ++k) {
      const StartGoal sg = sample_traj(du, alpha, true, rng);
      const double T = du.records[sg.source].spline.horizon;
      const double lo = (1.0 - alpha) * T;
      if (sg.t < lo || sg.t > T) {
        ++outside;
        continue;
      }
      ++counts[std::min(bins - 1, static_cast<int>((sg.t - lo) / (alpha * T) * bins))];
    }
    const double x2 = testutil::chi2_uniform(counts, draws);
    ok = ok && outside == 0 && x2 < critical;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%salpha %.1f: %d outside, chi2 %.1f", detail.empty() ? "" : "; ",
                  alpha, outside, x2);
    detail += buf;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), " (critical %.1f)", critical);
  return {ok, detail + buf};
}

// ---------------------------------------------------------------------------
// Guided vs baseline at desk scale.

struct DeskScale {
  int states = 2000;
  int trajectories = 200;
  long steps = 200000;
  int seeds = 3;
  long block_steps = 10000;
  long sched_steps = 100000;
  long start_steps = 10000;
  int hidden = 64;
  int encoder_hidden = 64;
  int z_dim = 32;
  int batch_size = 128;
  int eval_episodes = 500;
};

Verdict criterion_10() {
  const DeskScale cfg;
  const auto t0 = Clock::now();
  GuidanceData data;
  data.spec = scene();
  data.states = generate_states(scene(), cfg.states, 1);
  data.trajectories = generate_trajectories(scene(), data.states, cfg.trajectories, 1);
  log_warn("guided-vs-baseline: datasets ready after " + std::to_string(seconds_since(t0)) + " s");

  double mean[2][2] = {{0, 0}, {0, 0}};  // [method][traj, uni]
  const SamplingMethod methods[2] = {SamplingMethod::kTrajSched, SamplingMethod::kBaseline};
  std::string per_seed;
  for (int m = 0; m < 2; ++m) {
    for (int seed = 1; seed <= cfg.seeds; ++seed) {
      TrainingConfig tc;
      tc.method = methods[m];
      tc.seed = static_cast<std::uint64_t>(seed);
      tc.schedule.total_steps = cfg.steps;
      tc.schedule.block_steps = cfg.block_steps;
      tc.schedule.sched_steps = cfg.sched_steps;
      tc.train.start_steps = cfg.start_steps;
      tc.train.hidden = cfg.hidden;
      tc.train.encoder_hidden = cfg.encoder_hidden;
      tc.train.z_dim = cfg.z_dim;
      tc.train.batch_size = cfg.batch_size;
      tc.train.bc_batch_size = cfg.batch_size;
      const TrainingResult res = run_training(tc, data);
      const Policy pi = deterministic_policy(res.nets);
      const double traj = evaluate_policy(scene(), pi, &data.states, &*data.trajectories,
                                          EvalDistribution::kTraj, cfg.eval_episodes, 1000 + seed)
                              .success_rate;
      const double uni = evaluate_policy(scene(), pi, &data.states, nullptr, EvalDistribution::kUni,
                                         cfg.eval_episodes, 2000 + seed)
                             .success_rate;
      mean[m][0] += traj / cfg.seeds;
      mean[m][1] += uni / cfg.seeds;
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%s seed %d: traj %.3f uni %.3f (%.0f s)",
                    method_name(methods[m]).c_str(), seed, traj, uni, seconds_since(t0));
      log_warn(buf);
    }
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "traj success trajSched %.3f vs baseline %.3f; uni success trajSched %.3f vs "
                "baseline %.3f; %.0f s",
                mean[0][0], mean[1][0], mean[0][1], mean[1][1], seconds_since(t0));
  return {mean[0][0] > mean[1][0] && mean[1][1] < mean[0][1], buf};
}

// ---------------------------------------------------------------------------

Verdict criterion_11() {
  const auto root = testutil::scratch_dir("acceptance_determinism");
  TrainConfig small;
  small.hidden = 32;
  small.encoder_hidden = 32;
  small.z_dim = 16;
  small.batch_size = 64;
  small.bc_batch_size = 64;
  small.start_steps = 500;

  std::vector<std::string> names;
  std::vector<std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    const auto dir = root / std::to_string(pass);
    std::filesystem::create_directories(dir);
    const std::string d = dir.string() + "/";
    const StateDataset ds = generate_states(scene(), 60, 31);
    save_states(ds, d + "ds.jsonl");
    const TrajectoryDataset du = generate_trajectories(scene(), ds, 4, 32);
    save_trajectories(du, d + "du.jsonl");
    const auto bc = compile_bc_dataset(du);
    save_bc_dataset(bc, d + "bc.jsonl");

    GuidanceData data{scene(), ds, du, bc};
    TrainingConfig tc;
    tc.method = SamplingMethod::kTrajSchedBC;
    tc.seed = 33;
    tc.train = small;
    tc.schedule.total_steps = 2000;
    tc.schedule.block_steps = 500;
    tc.schedule.sched_steps = 2000;
    const TrainingResult res = run_training(tc, data);
    save_checkpoint(res.nets, tc.train, res.env_steps, d + "ckpt");
    write_text_file(d + "ckpt/metrics.csv", metrics_csv(res.metrics));

    EvalOptions opt;
    opt.workers = pass + 1;
    const EvalReport rep = evaluate_policy(scene(), deterministic_policy(res.nets), &ds, &du,
                                           EvalDistribution::kTraj, 50, 34, opt, "trajSchedBC");
    write_text_file(d + "eval.csv", report_csv(rep));
    write_text_file(d + "eval.csv.episodes.csv", episodes_csv(rep));

    std::vector<std::string> hashes;
    names.clear();
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      names.push_back(std::filesystem::relative(e.path(), dir).string());
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) hashes.push_back(n + ":" + file_hash(d + n));
    if (pass == 0) {
      first = hashes;
    } else if (hashes != first) {
      return {false, "output files differ between identical runs"};
    }
  }
  return {true, std::to_string(names.size()) + " files byte-identical across two runs"};
}

Verdict criterion_12() {
  const StateDataset ds = generate_states(scene(), 60, 41);
  const TrajectoryDataset du = generate_trajectories(scene(), ds, 4, 42);
  GuidanceData data{scene(), ds, du, compile_bc_dataset(du)};
  TrainingConfig tc;
  tc.seed = 43;
  tc.train.hidden = 32;
  tc.train.encoder_hidden = 32;
  tc.train.z_dim = 16;
  tc.train.batch_size = 64;
  tc.train.bc_batch_size = 64;
  tc.train.start_steps = 200;
  tc.train.lambda_bc = 0.0;
  tc.schedule.total_steps = 1400;
  tc.schedule.block_steps = 500;
  tc.schedule.sched_steps = 2000;
  tc.record_critic_losses = true;
  tc.method = SamplingMethod::kTrajSched;
  const TrainingResult plain = run_training(tc, data);
  tc.method = SamplingMethod::kTrajSchedBC;
  const TrainingResult bc = run_training(tc, data);
  std::size_t first_diff = plain.critic_losses.size();
  for (std::size_t k = 0; k < plain.critic_losses.size(); ++k) {
    if (k >= bc.critic_losses.size() || plain.critic_losses[k] != bc.critic_losses[k]) {
      first_diff = k;
      break;
    }
  }
  const bool same = first_diff == plain.critic_losses.size() &&
                    bc.critic_losses.size() == plain.critic_losses.size();
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu critic losses compared, %s", plain.critic_losses.size(),
                same ? "all identical" : ("first difference at update " + std::to_string(first_diff + 1)).c_str());
  return {same && plain.critic_losses.size() >= 1000, buf};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> skip, only;
  app.add_option("--skip", skip, "Criteria to skip");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  set_log_level(LogLevel::kWarn);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"constraint validity", criterion_1},
      {"jacobian suite", criterion_2},
      {"sampler feasibility rate", criterion_3},
      {"static-equilibrium oracle", criterion_4},
      {"spline round trip", criterion_5},
      {"cma-es sanity", criterion_6},
      {"trajectory admission", criterion_7},
      {"kd-tree exactness", criterion_8},
      {"schedule law", criterion_9},
      {"guided vs baseline ordering", criterion_10},
      {"determinism", criterion_11},
      {"bc isolation", criterion_12},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (std::find(skip.begin(), skip.end(), id) != skip.end()) continue;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %2d %-28s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id,
                criteria[k].first.c_str(), v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
