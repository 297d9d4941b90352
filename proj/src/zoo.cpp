#include "sgrl/zoo.hpp"

#include <chrono>
#include <sstream>

#include "json_util.hpp"
#include "sgrl/io.hpp"
#include "sgrl/log.hpp"
#include "sgrl/parallel.hpp"

namespace sgrl {

using detail::json;

TrajectoryCost trajectory_cost(const SceneSpec& spec, const SimParams& params,
                               const StaticConfig& s, const StaticConfig& g,
                               const ControlSpline& sp, double divergence_penalty) {
  TrajectoryCost out;
  const DynState start = DynState::at_rest(s.s);
  try {
    out.path = rollout_spline(spec, params, sp, start);
  } catch (const SimulationDivergedError&) {
    out.diverged = true;
    out.cost = divergence_penalty;
    return out;
  }
  out.cost = (feature_embed(spec, g.s) - feature_embed(spec, out.path.back())).squaredNorm();
  return out;
}

TrajectoryOutcome optimize_trajectory(const SceneSpec& spec, const StaticConfig& s,
                                      const StaticConfig& g, std::uint64_t seed,
                                      const ZooOptions& options) {
  const Vec3 q0 = robot_position(s.s);
  const DynState rest = DynState::at_rest(s.s);
  auto objective = [&](const VecX& x) {
    const ControlSpline sp = ControlSpline::from_offsets(q0, x);
    const double excess =
        max_action_magnitude(compile_to_actions(sp, rest, options.sim)) - options.sim.action_limit;
    const double barrier = excess > 0.0 ? options.action_barrier * (1.0 + excess) : 0.0;
    return trajectory_cost(spec, options.sim, s, g, sp, options.divergence_penalty).cost + barrier;
  };
  CmaOptions cma = options.cma;
  cma.seed = seed;
  cma.f_target = options.epsilon;
  const CmaResult res = cma_minimize(objective, VecX::Zero(ControlSpline::kParamDim), cma);

  TrajectoryOutcome out;
  out.best_cost = res.f_best;
  out.n_evals = res.n_evals;
  if (!(res.f_best <= options.epsilon)) {
    out.reason = "terminal cost " + std::to_string(res.f_best) + " above threshold (" +
                 res.stop_reason + ")";
    return out;
  }
  TrajectoryRecord& rec = out.record;
  rec.start = s;
  rec.goal = g;
  rec.spline = ControlSpline::from_offsets(q0, res.x_best);
  TrajectoryCost tc = trajectory_cost(spec, options.sim, s, g, rec.spline,
                                      options.divergence_penalty);
  rec.path = std::move(tc.path);
  rec.terminal_cost = tc.cost;
  rec.n_evals = res.n_evals;

  const auto actions = compile_to_actions(rec.spline, rec.path.front(), options.sim);
  const double amax = max_action_magnitude(actions);
  if (amax > options.sim.action_limit) {
    out.reason = "action limit exceeded (" + std::to_string(amax) + " m)";
    return out;
  }
  const double dev = replay_deviation(spec, options.sim, rec);
  if (!(dev <= 1e-9)) {
    out.reason = "action replay deviates by " + std::to_string(dev);
    return out;
  }
  out.feasible = true;
  return out;
}

TrajectoryDataset generate_trajectories(const SceneSpec& spec, const StateDataset& ds,
                                        int count, std::uint64_t seed,
                                        const ZooOptions& options) {
  if (count < 1) throw ConfigError("trajectory count must be at least 1");
  if (ds.samples.size() < 2) throw ConfigError("need at least two states to pair");
  std::vector<int> goals;
  for (std::size_t k = 0; k < ds.samples.size(); ++k) {
    if (!is_excluded_goal(spec, ds.samples[k].mode, options.goal_filter)) {
      goals.push_back(static_cast<int>(k));
    }
  }
  if (goals.empty()) throw ConfigError("no state qualifies as a goal under the goal filter");

  const auto t0 = std::chrono::steady_clock::now();
  TrajectoryDataset du;
  du.scene_hash = scene_hash(spec);
  du.epsilon = options.epsilon;
  du.seed = seed;
  const long budget = options.max_attempts_per_record * count;
  const int n_states = static_cast<int>(ds.samples.size());
  const int chunk = std::max(1, options.workers);

  long next = 0;
  while (static_cast<int>(du.records.size()) < count && next < budget) {
    const long end = std::min(budget, next + chunk);
    std::vector<TrajectoryOutcome> outcomes(end - next);
    parallel_for(next, end, options.workers, [&](long a) {
      Rng rng = make_rng(seed, Stream::kPairs, static_cast<std::uint64_t>(a));
      const StaticConfig& s = ds.samples[uniform_index(rng, n_states)];
      const StaticConfig& g = ds.samples[goals[uniform_index(rng, static_cast<int>(goals.size()))]];
      const std::uint64_t cma_seed = make_rng(seed, Stream::kInit, static_cast<std::uint64_t>(a))();
      outcomes[a - next] = optimize_trajectory(spec, s, g, cma_seed, options);
      outcomes[a - next].record.attempt = a;
    });
    for (long a = next; a < end; ++a) {
      TrajectoryOutcome& o = outcomes[a - next];
      ++du.stats.attempts;
      du.stats.evals_total += o.n_evals;
      if (o.feasible) {
        du.records.push_back(std::move(o.record));
        if (static_cast<int>(du.records.size()) == count) break;
      } else if (o.best_cost <= options.epsilon) {
        ++du.stats.rejected_action_limit;
        log_info("attempt " + std::to_string(a) + " rejected: " + o.reason);
      }
    }
    next = end;
  }
  du.complete = static_cast<int>(du.records.size()) == count;
  if (!du.complete) {
    log_warn("trajectory budget exhausted with " + std::to_string(du.records.size()) + " of " +
             std::to_string(count) + " records");
  }
  du.stats.feasible = static_cast<long>(du.records.size());
  du.stats.feasibility_rate =
      du.stats.attempts > 0 ? double(du.stats.feasible) / double(du.stats.attempts) : 0.0;
  du.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return du;
}

double recompute_terminal_cost(const SceneSpec& spec, const TrajectoryRecord& rec) {
  if (rec.path.empty()) throw ConfigError("trajectory record has no path");
  return (feature_embed(spec, rec.goal.s) - feature_embed(spec, rec.path.back())).squaredNorm();
}

double replay_deviation(const SceneSpec& spec, const SimParams& params,
                        const TrajectoryRecord& rec) {
  const auto actions = compile_to_actions(rec.spline, rec.path.front(), params);
  const auto replay = replay_actions(spec, params, actions, rec.path.front());
  if (replay.size() != rec.path.size()) throw ConfigError("path length mismatch");
  double dev = 0.0;
  for (std::size_t k = 0; k < replay.size(); ++k) {
    dev = std::max(dev, (replay[k].flatten() - rec.path[k].flatten()).cwiseAbs().maxCoeff());
  }
  return dev;
}

namespace {

json state_to_json(const DynState& x) { return detail::to_array(x.flatten()); }

DynState state_from_json(const json& j) {
  return DynState::unflatten(detail::from_array(j, DynState::kFlatSize));
}

json spline_theta(const ControlSpline& sp) {
  json a = json::array();
  for (const auto& t : sp.theta) {
    for (int k = 0; k < 3; ++k) a.push_back(t(k));
  }
  return a;
}

}  // namespace

void save_trajectories(const TrajectoryDataset& du, const std::string& path) {
  std::ostringstream os;
  json header;
  header["format"] = "sgrl.trajectories";
  header["version"] = 1;
  header["scene_hash"] = du.scene_hash;
  header["epsilon"] = du.epsilon;
  header["seed"] = du.seed;
  header["count"] = du.records.size();
  header["complete"] = du.complete;
  header["stats"] = {{"attempts", du.stats.attempts},
                     {"feasible", du.stats.feasible},
                     {"rejected_action_limit", du.stats.rejected_action_limit},
                     {"evals_total", du.stats.evals_total},
                     {"feasibility_rate", du.stats.feasibility_rate}};
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < du.records.size(); ++i) {
    const TrajectoryRecord& r = du.records[i];
    json rec;
    rec["index"] = i;
    rec["attempt"] = r.attempt;
    rec["s"] = detail::config_to_json(r.start);
    rec["g"] = detail::config_to_json(r.goal);
    rec["horizon"] = r.spline.horizon;
    rec["theta"] = spline_theta(r.spline);
    json p = json::array();
    for (const auto& x : r.path) p.push_back(state_to_json(x));
    rec["path"] = p;
    rec["terminal_cost"] = r.terminal_cost;
    rec["n_evals"] = r.n_evals;
    os << rec.dump() << '\n';
  }
  write_text_file(path, os.str());
}

TrajectoryDataset load_trajectories(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ConfigError("'" + path + "' is empty");
  const json header = detail::parse_line(lines.front(), path);
  detail::expect_format(header, "sgrl.trajectories", path);
  TrajectoryDataset du;
  try {
    du.scene_hash = header.at("scene_hash").get<std::string>();
    du.epsilon = header.at("epsilon").get<double>();
    du.seed = header.at("seed").get<std::uint64_t>();
    du.complete = header.at("complete").get<bool>();
    const auto& st = header.at("stats");
    du.stats.attempts = st.at("attempts").get<long>();
    du.stats.feasible = st.at("feasible").get<long>();
    du.stats.rejected_action_limit = st.at("rejected_action_limit").get<long>();
    du.stats.evals_total = st.at("evals_total").get<long>();
    du.stats.feasibility_rate = st.at("feasibility_rate").get<double>();
    for (std::size_t k = 1; k < lines.size(); ++k) {
      const json j = detail::parse_line(lines[k], path);
      TrajectoryRecord r;
      r.attempt = j.at("attempt").get<long>();
      r.start = detail::config_from_json(j.at("s"));
      r.goal = detail::config_from_json(j.at("g"));
      const VecX theta = detail::from_array(j.at("theta"), ControlSpline::kParamDim);
      const Vec3 q0 = robot_position(r.start.s);
      r.spline = ControlSpline::hold(q0, j.at("horizon").get<double>());
      for (int m = 0; m < ControlSpline::kKnots; ++m) r.spline.theta[m] = theta.segment<3>(3 * m);
      for (const auto& x : j.at("path")) r.path.push_back(state_from_json(x));
      r.terminal_cost = j.at("terminal_cost").get<double>();
      r.n_evals = j.at("n_evals").get<long>();
      du.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed trajectories file '" + path + "': " + e.what());
  }
  return du;
}

std::vector<BCTriple> compile_bc_dataset(const TrajectoryDataset& du, const SimParams& params) {
  std::vector<BCTriple> out;
  for (std::size_t i = 0; i < du.records.size(); ++i) {
    const TrajectoryRecord& r = du.records[i];
    const auto actions = compile_to_actions(r.spline, r.path.front(), params);
    if (actions.size() + 1 != r.path.size()) {
      throw ConfigError("record " + std::to_string(i) + " path does not match its spline");
    }
    for (std::size_t t = 0; t < actions.size(); ++t) {
      BCTriple b;
      b.trajectory = static_cast<int>(i);
      b.step = static_cast<int>(t);
      b.state = r.path[t];
      b.goal = r.goal;
      b.action = actions[t];
      out.push_back(std::move(b));
    }
  }
  return out;
}

void save_bc_dataset(const std::vector<BCTriple>& bc, const std::string& path) {
  std::ostringstream os;
  json header;
  header["format"] = "sgrl.bc";
  header["version"] = 1;
  header["count"] = bc.size();
  os << header.dump() << '\n';
  for (const auto& b : bc) {
    json rec;
    rec["trajectory"] = b.trajectory;
    rec["step"] = b.step;
    rec["state"] = state_to_json(b.state);
    rec["g"] = detail::config_to_json(b.goal);
    rec["a"] = detail::to_array(b.action);
    os << rec.dump() << '\n';
  }
  write_text_file(path, os.str());
}

std::vector<BCTriple> load_bc_dataset(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ConfigError("'" + path + "' is empty");
  detail::expect_format(detail::parse_line(lines.front(), path), "sgrl.bc", path);
  std::vector<BCTriple> out;
  try {
    for (std::size_t k = 1; k < lines.size(); ++k) {
      const json j = detail::parse_line(lines[k], path);
      BCTriple b;
      b.trajectory = j.at("trajectory").get<int>();
      b.step = j.at("step").get<int>();
      b.state = state_from_json(j.at("state"));
      b.goal = detail::config_from_json(j.at("g"));
      b.action = detail::from_array(j.at("a"), 3);
      out.push_back(std::move(b));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed BC file '" + path + "': " + e.what());
  }
  return out;
}

}  // namespace sgrl
