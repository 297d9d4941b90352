#include "sgrl/guidance.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sgrl/log.hpp"

namespace sgrl {

namespace {

struct MethodEntry {
  SamplingMethod method;
  const char* name;
};

constexpr MethodEntry kMethods[] = {
    {SamplingMethod::kTraj, "traj"},
    {SamplingMethod::kTrajSched, "trajSched"},
    {SamplingMethod::kTrajSchedBC, "trajSchedBC"},
    {SamplingMethod::kInterp, "interp"},
    {SamplingMethod::kInterpSched, "interpSched"},
    {SamplingMethod::kBaseline, "baseline"},
};

}  // namespace

std::string method_name(SamplingMethod m) {
  for (const auto& e : kMethods) {
    if (e.method == m) return e.name;
  }
  return "unknown";
}

SamplingMethod parse_method(const std::string& name) {
  for (const auto& e : kMethods) {
    if (name == e.name) return e.method;
  }
  throw ConfigError("unknown sampling method '" + name + "'");
}

bool is_scheduled(SamplingMethod m) {
  return m == SamplingMethod::kTrajSched || m == SamplingMethod::kTrajSchedBC ||
         m == SamplingMethod::kInterpSched;
}

bool uses_trajectories(SamplingMethod m) {
  return m == SamplingMethod::kTraj || m == SamplingMethod::kTrajSched ||
         m == SamplingMethod::kTrajSchedBC;
}

bool uses_interpolation(SamplingMethod m) {
  return m == SamplingMethod::kInterp || m == SamplingMethod::kInterpSched;
}

void Schedule::validate() const {
  if (total_steps < 1 || block_steps < 1 || sched_steps < 1) {
    throw ConfigError("schedule lengths must be positive");
  }
  if (!(alpha_min >= 0.0 && alpha_min <= 1.0)) throw ConfigError("alpha_min must lie in [0, 1]");
}

double Schedule::alpha(long t, bool scheduled) const {
  if (!scheduled) return 1.0;
  const double psi = static_cast<double>(t + block_steps) / static_cast<double>(sched_steps);
  return std::clamp(psi, alpha_min, 1.0);
}

StartGoal sample_traj(const TrajectoryDataset& du, double alpha, bool scheduled, Rng& rng,
                      double step_duration) {
  if (du.records.empty()) throw ConfigError("trajectory dataset is empty");
  const int i = uniform_index(rng, static_cast<int>(du.records.size()));
  const TrajectoryRecord& rec = du.records[i];
  const double T = rec.spline.horizon;
  const double lo = scheduled ? (1.0 - alpha) * T : 0.0;
  const double t = uniform(rng, lo, T);
  assert(t >= lo && t <= T);
  const long last = static_cast<long>(rec.path.size()) - 1;
  const long k = std::clamp(std::lround(t / step_duration), 0L, last);
  StartGoal sg;
  sg.start = rec.path[k];
  sg.goal = rec.goal;
  sg.source = i;
  sg.t = t;
  return sg;
}

StartGoal sample_interp(const SceneSpec& spec, const StateDataset& ds, const PhiIndex& index,
                        const std::vector<int>& goals, double alpha, bool scheduled, Rng& rng) {
  if (ds.samples.empty() || goals.empty()) throw ConfigError("state dataset is empty");
  const int a = uniform_index(rng, static_cast<int>(ds.samples.size()));
  const int g = goals[uniform_index(rng, static_cast<int>(goals.size()))];
  const double lo = scheduled ? 1.0 - alpha : 0.0;
  const double t = uniform(rng, lo, 1.0);
  assert(t >= lo && t <= 1.0);
  const Vec6 point = (1.0 - t) * ds.samples[a].s + t * ds.samples[g].s;
  const int s = index.nearest(feature_embed(spec, point));
  StartGoal sg;
  sg.start = DynState::at_rest(ds.samples[s].s);
  sg.goal = ds.samples[g];
  sg.source = s;
  sg.goal_index = g;
  sg.t = t;
  return sg;
}

StartGoal sample_baseline(const StateDataset& ds, const std::vector<int>& goals, Rng& rng) {
  if (ds.samples.empty() || goals.empty()) throw ConfigError("state dataset is empty");
  const int s = uniform_index(rng, static_cast<int>(ds.samples.size()));
  const int g = goals[uniform_index(rng, static_cast<int>(goals.size()))];
  StartGoal sg;
  sg.start = DynState::at_rest(ds.samples[s].s);
  sg.goal = ds.samples[g];
  sg.source = s;
  sg.goal_index = g;
  return sg;
}

std::vector<int> goal_indices(const SceneSpec& spec, const StateDataset& ds, GoalFilter rule) {
  std::vector<int> out;
  for (std::size_t k = 0; k < ds.samples.size(); ++k) {
    if (!is_excluded_goal(spec, ds.samples[k].mode, rule)) out.push_back(static_cast<int>(k));
  }
  return out;
}

int time_limit(double alpha, SamplingMethod method, double base_T, double step_duration) {
  const double a = is_scheduled(method) ? alpha : 1.0;
  if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  return std::max(1, static_cast<int>(std::ceil(2.0 * a * base_T / step_duration - 1e-9)));
}

void validate_training(const TrainingConfig& cfg, const GuidanceData& data) {
  cfg.schedule.validate();
  cfg.train.validate();
  cfg.sim.validate();
  if (cfg.batch_pairs < 1) throw ConfigError("start/goal batch size must be positive");
  if (data.states.samples.empty()) throw ConfigError("training needs a state dataset");
  const std::string name = method_name(cfg.method);
  if (uses_trajectories(cfg.method) &&
      (!data.trajectories || data.trajectories->records.empty())) {
    throw ConfigError("method " + name + " needs a trajectory dataset");
  }
  if (uses_trajectories(cfg.method)) {
    for (const auto& rec : data.trajectories->records) {
      if (is_excluded_goal(data.spec, rec.goal.mode, cfg.goal_filter)) {
        throw ConfigError("trajectory dataset contains a goal excluded by the goal filter");
      }
    }
  }
  if (cfg.method == SamplingMethod::kTrajSchedBC && data.bc.empty()) {
    throw ConfigError("method trajSchedBC needs behavior-cloning data");
  }
  if (cfg.method == SamplingMethod::kTrajSchedBC && cfg.train.lambda_bc == 0.0) {
    log_warn("trajSchedBC with lambda_bc = 0 trains like trajSched");
  }
  if (!uses_trajectories(cfg.method) &&
      goal_indices(data.spec, data.states, cfg.goal_filter).empty()) {
    throw ConfigError("no state qualifies as a training goal");
  }
}

StartGoalBatch make_batch(const TrainingConfig& cfg, const GuidanceData& data,
                          const PhiIndex* index, const std::vector<int>& goals, double alpha,
                          long block) {
  StartGoalBatch b;
  b.method = cfg.method;
  b.alpha = alpha;
  b.block = block;
  Rng rng = make_rng(cfg.seed, Stream::kPairs, static_cast<std::uint64_t>(block));
  const bool sched = is_scheduled(cfg.method);
  for (int k = 0; k < cfg.batch_pairs; ++k) {
    if (uses_trajectories(cfg.method)) {
      b.pairs.push_back(sample_traj(*data.trajectories, alpha, sched, rng, cfg.sim.step_duration));
    } else if (uses_interpolation(cfg.method)) {
      b.pairs.push_back(sample_interp(data.spec, data.states, *index, goals, alpha, sched, rng));
    } else {
      b.pairs.push_back(sample_baseline(data.states, goals, rng));
    }
  }
  return b;
}

TrainingResult run_training(const TrainingConfig& cfg, const GuidanceData& data) {
  validate_training(cfg, data);
  const bool sched = is_scheduled(cfg.method);
  const std::vector<int> goals = goal_indices(data.spec, data.states, cfg.goal_filter);
  std::optional<PhiIndex> index;
  if (uses_interpolation(cfg.method)) index = PhiIndex::from_states(data.spec, data.states);
  std::optional<BCData> bc;
  if (cfg.method == SamplingMethod::kTrajSchedBC) bc = make_bc_data(data.bc, cfg.sim);

  TrainingResult res;
  res.nets = make_networks(cfg.train, cfg.seed, cfg.sim.action_limit);
  Networks& nets = res.nets;
  ReplayBuffer buffer(std::min<long>(cfg.train.replay_capacity, cfg.schedule.total_steps));
  Env env(data.spec, cfg.sim);

  Rng reset_rng = make_rng(cfg.seed, Stream::kReset);
  Rng noise_rng = make_rng(cfg.seed, Stream::kNoise);
  Rng batch_rng = make_rng(cfg.seed, Stream::kBatch);
  Rng bc_rng = make_rng(cfg.seed, Stream::kBehaviorClone);
  const double limit = cfg.sim.action_limit;
  const double gamma = cfg.train.gamma;

  StartGoalBatch batch;
  Observation obs;
  bool need_reset = true;
  double ep_return = 0.0;
  int ep_steps = 0;
  BlockMetrics cur;
  long critic_n = 0;
  long actor_n = 0;
  double reward_sum = 0.0;
  long successes = 0;

  for (long t = 0; t < cfg.schedule.total_steps; ++t) {
    if (t % cfg.schedule.block_steps == 0) {
      cur = BlockMetrics{};
      cur.block = t / cfg.schedule.block_steps;
      cur.alpha = cfg.schedule.alpha(t, sched);
      batch = make_batch(cfg, data, index ? &*index : nullptr, goals, cur.alpha, cur.block);
      env.set_time_limit(time_limit(cur.alpha, cfg.method, cfg.base_T, cfg.sim.step_duration));
      critic_n = actor_n = 0;
      reward_sum = 0.0;
      successes = 0;
      need_reset = true;
    }
    if (need_reset) {
      const StartGoal& sg = batch.pairs[uniform_index(reset_rng, static_cast<int>(batch.pairs.size()))];
      obs = env.reset(sg.start, Vec3(object_position(sg.goal.s)));
      ep_return = 0.0;
      ep_steps = 0;
      need_reset = false;
    }

    Vec3 a;
    if (t < cfg.train.start_steps) {
      for (int k = 0; k < 3; ++k) a(k) = uniform(noise_rng, -limit, limit);
    } else {
      a = act(nets, obs, cfg.train.expl_noise, noise_rng, cfg.train.noise_clip);
    }
    const StepResult r = env.step(a);
    buffer.add(obs, a / limit, r.reward, r.obs, r.terminated);
    ep_return += std::pow(gamma, ep_steps) * r.reward;
    ++ep_steps;
    obs = r.obs;
    ++res.env_steps;

    if (t >= cfg.train.start_steps && buffer.size() >= cfg.train.batch_size) {
      const LossReport rep =
          td_update(nets, buffer, cfg.train, batch_rng, bc ? &*bc : nullptr, &bc_rng);
      cur.critic_loss += rep.critic_loss;
      ++critic_n;
      if (rep.actor_updated) {
        cur.actor_loss += rep.actor_loss;
        ++actor_n;
      }
      if (cfg.record_critic_losses) res.critic_losses.push_back(rep.critic_loss);
    }

    if (r.terminated || r.truncated) {
      ++cur.episodes;
      ++res.episodes;
      reward_sum += ep_return;
      if (r.terminated) ++successes;
      need_reset = true;
    }

    const bool block_end =
        (t + 1) % cfg.schedule.block_steps == 0 || t + 1 == cfg.schedule.total_steps;
    if (block_end) {
      cur.step = t + 1;
      if (cur.episodes > 0) {
        cur.avg_episode_reward = reward_sum / static_cast<double>(cur.episodes);
        cur.success_rate = static_cast<double>(successes) / static_cast<double>(cur.episodes);
      }
      cur.critic_loss = critic_n > 0 ? cur.critic_loss / static_cast<double>(critic_n) : 0.0;
      cur.actor_loss = actor_n > 0 ? cur.actor_loss / static_cast<double>(actor_n) : 0.0;
      res.metrics.push_back(cur);
      char line[256];
      std::snprintf(line, sizeof(line),
                    "%s block %ld step %ld alpha %.3f episodes %ld success %.3f critic %.4g",
                    method_name(cfg.method).c_str(), cur.block, cur.step, cur.alpha, cur.episodes,
                    cur.success_rate, cur.critic_loss);
      log_info(line);
    }
  }
  return res;
}

std::string metrics_csv(const std::vector<BlockMetrics>& metrics) {
  std::ostringstream os;
  os << "step,block,alpha,avg_episode_reward,success_rate,critic_loss,actor_loss\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%ld,%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.step, m.block,
                  m.alpha, m.avg_episode_reward, m.success_rate, m.critic_loss, m.actor_loss);
    os << buf;
  }
  return os.str();
}

}  // namespace sgrl
