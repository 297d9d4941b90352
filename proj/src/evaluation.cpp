#include "sgrl/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "sgrl/parallel.hpp"

namespace sgrl {

std::string distribution_name(EvalDistribution d) {
  switch (d) {
    case EvalDistribution::kUni:
      return "uni";
    case EvalDistribution::kWoBalance:
      return "wo-balance";
    case EvalDistribution::kTraj:
      return "traj";
  }
  return "unknown";
}

EvalDistribution parse_distribution(const std::string& name) {
  if (name == "uni") return EvalDistribution::kUni;
  if (name == "wo-balance" || name == "wo_balance") return EvalDistribution::kWoBalance;
  if (name == "traj") return EvalDistribution::kTraj;
  throw ConfigError("unknown evaluation distribution '" + name + "'");
}

Policy deterministic_policy(const Networks& nets) {
  return [&nets](const Observation& obs) {
    Rng unused = make_rng(0);
    return act(nets, obs, 0.0, unused);
  };
}

EvalReport evaluate_policy(const SceneSpec& spec, const Policy& policy, const StateDataset* ds,
                           const TrajectoryDataset* du, EvalDistribution dist, int episodes,
                           std::uint64_t seed, const EvalOptions& options,
                           const std::string& method) {
  if (episodes < 1) throw ConfigError("episode count must be at least 1");
  std::vector<int> goals;
  if (dist == EvalDistribution::kTraj) {
    if (!du || du->records.empty()) {
      throw ConfigError("distribution traj needs a trajectory dataset");
    }
  } else {
    if (!ds || ds->samples.empty()) {
      throw ConfigError("distribution " + distribution_name(dist) + " needs a state dataset");
    }
    GoalFilter rule{true, dist == EvalDistribution::kWoBalance};
    goals = goal_indices(spec, *ds, rule);
    if (goals.empty()) throw ConfigError("no state qualifies as an evaluation goal");
  }

  EvalReport rep;
  rep.method = method;
  rep.distribution = dist;
  rep.episodes = episodes;
  rep.seed = seed;
  rep.outcomes.resize(episodes);
  parallel_for(0, episodes, options.workers, [&](long e) {
    Rng rng = make_rng(seed, Stream::kEval, static_cast<std::uint64_t>(e));
    const StartGoal sg = dist == EvalDistribution::kTraj
                             ? sample_traj(*du, 1.0, false, rng, options.sim.step_duration)
                             : sample_baseline(*ds, goals, rng);
    Env env(spec, options.sim);
    env.set_time_limit(options.time_limit_steps);
    Observation obs = env.reset(sg.start, Vec3(object_position(sg.goal.s)));
    EpisodeOutcome& out = rep.outcomes[e];
    out.source = sg.source;
    out.goal_index = sg.goal_index;
    for (;;) {
      const StepResult r = env.step(policy(obs));
      obs = r.obs;
      ++out.steps;
      if (r.terminated) {
        out.success = true;
        break;
      }
      if (r.truncated) {
        out.diverged = r.diverged;
        break;
      }
    }
  });
  for (const auto& o : rep.outcomes) rep.successes += o.success ? 1 : 0;
  rep.success_rate = static_cast<double>(rep.successes) / static_cast<double>(episodes);
  return rep;
}

std::string report_table(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%-14s %-12s %9s %10s %12s %8s\n%-14s %-12s %9d %10d %12.4f %8llu\n", "method",
                "distribution", "episodes", "successes", "success_rate", "seed",
                r.method.empty() ? "-" : r.method.c_str(), distribution_name(r.distribution).c_str(),
                r.episodes, r.successes, r.success_rate,
                static_cast<unsigned long long>(r.seed));
  return buf;
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "method,distribution,episodes,successes,success_rate,seed\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%.17g,%llu\n", r.method.c_str(),
                distribution_name(r.distribution).c_str(), r.episodes, r.successes,
                r.success_rate, static_cast<unsigned long long>(r.seed));
  os << buf;
  return os.str();
}

std::string episodes_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "episode,source,goal_index,success,diverged,steps\n";
  for (std::size_t e = 0; e < r.outcomes.size(); ++e) {
    const auto& o = r.outcomes[e];
    os << e << ',' << o.source << ',' << o.goal_index << ',' << (o.success ? 1 : 0) << ','
       << (o.diverged ? 1 : 0) << ',' << o.steps << '\n';
  }
  return os.str();
}

}  // namespace sgrl
