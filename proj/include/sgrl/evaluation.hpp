#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sgrl/guidance.hpp"

namespace sgrl {

enum class EvalDistribution { kUni, kWoBalance, kTraj };

std::string distribution_name(EvalDistribution d);
/// Accepts uni, wo-balance (or wo_balance) and traj.
EvalDistribution parse_distribution(const std::string& name);

struct EpisodeOutcome {
  bool success = false;
  bool diverged = false;
  int steps = 0;
  int source = -1;
  int goal_index = -1;
};

struct EvalReport {
  std::string method;
  EvalDistribution distribution = EvalDistribution::kUni;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<EpisodeOutcome> outcomes;
};

using Policy = std::function<Vec3(const Observation&)>;

/// Noise-free policy of trained networks.
Policy deterministic_policy(const Networks& nets);

struct EvalOptions {
  SimParams sim;
  int time_limit_steps = 40;
  int workers = 1;
};

/// Episode e draws its (s, g) pair from (seed, e) alone, so the report does
/// not depend on the worker count.
EvalReport evaluate_policy(const SceneSpec& spec, const Policy& policy, const StateDataset* ds,
                           const TrajectoryDataset* du, EvalDistribution dist, int episodes,
                           std::uint64_t seed, const EvalOptions& options = {},
                           const std::string& method = "");

std::string report_table(const EvalReport& r);
std::string report_csv(const EvalReport& r);
std::string episodes_csv(const EvalReport& r);

}  // namespace sgrl
