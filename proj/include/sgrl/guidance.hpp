#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sgrl/kdtree.hpp"
#include "sgrl/td7.hpp"

namespace sgrl {

enum class SamplingMethod { kTraj, kTrajSched, kTrajSchedBC, kInterp, kInterpSched, kBaseline };

std::string method_name(SamplingMethod m);
/// Throws ConfigError on unknown names.
SamplingMethod parse_method(const std::string& name);

bool is_scheduled(SamplingMethod m);
bool uses_trajectories(SamplingMethod m);
bool uses_interpolation(SamplingMethod m);

struct Schedule {
  long total_steps = 2000000;
  long block_steps = 100000;
  long sched_steps = 1000000;
  double alpha_min = 0.1;

  void validate() const;
  /// clip((t + block_steps) / sched_steps, alpha_min, 1) when scheduled, else 1.
  double alpha(long t, bool scheduled) const;
};

/// One episode initialization: a start state (possibly moving) and a goal.
struct StartGoal {
  DynState start;
  StaticConfig goal;
  int source = -1;  // record index (traj) or start-state index
  int goal_index = -1;
  double t = 0.0;   // sampled phase before snapping
};

struct StartGoalBatch {
  std::vector<StartGoal> pairs;
  SamplingMethod method = SamplingMethod::kBaseline;
  double alpha = 1.0;
  long block = 0;
};

/// Record i uniform, t uniform on [0, T] or [(1 - alpha) T, T], start snapped
/// to the nearest stored grid state.
StartGoal sample_traj(const TrajectoryDataset& du, double alpha, bool scheduled, Rng& rng,
                      double step_duration = 0.05);

/// a uniform over ds, g uniform over goal_indices, t uniform on [0, 1] or
/// [1 - alpha, 1]; the start is the dataset state nearest in feature space to
/// (1 - t) a + t g.
StartGoal sample_interp(const SceneSpec& spec, const StateDataset& ds, const PhiIndex& index,
                        const std::vector<int>& goal_indices, double alpha, bool scheduled,
                        Rng& rng);

/// Independent uniform start over ds and goal over goal_indices.
StartGoal sample_baseline(const StateDataset& ds, const std::vector<int>& goal_indices, Rng& rng);

/// Indices of ds whose mode passes the goal filter.
std::vector<int> goal_indices(const SceneSpec& spec, const StateDataset& ds, GoalFilter rule);

/// Scheduled methods: ceil(2 alpha T / step); unscheduled: ceil(2 T / step).
int time_limit(double alpha, SamplingMethod method, double base_T = 1.0,
               double step_duration = 0.05);

struct GuidanceData {
  SceneSpec spec;
  StateDataset states;
  std::optional<TrajectoryDataset> trajectories;
  std::vector<BCTriple> bc;
};

struct TrainingConfig {
  SamplingMethod method = SamplingMethod::kBaseline;
  Schedule schedule;
  TrainConfig train;
  SimParams sim;
  std::uint64_t seed = 0;
  int batch_pairs = 256;
  double base_T = 1.0;
  GoalFilter goal_filter = training_goal_filter();
  /// Keep every update's critic loss in the result.
  bool record_critic_losses = false;
};

struct BlockMetrics {
  long step = 0;
  long block = 0;
  double alpha = 1.0;
  long episodes = 0;
  double avg_episode_reward = 0.0;  // mean discounted return
  double success_rate = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

struct TrainingResult {
  Networks nets;
  std::vector<BlockMetrics> metrics;
  std::vector<double> critic_losses;
  long env_steps = 0;
  long episodes = 0;
};

/// Throws ConfigError when the method's datasets are missing.
void validate_training(const TrainingConfig& cfg, const GuidanceData& data);

/// Resamples a start/goal batch every block, resets episodes from it, and runs
/// one learner update per environment step once start_steps have passed.
TrainingResult run_training(const TrainingConfig& cfg, const GuidanceData& data);

StartGoalBatch make_batch(const TrainingConfig& cfg, const GuidanceData& data,
                          const PhiIndex* index, const std::vector<int>& goals, double alpha,
                          long block);

std::string metrics_csv(const std::vector<BlockMetrics>& metrics);

}  // namespace sgrl
