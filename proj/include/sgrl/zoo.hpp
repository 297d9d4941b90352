#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgrl/cma.hpp"
#include "sgrl/sampler.hpp"
#include "sgrl/spline.hpp"

namespace sgrl {

struct TrajectoryRecord {
  StaticConfig start;
  StaticConfig goal;
  ControlSpline spline;
  /// State snapshots on the step grid, t = 0, 0.05, ..., horizon.
  std::vector<DynState> path;
  double terminal_cost = 0.0;
  long n_evals = 0;
  long attempt = 0;
};

struct TrajectoryStats {
  long attempts = 0;
  long feasible = 0;
  /// Optimizations that reached the threshold but needed actions beyond the limit.
  long rejected_action_limit = 0;
  long evals_total = 0;
  double feasibility_rate = 0.0;
};

struct TrajectoryDataset {
  std::vector<TrajectoryRecord> records;
  std::string scene_hash;
  double epsilon = 1e-3;
  std::uint64_t seed = 0;
  bool complete = true;
  TrajectoryStats stats;
  /// Seconds spent generating; kept out of the dataset file.
  double wall_time = 0.0;
};

struct ZooOptions {
  SimParams sim;
  CmaOptions cma = default_cma();
  double epsilon = 1e-3;
  double divergence_penalty = 1e6;
  /// Added to the search objective (scaled by 1 + excess) when a candidate
  /// needs actions beyond the action limit, so no such candidate can reach epsilon.
  double action_barrier = 1.0;
  GoalFilter goal_filter = training_goal_filter();
  /// Attempt budget of generate_trajectories is this times U.
  long max_attempts_per_record = 200;
  int workers = 1;

  static CmaOptions default_cma() {
    CmaOptions c;
    c.sigma0 = 0.1;
    c.budget = 20000;
    c.stall_generations = 150;
    c.stall_tol = 1e-2;
    return c;
  }
};

struct TrajectoryCost {
  double cost = 0.0;
  bool diverged = false;
  std::vector<DynState> path;
};

/// ||phi(g) - phi(x(T))||^2 for the spline rolled out from s at rest; a
/// diverged rollout costs `divergence_penalty`.
TrajectoryCost trajectory_cost(const SceneSpec& spec, const SimParams& params,
                               const StaticConfig& s, const StaticConfig& g,
                               const ControlSpline& sp, double divergence_penalty = 1e6);

struct TrajectoryOutcome {
  bool feasible = false;
  /// Empty when feasible, otherwise why the pair was not admitted.
  std::string reason;
  double best_cost = 0.0;
  long n_evals = 0;
  TrajectoryRecord record;
};

/// CMA-ES over the 12 knot offsets starting at the hold-position spline.
/// Candidates outside the action limit carry the action barrier.
TrajectoryOutcome optimize_trajectory(const SceneSpec& spec, const StaticConfig& s,
                                      const StaticConfig& g, std::uint64_t seed,
                                      const ZooOptions& options = {});

/// Attempt `a` draws its (s, g) pair and its optimizer seed from (seed, a) only.
TrajectoryDataset generate_trajectories(const SceneSpec& spec, const StateDataset& ds,
                                        int count, std::uint64_t seed,
                                        const ZooOptions& options = {});

/// Recomputes the terminal cost of a record from its stored path.
double recompute_terminal_cost(const SceneSpec& spec, const TrajectoryRecord& rec);

/// Replays the compiled actions and returns the largest coordinate deviation
/// from the stored path.
double replay_deviation(const SceneSpec& spec, const SimParams& params,
                        const TrajectoryRecord& rec);

void save_trajectories(const TrajectoryDataset& du, const std::string& path);
TrajectoryDataset load_trajectories(const std::string& path);

/// One (state, goal, action) example per step of every record.
struct BCTriple {
  int trajectory = 0;
  int step = 0;
  DynState state;
  StaticConfig goal;
  Vec3 action = Vec3::Zero();
};

std::vector<BCTriple> compile_bc_dataset(const TrajectoryDataset& du, const SimParams& params = {});

void save_bc_dataset(const std::vector<BCTriple>& bc, const std::string& path);
std::vector<BCTriple> load_bc_dataset(const std::string& path);

}  // namespace sgrl
