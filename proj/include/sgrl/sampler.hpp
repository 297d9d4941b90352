#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgrl/nlp.hpp"
#include "sgrl/random.hpp"

namespace sgrl {

/// Arity ~ U{1,2,3}, then a uniform subset of that size from the support set.
ContactMode sample_contact_mode(const SceneSpec& spec, Rng& rng);

struct SamplerStats {
  long attempts = 0;
  long feasible = 0;
  long evals_total = 0;
  double feasibility_rate = 0.0;
  double evals_per_sample = 0.0;
};

struct StateDataset {
  std::vector<StaticConfig> samples;
  std::string scene_hash;
  std::uint64_t seed = 0;
  bool complete = true;
  SamplerStats stats;
  /// Seconds spent generating; kept out of the dataset file.
  double wall_time = 0.0;
};

struct SamplerOptions {
  ALParams al;
  int workers = 1;
  long max_attempts_per_sample = 1000;
  /// Attempts dispatched per parallel round; results merge by attempt index.
  int chunk = 64;
};

/// One proximal projection attempt; returns true and fills `out` when the
/// result passes independent re-validation.
bool sample_state_attempt(const SceneSpec& spec, std::uint64_t seed, long attempt,
                          const ALParams& al, StaticConfig* out, int* n_evals);

StateDataset generate_states(const SceneSpec& spec, int count, std::uint64_t seed,
                             const SamplerOptions& options = {});

struct GoalFilter {
  bool exclude_on_table_only = false;
  bool exclude_robot_balance = false;
};

/// Filter used for training goals: trivial on-table goals are excluded.
inline GoalFilter training_goal_filter() { return {true, false}; }

/// Floor shape id, or -1 when the scene has none.
int floor_id(const SceneSpec& spec);
bool is_excluded_goal(const SceneSpec& spec, const ContactMode& mode, GoalFilter rule);
StateDataset filter_goals(const SceneSpec& spec, const StateDataset& ds, GoalFilter rule);

void save_states(const StateDataset& ds, const std::string& path);
StateDataset load_states(const std::string& path);

}  // namespace sgrl
