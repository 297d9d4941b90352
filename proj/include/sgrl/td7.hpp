#pragma once

#include <string>
#include <vector>

#include "sgrl/mlp.hpp"
#include "sgrl/sim.hpp"
#include "sgrl/zoo.hpp"

namespace sgrl {

using MatF = Eigen::MatrixXf;

struct TrainConfig {
  double gamma = 0.95;
  /// Noise scales are in normalized action units (action / action_limit).
  double expl_noise = 0.05;
  double target_noise = 0.1;
  double noise_clip = 0.25;
  int policy_delay = 2;
  int batch_size = 256;
  double lr = 3e-4;
  double lambda_bc = 0.3;
  /// Gradient steps between fixed-checkpoint target refreshes.
  int target_update_interval = 250;
  int hidden = 256;
  int encoder_hidden = 256;
  int z_dim = 64;
  long replay_capacity = 1000000;
  /// Environment steps with uniformly random actions before learning starts.
  long start_steps = 25000;
  int bc_batch_size = 256;
  double huber_delta = 1.0;

  void validate() const;
};

/// State embedding f and state-action predictor g.
struct Encoder {
  Mlp<float> f;  // obs -> z (normalized by avg_l1_norm)
  Mlp<float> g;  // [z, a] -> z

  MatF zs(const MatF& obs) const { return avg_l1_norm(f.forward(obs)); }
  MatF zsa(const MatF& zs, const MatF& a) const;
};

struct Networks {
  Encoder encoder;
  Encoder fixed_encoder;
  Encoder fixed_encoder_target;
  Mlp<float> actor;
  Mlp<float> actor_target;
  Mlp<float> critic1;
  Mlp<float> critic2;
  Mlp<float> critic1_target;
  Mlp<float> critic2_target;

  Adam<float> opt_f;
  Adam<float> opt_g;
  Adam<float> opt_actor;
  Adam<float> opt_critic1;
  Adam<float> opt_critic2;

  /// Value clipping range used by the targets and the running extremes that
  /// replace it at every target refresh.
  float min_target = 0.0f;
  float max_target = 0.0f;
  float observed_min = 1e8f;
  float observed_max = -1e8f;

  long updates = 0;
  double action_limit = 0.1;
  int z_dim = 64;
};

Networks make_networks(const TrainConfig& cfg, std::uint64_t seed, double action_limit);

MatF to_float(const Observation& obs);

/// Actor input [obs, z_s].
MatF actor_input(const MatF& obs, const MatF& zs);
/// Critic input [obs, a, z_s, z_sa].
MatF critic_input(const MatF& obs, const MatF& a, const MatF& zs, const MatF& zsa);

/// Normalized deterministic action for a batch of observations.
MatF policy(const Networks& nets, const MatF& obs);

/// pi(obs) plus N(0, noise_scale) noise clipped to noise_clip, clipped to the
/// action box and scaled to meters. noise_scale = 0 draws nothing.
Vec3 act(const Networks& nets, const Observation& obs, double noise_scale, Rng& rng,
         double noise_clip = 0.25);

struct Batch {
  MatF obs;
  MatF action;  // normalized
  MatF reward;  // 1 x B
  MatF next_obs;
  MatF not_done;  // 0 only for terminated transitions
};

class ReplayBuffer {
 public:
  ReplayBuffer(long capacity, int obs_dim = kObsDim, int action_dim = 3);

  /// `terminated` is true only when the episode ended at the goal; time-limit
  /// truncations keep bootstrapping.
  void add(const Observation& obs, const Vec3& action_normalized, double reward,
           const Observation& next_obs, bool terminated);
  Batch sample(int batch_size, Rng& rng) const;
  Batch gather(const std::vector<long>& indices) const;

  long size() const { return size_; }
  long capacity() const { return capacity_; }

 private:
  long capacity_;
  long size_ = 0;
  long next_ = 0;
  MatF obs_, action_, reward_, next_obs_, not_done_;
};

/// r + gamma * not_done * clip(min(Q1', Q2'), min_target, max_target) with
/// target-policy smoothing noise drawn from rng.
MatF td_targets(const Networks& nets, const Batch& batch, const TrainConfig& cfg, Rng& rng);

/// Behavior-cloning examples in network units.
struct BCData {
  MatF obs;
  MatF action;  // normalized

  long size() const { return obs.cols(); }
};

BCData make_bc_data(const std::vector<BCTriple>& triples, const SimParams& params);

struct ActorObjective {
  double total = 0.0;
  double q_term = 0.0;   // mean of -Q1
  double bc_term = 0.0;  // lambda times mean squared action error
};

/// mean(-Q1(E, pi)) over `obs` plus lambda mean ||pi - a||^2 over the BC
/// examples. Accumulates actor gradients when `grads` is given.
ActorObjective actor_objective(const Networks& nets, const MatF& obs, const MatF* bc_obs,
                               const MatF* bc_action, double lambda,
                               Mlp<float>::Grads* grads = nullptr);

/// The regularized objective evaluated on one batch of triples.
ActorObjective bc_actor_objective(const Networks& nets, const BCData& batch, double lambda);

struct LossReport {
  double critic_loss = 0.0;
  double encoder_loss = 0.0;
  bool actor_updated = false;
  double actor_loss = 0.0;
  bool targets_refreshed = false;
};

/// One gradient step: encoder, twin critics, and (every policy_delay steps)
/// the actor. BC examples enter only when bc is given and lambda_bc > 0; they
/// are drawn from bc_rng so the replay stream is unaffected.
LossReport td_update(Networks& nets, const ReplayBuffer& buffer, const TrainConfig& cfg,
                     Rng& rng, const BCData* bc = nullptr, Rng* bc_rng = nullptr);

void save_checkpoint(const Networks& nets, const TrainConfig& cfg, long env_steps,
                     const std::string& dir, const std::string& extra_json = "{}");
struct Checkpoint {
  Networks nets;
  TrainConfig cfg;
  long env_steps = 0;
  std::string extra_json;
};
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace sgrl
