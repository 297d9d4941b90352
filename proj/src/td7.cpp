#include "sgrl/td7.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sgrl/io.hpp"

namespace sgrl {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ConfigError("gamma must lie in [0, 1)");
  }
  if (expl_noise < 0.0 || target_noise < 0.0 || noise_clip < 0.0) {
    throw ConfigError("noise scales must be non-negative");
  }
  if (policy_delay < 1 || batch_size < 1 || bc_batch_size < 1 || target_update_interval < 1) {
    throw ConfigError("policy delay, batch sizes and target interval must be positive");
  }
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (lambda_bc < 0.0) throw ConfigError("lambda_bc must be non-negative");
  if (hidden < 1 || encoder_hidden < 1 || z_dim < 1) throw ConfigError("layer sizes must be positive");
  if (replay_capacity < batch_size) throw ConfigError("replay capacity is below the batch size");
  if (start_steps < 0) throw ConfigError("start_steps must be non-negative");
  if (!(huber_delta > 0.0)) throw ConfigError("huber_delta must be positive");
}

namespace {

constexpr int kActDim = 3;

MatF vcat(const MatF& a, const MatF& b) {
  MatF out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

}  // namespace

MatF Encoder::zsa(const MatF& zs, const MatF& a) const { return g.forward(vcat(zs, a)); }

Networks make_networks(const TrainConfig& cfg, std::uint64_t seed, double action_limit) {
  cfg.validate();
  if (!(action_limit > 0.0)) throw ConfigError("action limit must be positive");
  Rng rng = make_rng(seed, Stream::kInit);
  const int z = cfg.z_dim;
  const int eh = cfg.encoder_hidden;
  const int h = cfg.hidden;
  Networks n;
  n.encoder.f = Mlp<float>({kObsDim, eh, eh, z}, OutputActivation::kLinear, rng);
  n.encoder.g = Mlp<float>({z + kActDim, eh, eh, z}, OutputActivation::kLinear, rng);
  n.actor = Mlp<float>({kObsDim + z, h, h, kActDim}, OutputActivation::kTanh, rng);
  n.critic1 = Mlp<float>({kObsDim + kActDim + 2 * z, h, h, 1}, OutputActivation::kLinear, rng);
  n.critic2 = Mlp<float>({kObsDim + kActDim + 2 * z, h, h, 1}, OutputActivation::kLinear, rng);
  n.fixed_encoder = n.encoder;
  n.fixed_encoder_target = n.encoder;
  n.actor_target = n.actor;
  n.critic1_target = n.critic1;
  n.critic2_target = n.critic2;
  n.opt_f = Adam<float>(n.encoder.f, cfg.lr);
  n.opt_g = Adam<float>(n.encoder.g, cfg.lr);
  n.opt_actor = Adam<float>(n.actor, cfg.lr);
  n.opt_critic1 = Adam<float>(n.critic1, cfg.lr);
  n.opt_critic2 = Adam<float>(n.critic2, cfg.lr);
  n.action_limit = action_limit;
  n.z_dim = z;
  return n;
}

MatF to_float(const Observation& obs) { return obs.cast<float>(); }

MatF actor_input(const MatF& obs, const MatF& zs) { return vcat(obs, zs); }

MatF critic_input(const MatF& obs, const MatF& a, const MatF& zs, const MatF& zsa) {
  MatF out(obs.rows() + a.rows() + zs.rows() + zsa.rows(), obs.cols());
  out << obs, a, zs, zsa;
  return out;
}

MatF policy(const Networks& nets, const MatF& obs) {
  const MatF zs = nets.fixed_encoder.zs(obs);
  return nets.actor.forward(actor_input(obs, zs));
}

Vec3 act(const Networks& nets, const Observation& obs, double noise_scale, Rng& rng,
         double noise_clip) {
  const MatF a = policy(nets, to_float(obs));
  Vec3 out = a.col(0).cast<double>();
  if (noise_scale > 0.0) {
    std::normal_distribution<double> normal(0.0, noise_scale);
    for (int k = 0; k < kActDim; ++k) {
      out(k) += std::clamp(normal(rng), -noise_clip, noise_clip);
    }
  }
  return out.cwiseMax(-1.0).cwiseMin(1.0) * nets.action_limit;
}

ReplayBuffer::ReplayBuffer(long capacity, int obs_dim, int action_dim)
    : capacity_(capacity),
      obs_(obs_dim, capacity),
      action_(action_dim, capacity),
      reward_(1, capacity),
      next_obs_(obs_dim, capacity),
      not_done_(1, capacity) {
  if (capacity < 1) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::add(const Observation& obs, const Vec3& action_normalized, double reward,
                       const Observation& next_obs, bool terminated) {
  obs_.col(next_) = obs.cast<float>();
  action_.col(next_) = action_normalized.cast<float>();
  reward_(0, next_) = static_cast<float>(reward);
  next_obs_.col(next_) = next_obs.cast<float>();
  not_done_(0, next_) = terminated ? 0.0f : 1.0f;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Batch ReplayBuffer::gather(const std::vector<long>& idx) const {
  const long b = static_cast<long>(idx.size());
  Batch out{MatF(obs_.rows(), b), MatF(action_.rows(), b), MatF(1, b),
            MatF(obs_.rows(), b), MatF(1, b)};
  for (long k = 0; k < b; ++k) {
    const long i = idx[k];
    if (i < 0 || i >= size_) throw ConfigError("replay index out of range");
    out.obs.col(k) = obs_.col(i);
    out.action.col(k) = action_.col(i);
    out.reward(0, k) = reward_(0, i);
    out.next_obs.col(k) = next_obs_.col(i);
    out.not_done(0, k) = not_done_(0, i);
  }
  return out;
}

Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (size_ < 1) throw ConfigError("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<long> pick(0, size_ - 1);
  std::vector<long> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return gather(idx);
}

MatF td_targets(const Networks& nets, const Batch& batch, const TrainConfig& cfg, Rng& rng) {
  const MatF zs = nets.fixed_encoder_target.zs(batch.next_obs);
  MatF a = nets.actor_target.forward(actor_input(batch.next_obs, zs));
  std::normal_distribution<double> normal(0.0, cfg.target_noise);
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double eps = cfg.target_noise > 0.0
                             ? std::clamp(normal(rng), -cfg.noise_clip, cfg.noise_clip)
                             : 0.0;
      a(r, c) = std::clamp(a(r, c) + static_cast<float>(eps), -1.0f, 1.0f);
    }
  }
  const MatF zsa = nets.fixed_encoder_target.zsa(zs, a);
  const MatF x = critic_input(batch.next_obs, a, zs, zsa);
  const MatF q = nets.critic1_target.forward(x).cwiseMin(nets.critic2_target.forward(x));
  const MatF q_clipped = q.cwiseMax(nets.min_target).cwiseMin(nets.max_target);
  const float gamma = static_cast<float>(cfg.gamma);
  return batch.reward + gamma * batch.not_done.cwiseProduct(q_clipped);
}

BCData make_bc_data(const std::vector<BCTriple>& triples, const SimParams& params) {
  BCData d{MatF(kObsDim, static_cast<long>(triples.size())),
           MatF(kActDim, static_cast<long>(triples.size()))};
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const Vec3 goal = object_position(triples[k].goal.s);
    d.obs.col(k) = observe(triples[k].state, goal, params).cast<float>();
    d.action.col(k) = (triples[k].action / params.action_limit).cast<float>();
  }
  return d;
}

ActorObjective actor_objective(const Networks& nets, const MatF& obs, const MatF* bc_obs,
                               const MatF* bc_action, double lambda, Mlp<float>::Grads* grads) {
  ActorObjective out;
  const long b = obs.cols();
  const int z = nets.z_dim;
  const int obs_dim = static_cast<int>(obs.rows());

  Mlp<float>::Cache ca, cg, cc;
  const MatF zs = nets.fixed_encoder.zs(obs);
  const MatF pi = nets.actor.forward(actor_input(obs, zs), &ca);
  const MatF zsa = nets.fixed_encoder.g.forward(vcat(zs, pi), &cg);
  const MatF q = nets.critic1.forward(critic_input(obs, pi, zs, zsa), &cc);
  out.q_term = -q.cast<double>().mean();
  if (grads) {
    const MatF dq = MatF::Constant(1, b, -1.0f / static_cast<float>(b));
    const MatF dx = nets.critic1.backward(cc, dq, nullptr);
    MatF dpi = dx.middleRows(obs_dim, kActDim);
    const MatF dg = nets.fixed_encoder.g.backward(cg, dx.middleRows(obs_dim + kActDim + z, z), nullptr);
    dpi += dg.middleRows(z, kActDim);
    nets.actor.backward(ca, dpi, grads);
  }

  if (bc_obs && bc_action && lambda != 0.0) {
    Mlp<float>::Cache cb;
    const MatF zb = nets.fixed_encoder.zs(*bc_obs);
    const MatF pb = nets.actor.forward(actor_input(*bc_obs, zb), &cb);
    const MatF err = pb - *bc_action;
    const long nb = bc_obs->cols();
    const double mse = err.cast<double>().colwise().squaredNorm().mean();
    out.bc_term = lambda * mse;
    if (grads) {
      const float scale = static_cast<float>(2.0 * lambda / static_cast<double>(nb));
      nets.actor.backward(cb, scale * err, grads);
    }
  }
  out.total = out.q_term + out.bc_term;
  return out;
}

ActorObjective bc_actor_objective(const Networks& nets, const BCData& batch, double lambda) {
  if (batch.size() < 1) throw ConfigError("BC batch is empty");
  return actor_objective(nets, batch.obs, &batch.obs, &batch.action, lambda);
}

namespace {

double update_encoder(Networks& nets, const Batch& batch) {
  const int z = nets.z_dim;
  const MatF target = nets.encoder.zs(batch.next_obs);
  Mlp<float>::Cache cf, cg;
  const MatF h = nets.encoder.f.forward(batch.obs, &cf);
  const MatF zs = avg_l1_norm(h);
  const MatF pred = nets.encoder.g.forward(vcat(zs, batch.action), &cg);
  const MatF err = pred - target;
  const double loss = err.cast<double>().squaredNorm() / static_cast<double>(err.size());
  const MatF dpred = (2.0f / static_cast<float>(err.size())) * err;
  auto gg = nets.encoder.g.zero_grads();
  const MatF dg_in = nets.encoder.g.backward(cg, dpred, &gg);
  auto gf = nets.encoder.f.zero_grads();
  const MatF dh = avg_l1_norm_backward<float>(h, dg_in.topRows(z));
  nets.encoder.f.backward(cf, dh, &gf);
  nets.opt_g.step(nets.encoder.g, gg);
  nets.opt_f.step(nets.encoder.f, gf);
  return loss;
}

double update_critic(Mlp<float>& critic, Adam<float>& opt, const MatF& x, const MatF& y,
                     double delta) {
  Mlp<float>::Cache cache;
  const MatF q = critic.forward(x, &cache);
  const MatF e = q - y;
  const float d = static_cast<float>(delta);
  double loss = 0.0;
  MatF grad(1, e.cols());
  const float inv_b = 1.0f / static_cast<float>(e.cols());
  for (Eigen::Index k = 0; k < e.cols(); ++k) {
    const float v = e(0, k);
    const float a = std::abs(v);
    loss += a <= d ? 0.5 * double(v) * v : double(d) * (a - 0.5 * d);
    grad(0, k) = std::clamp(v, -d, d) * inv_b;
  }
  auto g = critic.zero_grads();
  critic.backward(cache, grad, &g);
  opt.step(critic, g);
  return loss / static_cast<double>(e.cols());
}

}  // namespace

LossReport td_update(Networks& nets, const ReplayBuffer& buffer, const TrainConfig& cfg,
                     Rng& rng, const BCData* bc, Rng* bc_rng) {
  if (buffer.size() < cfg.batch_size) throw ConfigError("replay buffer smaller than one batch");
  ++nets.updates;
  LossReport rep;
  const Batch batch = buffer.sample(cfg.batch_size, rng);

  rep.encoder_loss = update_encoder(nets, batch);

  const MatF y = td_targets(nets, batch, cfg, rng);
  nets.observed_max = std::max(nets.observed_max, y.maxCoeff());
  nets.observed_min = std::min(nets.observed_min, y.minCoeff());
  const MatF zs = nets.fixed_encoder.zs(batch.obs);
  const MatF zsa = nets.fixed_encoder.zsa(zs, batch.action);
  const MatF x = critic_input(batch.obs, batch.action, zs, zsa);
  rep.critic_loss = update_critic(nets.critic1, nets.opt_critic1, x, y, cfg.huber_delta) +
                    update_critic(nets.critic2, nets.opt_critic2, x, y, cfg.huber_delta);

  if (nets.updates % cfg.policy_delay == 0) {
    auto grads = nets.actor.zero_grads();
    const bool use_bc = bc && bc_rng && cfg.lambda_bc > 0.0 && bc->size() > 0;
    MatF bo, ba;
    if (use_bc) {
      std::uniform_int_distribution<long> pick(0, bc->size() - 1);
      bo.resize(bc->obs.rows(), cfg.bc_batch_size);
      ba.resize(bc->action.rows(), cfg.bc_batch_size);
      for (int k = 0; k < cfg.bc_batch_size; ++k) {
        const long i = pick(*bc_rng);
        bo.col(k) = bc->obs.col(i);
        ba.col(k) = bc->action.col(i);
      }
    }
    const ActorObjective obj = actor_objective(nets, batch.obs, use_bc ? &bo : nullptr,
                                               use_bc ? &ba : nullptr, cfg.lambda_bc, &grads);
    nets.opt_actor.step(nets.actor, grads);
    rep.actor_updated = true;
    rep.actor_loss = obj.total;
  }

  if (nets.updates % cfg.target_update_interval == 0) {
    nets.actor_target = nets.actor;
    nets.critic1_target = nets.critic1;
    nets.critic2_target = nets.critic2;
    nets.fixed_encoder_target = nets.fixed_encoder;
    nets.fixed_encoder = nets.encoder;
    nets.max_target = nets.observed_max;
    nets.min_target = nets.observed_min;
    rep.targets_refreshed = true;
  }

  if (!std::isfinite(rep.critic_loss) || !std::isfinite(rep.encoder_loss) ||
      !std::isfinite(rep.actor_loss) || !nets.actor.all_finite() || !nets.critic1.all_finite()) {
    std::ostringstream os;
    os << "non-finite training state at update " << nets.updates
       << ": critic_loss=" << rep.critic_loss << " encoder_loss=" << rep.encoder_loss
       << " actor_loss=" << rep.actor_loss << " reward_mean=" << batch.reward.mean()
       << " target_range=[" << nets.min_target << ", " << nets.max_target << "]";
    throw TrainingDivergedError(os.str());
  }
  return rep;
}

namespace {

const char kMagic[8] = {'S', 'G', 'R', 'L', 'N', 'E', 'T', '1'};

std::vector<const Mlp<float>*> all_nets(const Networks& n) {
  return {&n.encoder.f, &n.encoder.g, &n.fixed_encoder.f, &n.fixed_encoder.g,
          &n.fixed_encoder_target.f, &n.fixed_encoder_target.g, &n.actor, &n.actor_target,
          &n.critic1, &n.critic2, &n.critic1_target, &n.critic2_target};
}

std::vector<Mlp<float>*> all_nets(Networks& n) {
  return {&n.encoder.f, &n.encoder.g, &n.fixed_encoder.f, &n.fixed_encoder.g,
          &n.fixed_encoder_target.f, &n.fixed_encoder_target.g, &n.actor, &n.actor_target,
          &n.critic1, &n.critic2, &n.critic1_target, &n.critic2_target};
}

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t* pos) {
  if (*pos + sizeof(T) > buf.size()) throw ConfigError("truncated network file");
  T v;
  std::memcpy(&v, buf.data() + *pos, sizeof(T));
  *pos += sizeof(T);
  return v;
}

json config_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"expl_noise", c.expl_noise},
          {"target_noise", c.target_noise},
          {"noise_clip", c.noise_clip},
          {"policy_delay", c.policy_delay},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"lambda_bc", c.lambda_bc},
          {"target_update_interval", c.target_update_interval},
          {"hidden", c.hidden},
          {"encoder_hidden", c.encoder_hidden},
          {"z_dim", c.z_dim},
          {"replay_capacity", c.replay_capacity},
          {"start_steps", c.start_steps},
          {"bc_batch_size", c.bc_batch_size},
          {"huber_delta", c.huber_delta}};
}

TrainConfig config_from(const json& j) {
  TrainConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.expl_noise = j.at("expl_noise").get<double>();
  c.target_noise = j.at("target_noise").get<double>();
  c.noise_clip = j.at("noise_clip").get<double>();
  c.policy_delay = j.at("policy_delay").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.lambda_bc = j.at("lambda_bc").get<double>();
  c.target_update_interval = j.at("target_update_interval").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.encoder_hidden = j.at("encoder_hidden").get<int>();
  c.z_dim = j.at("z_dim").get<int>();
  c.replay_capacity = j.at("replay_capacity").get<long>();
  c.start_steps = j.at("start_steps").get<long>();
  c.bc_batch_size = j.at("bc_batch_size").get<int>();
  c.huber_delta = j.at("huber_delta").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const Networks& nets, const TrainConfig& cfg, long env_steps,
                     const std::string& dir, const std::string& extra_json) {
  std::filesystem::create_directories(dir);
  std::string buf(kMagic, sizeof(kMagic));
  const auto list = all_nets(nets);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(list.size()));
  for (const Mlp<float>* m : list) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(m->sizes().size()));
    for (int s : m->sizes()) put<std::int32_t>(buf, s);
    put<std::uint8_t>(buf, m->output_activation() == OutputActivation::kTanh ? 1 : 0);
    const Eigen::VectorXf p = m->flat_params();
    buf.append(reinterpret_cast<const char*>(p.data()), sizeof(float) * p.size());
  }
  write_text_file(dir + "/networks.bin", buf);

  json meta;
  meta["format"] = "sgrl.checkpoint";
  meta["version"] = 1;
  meta["train_config"] = config_json(cfg);
  meta["env_steps"] = env_steps;
  meta["updates"] = nets.updates;
  meta["action_limit"] = nets.action_limit;
  meta["z_dim"] = nets.z_dim;
  meta["min_target"] = nets.min_target;
  meta["max_target"] = nets.max_target;
  meta["observed_min"] = nets.observed_min;
  meta["observed_max"] = nets.observed_max;
  meta["extra"] = json::parse(extra_json);
  write_text_file(dir + "/config.json", meta.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
  Checkpoint ck;
  json meta;
  try {
    meta = json::parse(read_text_file(dir + "/config.json"));
  } catch (const json::exception& e) {
    throw ConfigError("malformed checkpoint config in '" + dir + "': " + e.what());
  }
  if (meta.value("format", "") != "sgrl.checkpoint") {
    throw ConfigError("'" + dir + "' is not a checkpoint directory");
  }
  try {
    ck.cfg = config_from(meta.at("train_config"));
    ck.env_steps = meta.at("env_steps").get<long>();
    ck.extra_json = meta.at("extra").dump();
    ck.nets.updates = meta.at("updates").get<long>();
    ck.nets.action_limit = meta.at("action_limit").get<double>();
    ck.nets.z_dim = meta.at("z_dim").get<int>();
    ck.nets.min_target = meta.at("min_target").get<float>();
    ck.nets.max_target = meta.at("max_target").get<float>();
    ck.nets.observed_min = meta.at("observed_min").get<float>();
    ck.nets.observed_max = meta.at("observed_max").get<float>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed checkpoint config in '" + dir + "': " + e.what());
  }

  const std::string buf = read_text_file(dir + "/networks.bin");
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("'" + dir + "/networks.bin' is not a network file");
  }
  std::size_t pos = sizeof(kMagic);
  const auto list = all_nets(ck.nets);
  if (take<std::uint32_t>(buf, &pos) != list.size()) throw ConfigError("network count mismatch");
  Rng dummy = make_rng(0);
  for (Mlp<float>* m : list) {
    const auto n = take<std::uint32_t>(buf, &pos);
    std::vector<int> sizes(n);
    for (auto& s : sizes) s = take<std::int32_t>(buf, &pos);
    const auto out = take<std::uint8_t>(buf, &pos) ? OutputActivation::kTanh : OutputActivation::kLinear;
    *m = Mlp<float>(sizes, out, dummy);
    Eigen::VectorXf p(m->num_params());
    const std::size_t bytes = sizeof(float) * p.size();
    if (pos + bytes > buf.size()) throw ConfigError("truncated network file");
    std::memcpy(p.data(), buf.data() + pos, bytes);
    pos += bytes;
    m->set_flat_params(p);
  }
  ck.nets.opt_f = Adam<float>(ck.nets.encoder.f, ck.cfg.lr);
  ck.nets.opt_g = Adam<float>(ck.nets.encoder.g, ck.cfg.lr);
  ck.nets.opt_actor = Adam<float>(ck.nets.actor, ck.cfg.lr);
  ck.nets.opt_critic1 = Adam<float>(ck.nets.critic1, ck.cfg.lr);
  ck.nets.opt_critic2 = Adam<float>(ck.nets.critic2, ck.cfg.lr);
  return ck;
}

}  // namespace sgrl
