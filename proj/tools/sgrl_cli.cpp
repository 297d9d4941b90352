// Command-line driver for the sampling, trajectory, training and evaluation stages.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgrl/evaluation.hpp"
#include "sgrl/io.hpp"
#include "sgrl/log.hpp"

namespace {

using namespace sgrl;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw UsageError(msg);
}

void write_timing(const std::string& out, const json& timing) {
  write_text_file(out + ".timing.json", timing.dump(2) + "\n");
}

json read_timing(const std::string& path) {
  const std::string side = path + ".timing.json";
  if (!std::filesystem::exists(side)) return json::object();
  try {
    return json::parse(read_text_file(side));
  } catch (const json::exception&) {
    return json::object();
  }
}

struct Common {
  int workers = 1;
  bool verbose = false;
};

int cmd_scene(const std::string& out) {
  save_scene(default_double_sphere_scene(), out);
  std::printf("wrote default double-sphere scene to %s\n", out.c_str());
  return 0;
}

int cmd_sample_states(const std::string& scene, int num, std::uint64_t seed,
                      const std::string& out, const Common& c) {
  require(num >= 1, "--num must be at least 1");
  const SceneSpec spec = load_scene(scene);
  SamplerOptions opt;
  opt.workers = c.workers;
  const StateDataset ds = generate_states(spec, num, seed, opt);
  save_states(ds, out);
  write_timing(out, {{"wall_time_s", ds.wall_time},
                     {"time_per_sample_s", ds.samples.empty() ? 0.0 : ds.wall_time / ds.samples.size()}});
  std::printf("%zu states (%s), feasibility rate %.4f, %.1f evals/sample, %.2f s\n",
              ds.samples.size(), ds.complete ? "complete" : "partial", ds.stats.feasibility_rate,
              ds.stats.evals_per_sample, ds.wall_time);
  return ds.complete ? 0 : kExitRuntime;
}

int cmd_optimize(const std::string& scene, const std::string& states, int num,
                 std::uint64_t seed, const std::string& out, const Common& c) {
  require(num >= 1, "--num must be at least 1");
  const SceneSpec spec = load_scene(scene);
  const StateDataset ds = load_states(states);
  if (ds.scene_hash != scene_hash(spec)) {
    throw ConfigError("states file was generated for a different scene");
  }
  ZooOptions opt;
  opt.workers = c.workers;
  const TrajectoryDataset du = generate_trajectories(spec, ds, num, seed, opt);
  save_trajectories(du, out);
  const double per_run = du.stats.attempts > 0 ? du.wall_time / du.stats.attempts : 0.0;
  write_timing(out, {{"wall_time_s", du.wall_time}, {"time_per_run_s", per_run}});
  std::printf("%zu trajectories (%s), feasibility rate %.4f, %.2f s per run, %.2f s total\n",
              du.records.size(), du.complete ? "complete" : "partial", du.stats.feasibility_rate,
              per_run, du.wall_time);
  return du.complete ? 0 : kExitRuntime;
}

int cmd_compile_bc(const std::string& traj, const std::string& out) {
  const TrajectoryDataset du = load_trajectories(traj);
  const auto bc = compile_bc_dataset(du);
  save_bc_dataset(bc, out);
  std::printf("%zu behavior-cloning triples from %zu trajectories\n", bc.size(), du.records.size());
  return 0;
}

struct TrainFlags {
  std::string scene, method, states, trajectories, bc, out;
  long steps = 0;
  std::uint64_t seed = 0;
  long block_steps = 100000;
  long sched_steps = 1000000;
  long start_steps = -1;
  int hidden = 256;
  int encoder_hidden = 256;
  int z_dim = 64;
  int batch_size = 256;
  double lambda_bc = 0.3;
  bool record_losses = false;
};

int cmd_train(const TrainFlags& f) {
  const SamplingMethod method = [&] {
    try {
      return parse_method(f.method);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }();
  require(f.steps >= 1, "--steps must be at least 1");
  require(!uses_trajectories(method) || !f.trajectories.empty(),
          "--method " + f.method + " requires --trajectories");

  GuidanceData data;
  data.spec = load_scene(f.scene);
  data.states = load_states(f.states);
  if (!f.trajectories.empty()) data.trajectories = load_trajectories(f.trajectories);
  if (method == SamplingMethod::kTrajSchedBC) {
    data.bc = f.bc.empty() ? compile_bc_dataset(*data.trajectories) : load_bc_dataset(f.bc);
  }

  TrainingConfig cfg;
  cfg.method = method;
  cfg.seed = f.seed;
  cfg.schedule.total_steps = f.steps;
  cfg.schedule.block_steps = f.block_steps;
  cfg.schedule.sched_steps = f.sched_steps;
  cfg.train.hidden = f.hidden;
  cfg.train.encoder_hidden = f.encoder_hidden;
  cfg.train.z_dim = f.z_dim;
  cfg.train.batch_size = f.batch_size;
  cfg.train.bc_batch_size = f.batch_size;
  cfg.train.lambda_bc = f.lambda_bc;
  if (f.start_steps >= 0) cfg.train.start_steps = f.start_steps;
  cfg.record_critic_losses = f.record_losses;

  const TrainingResult res = run_training(cfg, data);
  const json extra = {{"method", method_name(method)},
                      {"seed", f.seed},
                      {"scene_hash", scene_hash(data.spec)},
                      {"block_steps", f.block_steps},
                      {"sched_steps", f.sched_steps},
                      {"episodes", res.episodes}};
  save_checkpoint(res.nets, cfg.train, res.env_steps, f.out, extra.dump());
  save_scene(data.spec, f.out + "/scene.json");
  write_text_file(f.out + "/metrics.csv", metrics_csv(res.metrics));
  if (f.record_losses) {
    std::ostringstream os;
    os << "update,critic_loss\n";
    char buf[64];
    for (std::size_t k = 0; k < res.critic_losses.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", k + 1, res.critic_losses[k]);
      os << buf;
    }
    write_text_file(f.out + "/critic_losses.csv", os.str());
  }
  const BlockMetrics& last = res.metrics.back();
  std::printf("trained %s for %ld steps (%ld episodes); last block success %.3f\n",
              method_name(method).c_str(), res.env_steps, res.episodes, last.success_rate);
  return 0;
}

int cmd_evaluate(const std::string& ckpt_dir, const std::string& dist_name, int episodes,
                 std::uint64_t seed, const std::string& out, const std::string& states,
                 const std::string& traj, const Common& c) {
  const EvalDistribution dist = [&] {
    try {
      return parse_distribution(dist_name);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }();
  require(episodes >= 1, "--episodes must be at least 1");
  require(dist != EvalDistribution::kTraj || !traj.empty(),
          "--distribution traj requires --trajectories");
  require(dist == EvalDistribution::kTraj || !states.empty(),
          "--distribution " + dist_name + " requires --states");

  const Checkpoint ck = load_checkpoint(ckpt_dir);
  const SceneSpec spec = load_scene(ckpt_dir + "/scene.json");
  std::optional<StateDataset> ds;
  std::optional<TrajectoryDataset> du;
  if (!states.empty()) ds = load_states(states);
  if (!traj.empty()) du = load_trajectories(traj);
  std::string method;
  try {
    method = json::parse(ck.extra_json).value("method", "");
  } catch (const json::exception&) {
  }
  EvalOptions opt;
  opt.workers = c.workers;
  const EvalReport rep = evaluate_policy(spec, deterministic_policy(ck.nets), ds ? &*ds : nullptr,
                                         du ? &*du : nullptr, dist, episodes, seed, opt, method);
  write_text_file(out, report_csv(rep));
  write_text_file(out + ".episodes.csv", episodes_csv(rep));
  std::cout << report_table(rep);
  return 0;
}

int cmd_stats(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ConfigError("'" + path + "' is empty");
  json header;
  try {
    header = json::parse(lines.front());
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "' has no readable header: " + e.what());
  }
  const std::string format = header.value("format", "");
  const json timing = read_timing(path);
  if (format == "sgrl.states") {
    const StateDataset ds = load_states(path);
    std::printf("dataset           states\n");
    std::printf("samples           %zu%s\n", ds.samples.size(), ds.complete ? "" : " (partial)");
    std::printf("attempts          %ld\n", ds.stats.attempts);
    std::printf("feasibility_rate  %.6f\n", ds.stats.feasibility_rate);
    std::printf("evals_per_sample  %.3f\n", ds.stats.evals_per_sample);
  } else if (format == "sgrl.trajectories") {
    const TrajectoryDataset du = load_trajectories(path);
    std::printf("dataset           trajectories\n");
    std::printf("records           %zu%s\n", du.records.size(), du.complete ? "" : " (partial)");
    std::printf("attempts          %ld\n", du.stats.attempts);
    std::printf("feasibility_rate  %.6f\n", du.stats.feasibility_rate);
    std::printf("evals_per_run     %.1f\n",
                du.stats.attempts > 0 ? double(du.stats.evals_total) / du.stats.attempts : 0.0);
    std::printf("rejected_limit    %ld\n", du.stats.rejected_action_limit);
  } else {
    throw ConfigError("'" + path + "' is not a states or trajectories file");
  }
  if (timing.contains("wall_time_s")) {
    std::printf("time_s            %.3f\n", timing["wall_time_s"].get<double>());
  }
  if (timing.contains("time_per_run_s")) {
    std::printf("time_per_run_s    %.3f\n", timing["time_per_run_s"].get<double>());
  }
  if (timing.contains("time_per_sample_s")) {
    std::printf("time_per_sample_s %.5f\n", timing["time_per_sample_s"].get<double>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample-guided reinforcement learning for double-sphere manipulation"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--workers", common.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", common.verbose, "Log progress to stderr");

  std::string scene_out;
  auto* scene = app.add_subcommand("scene", "Write the default scene file");
  scene->add_option("--out", scene_out)->required();

  std::string scene_path, states_path, traj_path, out_path;
  int num = 0;
  std::uint64_t seed = 0;
  auto* ss = app.add_subcommand("sample-states", "Sample feasible static configurations");
  ss->add_option("--scene", scene_path)->required();
  ss->add_option("--num", num)->required();
  ss->add_option("--seed", seed)->required();
  ss->add_option("--out", out_path)->required();

  auto* ot = app.add_subcommand("optimize-trajectories", "Optimize spline trajectories between states");
  ot->add_option("--scene", scene_path)->required();
  ot->add_option("--states", states_path)->required();
  ot->add_option("--num", num)->required();
  ot->add_option("--seed", seed)->required();
  ot->add_option("--out", out_path)->required();

  auto* cb = app.add_subcommand("compile-bc", "Compile trajectories into (state, goal, action) triples");
  cb->add_option("--trajectories", traj_path)->required();
  cb->add_option("--out", out_path)->required();

  TrainFlags tf;
  auto* tr = app.add_subcommand("train", "Train a goal-conditioned policy");
  tr->add_option("--scene", tf.scene)->required();
  tr->add_option("--method", tf.method, "traj|trajSched|trajSchedBC|interp|interpSched|baseline")
      ->required();
  tr->add_option("--states", tf.states)->required();
  tr->add_option("--trajectories", tf.trajectories);
  tr->add_option("--bc", tf.bc, "Behavior-cloning file (default: compiled from --trajectories)");
  tr->add_option("--steps", tf.steps)->required();
  tr->add_option("--seed", tf.seed)->required();
  tr->add_option("--out", tf.out)->required();
  tr->add_option("--block-steps", tf.block_steps);
  tr->add_option("--sched-steps", tf.sched_steps);
  tr->add_option("--start-steps", tf.start_steps);
  tr->add_option("--hidden", tf.hidden);
  tr->add_option("--encoder-hidden", tf.encoder_hidden);
  tr->add_option("--z-dim", tf.z_dim);
  tr->add_option("--batch-size", tf.batch_size);
  tr->add_option("--lambda-bc", tf.lambda_bc);
  tr->add_flag("--record-critic-losses", tf.record_losses);

  std::string ckpt, dist;
  int episodes = 0;
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt)->required();
  ev->add_option("--distribution", dist, "uni|wo-balance|traj")->required();
  ev->add_option("--episodes", episodes)->required();
  ev->add_option("--seed", seed)->required();
  ev->add_option("--out", out_path)->required();
  ev->add_option("--states", states_path);
  ev->add_option("--trajectories", traj_path);

  std::string dataset;
  auto* st = app.add_subcommand("stats", "Print dataset generation metrics");
  st->add_option("--dataset", dataset)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  set_log_level(common.verbose ? LogLevel::kInfo : LogLevel::kWarn);

  try {
    if (*scene) return cmd_scene(scene_out);
    if (*ss) return cmd_sample_states(scene_path, num, seed, out_path, common);
    if (*ot) return cmd_optimize(scene_path, states_path, num, seed, out_path, common);
    if (*cb) return cmd_compile_bc(traj_path, out_path);
    if (*tr) return cmd_train(tf);
    if (*ev) {
      return cmd_evaluate(ckpt, dist, episodes, seed, out_path, states_path, traj_path, common);
    }
    if (*st) return cmd_stats(dataset);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
