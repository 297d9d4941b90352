#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "sgrl/io.hpp"
#include "sgrl/zoo.hpp"
#include "test_util.hpp"

using namespace sgrl;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(SGRL_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string value_after(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind(key, 0) == 0) {
      std::istringstream ls(line.substr(key.size()));
      std::string v;
      ls >> v;
      return v;
    }
  }
  return "";
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("no-such-command").code, 1);
  EXPECT_EQ(run_cli("sample-states --scene x.json --num 3").code, 1);
  EXPECT_EQ(run_cli("--help").code, 0);
}

TEST(Cli, RuntimeErrorsExitWithTwo) {
  const auto dir = testutil::scratch_dir("cli_errors");
  EXPECT_EQ(run_cli("stats --dataset " + (dir / "missing.jsonl").string()).code, 2);
  std::ofstream(dir / "junk.json") << "{not json";
  const CliRun r = run_cli("sample-states --scene " + (dir / "junk.json").string() +
                        " --num 3 --seed 1 --out " + (dir / "ds.jsonl").string());
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, Pipeline) {
  const auto dir = testutil::scratch_dir("cli_pipeline");
  const std::string d = dir.string() + "/";
  CliRun r = run_cli("scene --out " + d + "scene.json");
  ASSERT_EQ(r.code, 0) << r.out;

  r = run_cli("sample-states --scene " + d + "scene.json --num 100 --seed 3 --out " + d +
              "ds.jsonl");
  ASSERT_EQ(r.code, 0) << r.out;
  r = run_cli("stats --dataset " + d + "ds.jsonl");
  ASSERT_EQ(r.code, 0) << r.out;
  const StateDataset ds = load_states(d + "ds.jsonl");
  EXPECT_EQ(ds.samples.size(), 100u);
  EXPECT_NEAR(std::stod(value_after(r.out, "feasibility_rate")), ds.stats.feasibility_rate, 1e-6);
  EXPECT_FALSE(value_after(r.out, "time_per_sample_s").empty());

  r = run_cli("optimize-trajectories --scene " + d + "scene.json --states " + d +
              "ds.jsonl --num 20 --seed 4 --out " + d + "du.jsonl");
  ASSERT_EQ(r.code, 0) << r.out;
  const TrajectoryDataset du = load_trajectories(d + "du.jsonl");
  EXPECT_EQ(du.records.size(), 20u);
  r = run_cli("stats --dataset " + d + "du.jsonl");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(std::stod(value_after(r.out, "feasibility_rate")), du.stats.feasibility_rate, 1e-6);

  r = run_cli("compile-bc --trajectories " + d + "du.jsonl --out " + d + "bc.jsonl");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(load_bc_dataset(d + "bc.jsonl").size(), 400u);

  // Trajectory methods need the trajectory file.
  r = run_cli("train --scene " + d + "scene.json --method trajSched --states " + d +
              "ds.jsonl --steps 100 --seed 1 --out " + d + "bad");
  EXPECT_EQ(r.code, 1) << r.out;

  r = run_cli("train --scene " + d + "scene.json --method traj --states " + d +
              "ds.jsonl --trajectories " + d + "du.jsonl --steps 20000 --seed 5 --out " + d +
              "ckpt --block-steps 5000 --start-steps 2000 --hidden 32 --encoder-hidden 32" +
              " --z-dim 16 --batch-size 64");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_lines(d + "ckpt/metrics.csv").size(), 5u);

  r = run_cli("evaluate --checkpoint " + d + "ckpt --distribution traj --episodes 100 --seed 6" +
              " --out " + d + "eval.csv");
  EXPECT_EQ(r.code, 1) << r.out;
  r = run_cli("evaluate --checkpoint " + d + "ckpt --distribution traj --episodes 100 --seed 6" +
              " --trajectories " + d + "du.jsonl --out " + d + "eval.csv");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = read_lines(d + "eval.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].rfind("traj,traj,100,", 0), 0u) << rows[1];
  EXPECT_EQ(read_lines(d + "eval.csv.episodes.csv").size(), 101u);

  // Same seed, same report.
  r = run_cli("--workers 2 evaluate --checkpoint " + d + "ckpt --distribution traj --episodes 100" +
              " --seed 6 --trajectories " + d + "du.jsonl --out " + d + "eval2.csv");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_text_file(d + "eval.csv"), read_text_file(d + "eval2.csv"));
  EXPECT_EQ(read_text_file(d + "eval.csv.episodes.csv"),
            read_text_file(d + "eval2.csv.episodes.csv"));
}
