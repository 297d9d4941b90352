#include <gtest/gtest.h>

#include <algorithm>

#include "sgrl/evaluation.hpp"
#include "test_util.hpp"

using namespace sgrl;

namespace {

const SceneSpec& scene() {
  static const SceneSpec spec = default_double_sphere_scene();
  return spec;
}

const StateDataset& states() {
  static const StateDataset ds = generate_states(scene(), 200, 131);
  return ds;
}

Policy do_nothing() {
  return [](const Observation&) { return Vec3::Zero(); };
}

}  // namespace

TEST(EvaluatePolicy, GoalAtStartAlwaysSucceeds) {
  const auto goals = goal_indices(scene(), states(), GoalFilter{true, false});
  // A robot-held pinch can slip under penalty contact, so use a goal on static supports only.
  const int robot = scene().robot_id();
  auto it = std::find_if(goals.begin(), goals.end(), [&](int i) {
    const auto& sup = states().samples[i].mode.supports;
    return std::find(sup.begin(), sup.end(), robot) == sup.end();
  });
  ASSERT_NE(it, goals.end());
  StateDataset one = states();
  one.samples = {states().samples[*it]};
  const EvalReport r =
      evaluate_policy(scene(), do_nothing(), &one, nullptr, EvalDistribution::kUni, 50, 1);
  EXPECT_EQ(r.successes, 50);
  EXPECT_EQ(r.success_rate, 1.0);
  for (const auto& o : r.outcomes) EXPECT_EQ(o.steps, 1);
}

TEST(EvaluatePolicy, UntrainedPolicyRarelySucceeds) {
  TrainConfig cfg;
  cfg.hidden = 32;
  cfg.encoder_hidden = 32;
  cfg.z_dim = 16;
  const Networks nets = make_networks(cfg, 132, 0.1);
  const EvalReport r = evaluate_policy(scene(), deterministic_policy(nets), &states(), nullptr,
                                       EvalDistribution::kUni, 1000, 2);
  EXPECT_LE(r.success_rate, 0.05);
  EXPECT_EQ(r.episodes, 1000);
}

TEST(EvaluatePolicy, ReproducibleAndWorkerInvariant) {
  Policy push = [](const Observation& o) { return Vec3(0.1 * std::tanh(o(18)), 0.0, -0.01); };
  EvalOptions serial;
  EvalOptions threaded;
  threaded.workers = 3;
  const EvalReport a =
      evaluate_policy(scene(), push, &states(), nullptr, EvalDistribution::kUni, 120, 3, serial);
  const EvalReport b =
      evaluate_policy(scene(), push, &states(), nullptr, EvalDistribution::kUni, 120, 3, threaded);
  EXPECT_EQ(episodes_csv(a), episodes_csv(b));
  EXPECT_EQ(report_csv(a), report_csv(b));
  const EvalReport c =
      evaluate_policy(scene(), push, &states(), nullptr, EvalDistribution::kUni, 120, 4, serial);
  EXPECT_NE(episodes_csv(a), episodes_csv(c));
}

TEST(EvaluatePolicy, BalanceFilterExcludesOnlyRobotSupportedGoals) {
  const EvalReport r = evaluate_policy(scene(), do_nothing(), &states(), nullptr,
                                       EvalDistribution::kWoBalance, 300, 5);
  for (const auto& o : r.outcomes) {
    const ContactMode& m = states().samples[o.goal_index].mode;
    EXPECT_FALSE(is_excluded_goal(scene(), m, GoalFilter{true, true}));
  }
}

TEST(EvaluatePolicy, MissingDatasetsAndBadCounts) {
  EXPECT_THROW(evaluate_policy(scene(), do_nothing(), &states(), nullptr, EvalDistribution::kTraj,
                               10, 1),
               ConfigError);
  EXPECT_THROW(evaluate_policy(scene(), do_nothing(), nullptr, nullptr, EvalDistribution::kUni,
                               10, 1),
               ConfigError);
  EXPECT_THROW(evaluate_policy(scene(), do_nothing(), &states(), nullptr, EvalDistribution::kUni,
                               0, 1),
               ConfigError);
}

TEST(Distributions, NamesRoundTrip) {
  for (auto d : {EvalDistribution::kUni, EvalDistribution::kWoBalance, EvalDistribution::kTraj}) {
    EXPECT_EQ(parse_distribution(distribution_name(d)), d);
  }
  EXPECT_EQ(parse_distribution("wo_balance"), EvalDistribution::kWoBalance);
  EXPECT_THROW(parse_distribution("hard"), ConfigError);
}

TEST(Reports, CsvHeadersAndRows) {
  const EvalReport r = evaluate_policy(scene(), do_nothing(), &states(), nullptr,
                                       EvalDistribution::kUni, 7, 6, {}, "baseline");
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.rfind("method,distribution,episodes,successes,success_rate,seed\n", 0), 0u);
  EXPECT_NE(csv.find("baseline,uni,7,"), std::string::npos);
  const std::string eps = episodes_csv(r);
  EXPECT_EQ(std::count(eps.begin(), eps.end(), '\n'), 8);
}
