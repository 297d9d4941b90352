#include <gtest/gtest.h>

#include "sgrl/cma.hpp"
#include "test_util.hpp"

using namespace sgrl;

namespace {

double sphere(const VecX& x) { return x.squaredNorm(); }

double rosenbrock(const VecX& x) {
  double f = 0.0;
  for (int k = 0; k + 1 < x.size(); ++k) {
    const double a = x(k + 1) - x(k) * x(k);
    const double b = 1.0 - x(k);
    f += 100.0 * a * a + b * b;
  }
  return f;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[k - 1]) return false;
  }
  return true;
}

}  // namespace

TEST(CmaMinimize, SphereTwelveDims) {
  CmaOptions opt;
  opt.sigma0 = 0.5;
  opt.budget = 10000;
  opt.seed = 1;
  const CmaResult res = cma_minimize(sphere, VecX::Ones(12), opt);
  EXPECT_LT(res.f_best, 1e-8);
  EXPECT_LE(res.n_evals, 10000);
  EXPECT_TRUE(non_increasing(res.best_history));
  EXPECT_GT(res.min_eigenvalue, 1e-14);
  EXPECT_DOUBLE_EQ(res.f_best, sphere(res.x_best));
}

TEST(CmaMinimize, RosenbrockSixDims) {
  CmaOptions opt;
  opt.sigma0 = 0.5;
  opt.budget = 50000;
  opt.seed = 2;
  const CmaResult res = cma_minimize(rosenbrock, VecX::Zero(6), opt);
  EXPECT_LT(res.f_best, 1e-4);
  EXPECT_LE(res.n_evals, 50000);
  EXPECT_TRUE(non_increasing(res.best_history));
}

TEST(CmaMinimize, BudgetOfOnePopulationRunsOneGeneration) {
  CmaOptions opt;
  opt.budget = default_population(12);
  opt.seed = 3;
  std::vector<double> seen;
  const CmaResult res = cma_minimize(
      [&](const VecX& x) {
        const double f = sphere(x);
        seen.push_back(f);
        return f;
      },
      VecX::Ones(12), opt);
  EXPECT_EQ(res.generations, 1);
  EXPECT_EQ(res.n_evals, opt.budget);
  ASSERT_EQ(static_cast<long>(seen.size()), opt.budget);
  EXPECT_EQ(res.f_best, *std::min_element(seen.begin(), seen.end()));
}

TEST(CmaMinimize, BudgetBelowPopulationRejected) {
  CmaOptions opt;
  opt.budget = default_population(12) - 1;
  EXPECT_THROW(cma_minimize(sphere, VecX::Ones(12), opt), ConfigError);
}

TEST(CmaMinimize, NonFiniteValuesAreRejectedNotFatal) {
  CmaOptions opt;
  opt.sigma0 = 0.5;
  opt.budget = 4000;
  opt.seed = 4;
  const CmaResult res = cma_minimize(
      [](const VecX& x) {
        return x(0) > 1.2 ? std::numeric_limits<double>::quiet_NaN() : x.squaredNorm();
      },
      VecX::Ones(4), opt);
  EXPECT_GT(res.rejected, 0);
  EXPECT_TRUE(std::isfinite(res.f_best));
  EXPECT_LT(res.f_best, 1e-6);
  EXPECT_TRUE(non_increasing(res.best_history));
}

TEST(CmaMinimize, DeterministicAndWorkerInvariant) {
  CmaOptions opt;
  opt.sigma0 = 0.3;
  opt.budget = 2000;
  opt.seed = 5;
  const CmaResult a = cma_minimize(rosenbrock, VecX::Zero(5), opt);
  const CmaResult b = cma_minimize(rosenbrock, VecX::Zero(5), opt);
  opt.workers = 3;
  const CmaResult c = cma_minimize(rosenbrock, VecX::Zero(5), opt);
  EXPECT_EQ(a.x_best, b.x_best);
  EXPECT_EQ(a.best_history, b.best_history);
  EXPECT_EQ(a.x_best, c.x_best);
  EXPECT_EQ(a.best_history, c.best_history);
}

TEST(CmaMinimize, StopsAtTarget) {
  CmaOptions opt;
  opt.sigma0 = 0.5;
  opt.budget = 10000;
  opt.f_target = 1e-3;
  opt.seed = 6;
  const CmaResult res = cma_minimize(sphere, VecX::Ones(12), opt);
  EXPECT_LE(res.f_best, 1e-3);
  EXPECT_EQ(res.stop_reason, "target");
  EXPECT_LT(res.n_evals, 10000);
}

TEST(CmaMinimize, CovarianceStaysPositiveDefinite) {
  Rng rng = make_rng(68);
  for (int run = 0; run < 5; ++run) {
    CmaOptions opt;
    opt.sigma0 = 0.3;
    opt.budget = 3000;
    opt.seed = 100 + run;
    VecX x0(8);
    for (int k = 0; k < 8; ++k) x0(k) = uniform(rng, -2, 2);
    const CmaResult res = cma_minimize(rosenbrock, x0, opt);
    EXPECT_GT(res.min_eigenvalue, 1e-14);
    EXPECT_GT(res.final_state.sigma, 0.0);
    const MatX& c = res.final_state.cov;
    EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}
