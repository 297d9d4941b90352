#include <gtest/gtest.h>

#include "sgrl/mlp.hpp"
#include "test_util.hpp"

using namespace sgrl;

namespace {

using MatD = Eigen::MatrixXd;
using MlpD = Mlp<double>;

MatD random_mat(int rows, int cols, Rng& rng) {
  MatD m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = uniform(rng, -1.5, 1.5);
  return m;
}

// Scalar probe L = sum(w .* y) so dL/dy = w.
double probe(const MlpD& net, const MatD& x, const MatD& w) {
  return net.forward(x).cwiseProduct(w).sum();
}

double rel_err(const VecX& a, const VecX& b) {
  return (a - b).norm() / std::max(1e-8, std::max(a.norm(), b.norm()));
}

}  // namespace

TEST(MlpGradient, ParametersMatchFiniteDifferences) {
  Rng rng = make_rng(81);
  for (OutputActivation out : {OutputActivation::kLinear, OutputActivation::kTanh}) {
    for (int trial = 0; trial < 5; ++trial) {
      MlpD net({7, 16, 12, 3}, out, rng);
      const MatD x = random_mat(7, 9, rng);
      const MatD w = random_mat(3, 9, rng);
      MlpD::Cache cache;
      net.forward(x, &cache);
      auto grads = net.zero_grads();
      net.backward(cache, w, &grads);
      const VecX analytic = MlpD::flat_grads(grads);

      const VecX p = net.flat_params();
      VecX fd(p.size());
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        VecX pp = p, pm = p;
        pp(k) += h;
        pm(k) -= h;
        net.set_flat_params(pp);
        const double fp = probe(net, x, w);
        net.set_flat_params(pm);
        const double fm = probe(net, x, w);
        fd(k) = (fp - fm) / (2 * h);
      }
      net.set_flat_params(p);
      EXPECT_LT(rel_err(analytic, fd), 1e-4);
    }
  }
}

TEST(MlpGradient, InputMatchesFiniteDifferences) {
  Rng rng = make_rng(82);
  MlpD net({5, 16, 16, 4}, OutputActivation::kTanh, rng);
  const MatD x = random_mat(5, 6, rng);
  const MatD w = random_mat(4, 6, rng);
  MlpD::Cache cache;
  net.forward(x, &cache);
  const MatD dx = net.backward(cache, w, nullptr);
  MatD fd(5, 6);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    MatD xp = x, xm = x;
    xp.data()[k] += h;
    xm.data()[k] -= h;
    fd.data()[k] = (probe(net, xp, w) - probe(net, xm, w)) / (2 * h);
  }
  EXPECT_LT(rel_err(Eigen::Map<const VecX>(dx.data(), dx.size()),
                    Eigen::Map<const VecX>(fd.data(), fd.size())),
            1e-4);
}

TEST(AvgL1Norm, NormalizesAndDifferentiates) {
  Rng rng = make_rng(83);
  const MatD x = random_mat(8, 5, rng);
  const MatD y = avg_l1_norm(x);
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(y.col(c).cwiseAbs().mean(), 1.0, 1e-12);

  const MatD w = random_mat(8, 5, rng);
  const MatD dx = avg_l1_norm_backward<double>(x, w);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    MatD xp = x, xm = x;
    xp.data()[k] += h;
    xm.data()[k] -= h;
    const double fd =
        (MatD(avg_l1_norm(xp)).cwiseProduct(w).sum() - MatD(avg_l1_norm(xm)).cwiseProduct(w).sum()) /
        (2 * h);
    EXPECT_NEAR(dx.data()[k], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(MlpBasics, TanhOutputIsBounded) {
  Rng rng = make_rng(84);
  Mlp<float> net({4, 16, 16, 3}, OutputActivation::kTanh, rng);
  Eigen::MatrixXf x = Eigen::MatrixXf::Random(4, 100) * 100.0f;
  const Eigen::MatrixXf y = net.forward(x);
  EXPECT_LE(y.cwiseAbs().maxCoeff(), 1.0f);
}

TEST(MlpBasics, FlatParamsRoundTripAndCast) {
  Rng rng = make_rng(85);
  MlpD net({3, 8, 2}, OutputActivation::kLinear, rng);
  const VecX p = net.flat_params();
  EXPECT_EQ(p.size(), net.num_params());
  EXPECT_EQ(net.num_params(), 3 * 8 + 8 + 8 * 2 + 2);
  MlpD other({3, 8, 2}, OutputActivation::kLinear, rng);
  other.set_flat_params(p);
  EXPECT_EQ(other.flat_params(), p);
  const Mlp<float> f = net.cast<float>();
  const MatD x = random_mat(3, 4, rng);
  EXPECT_LT((f.forward(x.cast<float>()).cast<double>() - net.forward(x)).cwiseAbs().maxCoeff(),
            1e-5);
  EXPECT_THROW(net.set_flat_params(VecX::Zero(3)), ConfigError);
  EXPECT_THROW(net.forward(MatD::Zero(4, 1)), ConfigError);
}

TEST(AdamTest, FitsLinearMap) {
  Rng rng = make_rng(86);
  MlpD net({2, 1}, OutputActivation::kLinear, rng);
  Adam<double> opt(net, 0.05);
  MatD x = random_mat(2, 64, rng);
  MatD y = (Eigen::RowVector2d(2.0, -1.0) * x).array() + 0.5;
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 2000; ++it) {
    MlpD::Cache cache;
    const MatD e = net.forward(x, &cache) - y;
    const double loss = e.squaredNorm() / e.size();
    if (it == 0) first = loss;
    last = loss;
    auto g = net.zero_grads();
    net.backward(cache, 2.0 * e / e.size(), &g);
    opt.step(net, g);
  }
  EXPECT_LT(last, 1e-6 * first);
  EXPECT_NEAR(net.weights()[0](0, 0), 2.0, 1e-3);
  EXPECT_NEAR(net.biases()[0](0), 0.5, 1e-3);
}
