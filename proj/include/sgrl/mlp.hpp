#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "sgrl/common.hpp"
#include "sgrl/random.hpp"

namespace sgrl {

enum class OutputActivation { kLinear, kTanh };

/// Fully connected network with ELU hidden layers. Inputs and outputs are
/// column batches (features x batch).
template <typename Scalar>
class Mlp {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Cache {
    std::vector<Mat> input;  // input[l] feeds layer l
    std::vector<Mat> pre;    // pre-activation of layer l
    Mat output;
  };

  struct Grads {
    std::vector<Mat> dW;
    std::vector<Vec> db;
  };

  Mlp() = default;

  /// Xavier-uniform weights with gain sqrt(2), zero biases.
  Mlp(std::vector<int> sizes, OutputActivation out, Rng& rng)
      : sizes_(std::move(sizes)), out_(out) {
    if (sizes_.size() < 2) throw ConfigError("network needs at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int fan_in = sizes_[l];
      const int fan_out = sizes_[l + 1];
      if (fan_in < 1 || fan_out < 1) throw ConfigError("layer sizes must be positive");
      const double bound = std::sqrt(2.0) * std::sqrt(6.0 / (fan_in + fan_out));
      Mat w(fan_out, fan_in);
      for (Eigen::Index k = 0; k < w.size(); ++k) {
        w.data()[k] = static_cast<Scalar>(uniform(rng, -bound, bound));
      }
      W_.push_back(std::move(w));
      b_.push_back(Vec::Zero(fan_out));
    }
  }

  int num_layers() const { return static_cast<int>(W_.size()); }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  OutputActivation output_activation() const { return out_; }
  std::vector<Mat>& weights() { return W_; }
  std::vector<Vec>& biases() { return b_; }
  const std::vector<Mat>& weights() const { return W_; }
  const std::vector<Vec>& biases() const { return b_; }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    if (x.rows() != input_dim()) throw ConfigError("network input has the wrong size");
    if (cache) {
      cache->input.resize(W_.size());
      cache->pre.resize(W_.size());
    }
    Mat h = x;
    for (int l = 0; l < num_layers(); ++l) {
      Mat z = W_[l] * h;
      z.colwise() += b_[l];
      if (cache) {
        cache->input[l] = std::move(h);
        cache->pre[l] = z;
      }
      if (l + 1 < num_layers()) {
        h = (z.array() > Scalar(0)).select(z.array(), z.array().exp() - Scalar(1)).matrix();
      } else if (out_ == OutputActivation::kTanh) {
        h = z.array().tanh().matrix();
      } else {
        h = std::move(z);
      }
    }
    if (cache) cache->output = h;
    return h;
  }

  Grads zero_grads() const {
    Grads g;
    for (int l = 0; l < num_layers(); ++l) {
      g.dW.push_back(Mat::Zero(W_[l].rows(), W_[l].cols()));
      g.db.push_back(Vec::Zero(b_[l].size()));
    }
    return g;
  }

  /// Back-propagates dL/dy. Accumulates parameter gradients into `grads`
  /// when given and returns dL/dx.
  Mat backward(const Cache& cache, const Mat& dy, Grads* grads) const {
    Mat delta;
    const int last = num_layers() - 1;
    if (out_ == OutputActivation::kTanh) {
      delta = dy.cwiseProduct(
          cache.output.unaryExpr([](Scalar v) { return Scalar(1) - v * v; }));
    } else {
      delta = dy;
    }
    for (int l = last; l >= 0; --l) {
      if (grads) {
        grads->dW[l].noalias() += delta * cache.input[l].transpose();
        grads->db[l] += delta.rowwise().sum();
      }
      Mat dh = W_[l].transpose() * delta;
      if (l == 0) return dh;
      // ELU derivative: 1 for z > 0, exp(z) otherwise.
      const auto& z = cache.pre[l - 1].array();
      delta = (z > Scalar(0)).select(dh.array(), dh.array() * z.exp()).matrix();
    }
    return delta;
  }

  long num_params() const {
    long n = 0;
    for (int l = 0; l < num_layers(); ++l) n += W_[l].size() + b_[l].size();
    return n;
  }

  /// Weights then bias of each layer, column-major.
  Vec flat_params() const {
    Vec out(num_params());
    long k = 0;
    for (int l = 0; l < num_layers(); ++l) {
      out.segment(k, W_[l].size()) = Eigen::Map<const Vec>(W_[l].data(), W_[l].size());
      k += W_[l].size();
      out.segment(k, b_[l].size()) = b_[l];
      k += b_[l].size();
    }
    return out;
  }

  void set_flat_params(const Vec& p) {
    if (p.size() != num_params()) throw ConfigError("parameter vector has the wrong size");
    long k = 0;
    for (int l = 0; l < num_layers(); ++l) {
      Eigen::Map<Vec>(W_[l].data(), W_[l].size()) = p.segment(k, W_[l].size());
      k += W_[l].size();
      b_[l] = p.segment(k, b_[l].size());
      k += b_[l].size();
    }
  }

  static Vec flat_grads(const Grads& g) {
    long n = 0;
    for (std::size_t l = 0; l < g.dW.size(); ++l) n += g.dW[l].size() + g.db[l].size();
    Vec out(n);
    long k = 0;
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
      out.segment(k, g.dW[l].size()) = Eigen::Map<const Vec>(g.dW[l].data(), g.dW[l].size());
      k += g.dW[l].size();
      out.segment(k, g.db[l].size()) = g.db[l];
      k += g.db[l].size();
    }
    return out;
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> m;
    m.sizes_ = sizes_;
    m.out_ = out_;
    for (int l = 0; l < num_layers(); ++l) {
      m.W_.push_back(W_[l].template cast<Other>());
      m.b_.push_back(b_[l].template cast<Other>());
    }
    return m;
  }

  bool all_finite() const {
    for (int l = 0; l < num_layers(); ++l) {
      if (!W_[l].allFinite() || !b_[l].allFinite()) return false;
    }
    return true;
  }

 private:
  template <typename>
  friend class Mlp;

  std::vector<int> sizes_;
  OutputActivation out_ = OutputActivation::kLinear;
  std::vector<Mat> W_;
  std::vector<Vec> b_;
};

/// x / mean(|x|) per column, the embedding normalization.
template <typename Derived>
auto avg_l1_norm(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto scale =
      (x.cwiseAbs().colwise().mean().array().max(Scalar(1e-8))).matrix().eval();
  Mat out = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) out.col(c) /= scale(c);
  return out;
}

/// Gradient of avg_l1_norm with respect to x given dL/dy.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> avg_l1_norm_backward(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& dy) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dx(x.rows(), x.cols());
  const Scalar n = static_cast<Scalar>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Scalar m_raw = x.col(c).cwiseAbs().mean();
    if (m_raw < Scalar(1e-8)) {
      dx.col(c) = dy.col(c) / Scalar(1e-8);
      continue;
    }
    const Scalar inner = dy.col(c).dot(x.col(c));
    dx.col(c) = dy.col(c) / m_raw -
                (inner / (m_raw * m_raw * n)) * x.col(c).unaryExpr([](Scalar v) {
                  return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
                });
  }
  return dx;
}

/// Adaptive moment estimation state for one network.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp<Scalar>& net, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_ = net.zero_grads();
    v_ = net.zero_grads();
  }

  void step(Mlp<Scalar>& net, const typename Mlp<Scalar>::Grads& g) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(beta1_);
    const Scalar b2 = static_cast<Scalar>(beta2_);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
    const Scalar lr = static_cast<Scalar>(lr_);
    const Scalar eps = static_cast<Scalar>(eps_);
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = b1 * m + (Scalar(1) - b1) * grad;
      v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (int l = 0; l < net.num_layers(); ++l) {
      update(net.weights()[l], m_.dW[l], v_.dW[l], g.dW[l]);
      update(net.biases()[l], m_.db[l], v_.db[l], g.db[l]);
    }
  }

  long steps() const { return t_; }
  typename Mlp<Scalar>::Grads& first_moment() { return m_; }
  typename Mlp<Scalar>::Grads& second_moment() { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  double lr_ = 3e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  typename Mlp<Scalar>::Grads m_;
  typename Mlp<Scalar>::Grads v_;
};

}  // namespace sgrl
