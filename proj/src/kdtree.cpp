#include "sgrl/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace sgrl {

PhiIndex::PhiIndex(MatX points, int leaf_size)
    : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
  if (points_.cols() == 0) throw ConfigError("cannot index an empty point set");
  order_.resize(points_.cols());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.cols() / leaf_size_ + 2);
  build(0, size());
}

PhiIndex PhiIndex::from_states(const SceneSpec& spec, const StateDataset& ds) {
  if (ds.samples.empty()) throw ConfigError("cannot index an empty state dataset");
  MatX pts(feature_dim(spec), static_cast<Eigen::Index>(ds.samples.size()));
  for (std::size_t k = 0; k < ds.samples.size(); ++k) {
    pts.col(k) = feature_embed(spec, Vec6(ds.samples[k].s));
  }
  return PhiIndex(std::move(pts));
}

int PhiIndex::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  // Split at the median of the widest dimension.
  int best_dim = 0;
  double best_spread = -1.0;
  for (int d = 0; d < dim(); ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int k = begin; k < end; ++k) {
      lo = std::min(lo, points_(d, order_[k]));
      hi = std::max(hi, points_(d, order_[k]));
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_spread <= 0.0) return id;  // all points coincide
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double va = points_(best_dim, a);
                     const double vb = points_(best_dim, b);
                     return va < vb || (va == vb && a < b);
                   });
  const double split = points_(best_dim, order_[mid]);
  nodes_[id].split_dim = best_dim;
  nodes_[id].split = split;
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double PhiIndex::dist2(int i, const VecX& q) const {
  double s = 0.0;
  for (int d = 0; d < dim(); ++d) {
    const double diff = points_(d, i) - q(d);
    s += diff * diff;
  }
  return s;
}

void PhiIndex::search(int node, const VecX& q, double* best_d, int* best_i) const {
  const Node& n = nodes_[node];
  if (n.split_dim < 0) {
    for (int k = n.begin; k < n.end; ++k) {
      const int i = order_[k];
      const double d = dist2(i, q);
      if (d < *best_d || (d == *best_d && i < *best_i)) {
        *best_d = d;
        *best_i = i;
      }
    }
    return;
  }
  const double diff = q(n.split_dim) - n.split;
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, q, best_d, best_i);
  // Equal distance can still hold a lower-index tie, so prune only strictly.
  if (diff * diff <= *best_d) search(far, q, best_d, best_i);
}

int PhiIndex::nearest(const VecX& query) const {
  if (query.size() != dim()) throw ConfigError("query dimension does not match the index");
  double best_d = std::numeric_limits<double>::infinity();
  int best_i = std::numeric_limits<int>::max();
  search(0, query, &best_d, &best_i);
  return best_i;
}

int PhiIndex::brute_force_nearest(const VecX& query) const {
  if (query.size() != dim()) throw ConfigError("query dimension does not match the index");
  double best_d = std::numeric_limits<double>::infinity();
  int best_i = -1;
  for (int i = 0; i < size(); ++i) {
    const double d = dist2(i, query);
    if (d < best_d) {
      best_d = d;
      best_i = i;
    }
  }
  return best_i;
}

}  // namespace sgrl
