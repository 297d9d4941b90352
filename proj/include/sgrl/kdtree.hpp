#pragma once

#include <vector>

#include "sgrl/sampler.hpp"

namespace sgrl {

/// Exact nearest-neighbor index over feature vectors (columns of `points`).
/// Ties go to the lowest point index.
class PhiIndex {
 public:
  PhiIndex() = default;
  explicit PhiIndex(MatX points, int leaf_size = 8);

  /// Index over phi(s) of every state in ds (zero velocities).
  static PhiIndex from_states(const SceneSpec& spec, const StateDataset& ds);

  int nearest(const VecX& query) const;
  int brute_force_nearest(const VecX& query) const;

  int size() const { return static_cast<int>(points_.cols()); }
  int dim() const { return static_cast<int>(points_.rows()); }
  const MatX& points() const { return points_; }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int split_dim = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);
  void search(int node, const VecX& q, double* best_d, int* best_i) const;
  double dist2(int i, const VecX& q) const;

  MatX points_;
  int leaf_size_ = 8;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace sgrl
