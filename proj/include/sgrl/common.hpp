#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sgrl {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Row6 = Eigen::Matrix<double, 1, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Raised when a distance or normal is undefined (e.g. coincident sphere centers).
class DegenerateGeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scene, dataset, or option combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training loss or parameter became non-finite.
class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sgrl
