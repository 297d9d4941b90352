#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "sgrl/random.hpp"

namespace sgrl::testutil {

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sgrl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Upper 1% point of the chi-square distribution (Wilson-Hilferty).
inline double chi2_critical_01(int dof) {
  const double z = 2.3263478740408408;
  const double k = dof;
  const double c = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * c * c * c;
}

template <typename Counts>
double chi2_uniform(const Counts& counts, double total) {
  const double expected = total / static_cast<double>(counts.size());
  double x2 = 0.0;
  for (double c : counts) x2 += (c - expected) * (c - expected) / expected;
  return x2;
}

}  // namespace sgrl::testutil
