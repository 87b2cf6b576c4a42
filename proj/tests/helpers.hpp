#pragma once

#include <random>

#include "husimi/phase_space.hpp"

namespace testing_util {

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = u(rng);
  return m;
}

inline husimi::PhasePoint point(std::initializer_list<double> z) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(z.size()));
  Eigen::Index k = 0;
  for (double x : z) v(k++) = x;
  return husimi::PhasePoint::from_coordinates(v);
}

}  // namespace testing_util
