#pragma once

// Shared generators for tests.

#include <random>
#include <vector>

#include "acx/calculus.hpp"

namespace acx::testing {

using acx::random_poly_field;

inline Eigen::VectorXd random_point(int dim, double half, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-half, half);
  Eigen::VectorXd x(dim);
  for (int a = 0; a < dim; ++a) x(a) = u(rng);
  return x;
}

}  // namespace acx::testing
