#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "ncmart/algebra.hpp"

namespace ncmart {

std::uint64_t splitmix64(std::uint64_t x);
// Stream seed for a path of indices below a root seed, e.g. (seed, grid, trial).
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  Complex complex_normal() { return {normal(), normal()}; }
  Eigen::VectorXcd complex_vector(long n);
  Operator complex_matrix(long d);
  Operator hermitian_matrix(long d);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ncmart
