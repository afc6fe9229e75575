#include "ncmart/random.hpp"

namespace ncmart {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

Eigen::VectorXcd Rng::complex_vector(long n) {
  Eigen::VectorXcd v(n);
  for (long i = 0; i < n; ++i) v(i) = complex_normal();
  return v;
}

Operator Rng::complex_matrix(long d) {
  Operator x(d, d);
  for (long j = 0; j < d; ++j)
    for (long i = 0; i < d; ++i) x(i, j) = complex_normal();
  return x;
}

Operator Rng::hermitian_matrix(long d) {
  Operator x = complex_matrix(d);
  return 0.5 * (x + x.adjoint());
}

}  // namespace ncmart
