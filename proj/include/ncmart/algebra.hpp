#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ncmart/error.hpp"

namespace ncmart {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using SparseBlock = Eigen::SparseMatrix<Complex>;

// What E_0 projects onto. Zero gives x_0 = 0 and puts the identity in D_1;
// Scalars gives E_0 = tau(.)1, the usual start of a classical dyadic martingale.
enum class Origin { Zero, Scalars };

struct TensorMatrix {
  std::vector<int> factor_dims;
};

struct AbelianDyadic {
  int levels = 0;
};

struct CustomSubalgebraBases {
  std::vector<std::vector<Operator>> spanning_sets;  // one per level
  std::vector<double> weights;                       // empty means uniform
};

struct FiltrationSpec {
  std::variant<TensorMatrix, AbelianDyadic, CustomSubalgebraBases> kind;
  std::optional<Origin> origin;  // unset: Zero for tensor/custom, Scalars for abelian
};

enum class TowerKind { Tensor, Abelian, Custom };

class Tower;
using TowerPtr = std::shared_ptr<const Tower>;

TowerPtr build_tower(const FiltrationSpec& spec);

class Tower {
 public:
  int ambient_dim() const { return dim_; }
  int levels() const { return static_cast<int>(blocks_.size()) - 1; }
  const Eigen::VectorXd& trace_weights() const { return weights_; }
  bool uniform_weights() const { return uniform_; }
  Origin origin() const { return origin_; }
  TowerKind kind() const { return kind_; }
  const FiltrationSpec& spec() const { return spec_; }
  std::string describe() const;

  Complex trace(const Operator& x) const;
  // <a, b> = tau(b^* a)
  Complex inner(const Operator& a, const Operator& b) const;
  double l2_norm(const Operator& x) const;

  Operator expectation(int n, const Operator& x) const;
  Operator difference(int k, const Operator& x) const;

  // Orthonormal basis of D_k; k = 0 gives the basis of the level-0 algebra.
  std::vector<Operator> difference_basis(int k) const;
  std::vector<Operator> level_basis(int n) const;
  int difference_dim(int k) const;
  int level_dim(int n) const;

  // Coordinates of x against the D_k basis, and the inverse map.
  Eigen::VectorXcd coordinates(int k, const Operator& x) const;
  Operator from_coordinates(int k, const Eigen::VectorXcd& c) const;
  const SparseBlock& block(int k) const;

  // Weighted vectorization: vec(x diag(sqrt w)); the tau inner product becomes
  // the Euclidean one.
  Eigen::VectorXcd to_vector(const Operator& x) const;
  Operator from_vector(const Eigen::VectorXcd& v) const;

  // Minimal projections of level n when that level is diagonal: index groups.
  const std::optional<std::vector<std::vector<int>>>& atoms(int n) const;

  void check_dim(const Operator& x) const;
  void check_level(int n, bool allow_zero) const;

 private:
  friend TowerPtr build_tower(const FiltrationSpec& spec);
  Tower() = default;
  void finish();

  FiltrationSpec spec_;
  TowerKind kind_ = TowerKind::Tensor;
  Origin origin_ = Origin::Zero;
  int dim_ = 0;
  Eigen::VectorXd weights_;
  Eigen::VectorXd sqrt_w_;
  bool uniform_ = true;
  std::vector<SparseBlock> blocks_;  // blocks_[0] = level 0, blocks_[k] = D_k
  std::vector<std::optional<std::vector<std::vector<int>>>> atoms_;
};

// Free-function forms of the tower operations.
inline Complex trace(const Tower& t, const Operator& x) { return t.trace(x); }
inline Operator conditional_expectation(const Tower& t, int n, const Operator& x) {
  return t.expectation(n, x);
}
inline Operator martingale_difference_operator(const Tower& t, int k, const Operator& x) {
  return t.difference(k, x);
}
inline std::vector<Operator> difference_subspace_basis(const Tower& t, int k) {
  return t.difference_basis(k);
}

std::uint64_t operator_hash(const Operator& x);
double operator_norm(const Operator& x);
Operator identity(int d);

}  // namespace ncmart
