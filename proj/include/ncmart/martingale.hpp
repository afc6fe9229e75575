#pragma once

#include <cstdint>
#include <vector>

#include "ncmart/algebra.hpp"
#include "ncmart/spectral.hpp"

namespace ncmart {

struct CoefficientSequence;

// x_n = x_0 + dx_1 + ... + dx_n with x_0 in the level-0 algebra (0 or scalars).
class MartingaleSequence {
 public:
  MartingaleSequence(TowerPtr tower, Operator start, std::vector<Operator> differences);
  MartingaleSequence(TowerPtr tower, std::vector<Operator> differences);

  const Tower& tower() const { return *tower_; }
  const TowerPtr& tower_ptr() const { return tower_; }
  int length() const { return static_cast<int>(diffs_.size()); }
  const Operator& start() const { return start_; }
  const std::vector<Operator>& differences() const { return diffs_; }
  const Operator& difference(int k) const { return diffs_.at(k - 1); }
  Operator value(int n) const;
  Operator final_value() const { return value(length()); }
  MartingaleSequence adjoint() const;

 private:
  TowerPtr tower_;
  Operator start_;
  std::vector<Operator> diffs_;
};

MartingaleSequence adapt(const TowerPtr& t, const Operator& x);

Operator column_square_function(const MartingaleSequence& m, int n);
Operator row_square_function(const MartingaleSequence& m, int n);
double hardy_column_norm(const MartingaleSequence& m, double p);
double hardy_row_norm(const MartingaleSequence& m, double p);

struct MixedHardyBound {
  double value = 0.0;
  std::vector<Operator> column_part;  // a_k; dx_k = a_k + b_k
  std::vector<Operator> row_part;     // b_k
};
MixedHardyBound hardy_mixed_upper(const MartingaleSequence& m, double p);
double hardy_mixed_max(const MartingaleSequence& m, double p);

double hd_norm(const MartingaleSequence& m, double p);

double bmo_column_norm(const MartingaleSequence& m);
double bmo_row_norm(const MartingaleSequence& m);
double bmo_norm(const MartingaleSequence& m);

struct LipschitzStrategy {
  int random_projections = 16;
  std::uint64_t seed = 0;
  int exhaustive_atom_limit = 20;
};
struct LipschitzBound {
  double value = 0.0;
  bool exact = false;  // every projection of every level was enumerated
  int level = 0;       // 0: the ||E_1 x|| term
};
LipschitzBound lipschitz_column_lower(const MartingaleSequence& m, double beta,
                                      const LipschitzStrategy& strategy = {});
// ||(x - E_n x) e||_2 / tau(e)^(beta + 1/2) for a single projection e in level n.
double lipschitz_ratio(const Tower& t, const Operator& x, int n, const Operator& e, double beta);

enum class AtomSide { Column, Row };

struct AtomCertificate {
  int level = 0;
  Operator projection;
  double p = 0.0;
  AtomSide side = AtomSide::Column;
  double mean_zero_residual = 0.0;  // ||E_n a||_2
  double support_residual = 0.0;    // ||a e - a||_2 (row: ||e a - a||_2)
  double l2_slack = 0.0;            // tau(e)^(1/2 - 1/p) - ||a||_2
  bool degenerate = false;          // a = 0
  bool valid() const {
    return mean_zero_residual <= 1e-8 && support_residual <= 1e-8 && l2_slack >= -1e-8;
  }
};

AtomCertificate validate_atom(const Tower& t, const Operator& a, int n, const Operator& e,
                              double p, AtomSide side = AtomSide::Column);

// a = v e with v a random element of D_m (m > n), scaled to ||a||_2 = tau(e)^(1/2-1/p).
Operator make_atom(const Tower& t, int n, const Operator& e, double p, int m, std::uint64_t seed);

struct AtomConstant {
  double constant = 0.0;            // ||T a||_2 / tau(e)^(1/2 - 1/q)
  double gamma = 0.0;               // 1/p - 1/q
  double mean_zero_residual = 0.0;  // of the transformed atom
  double support_residual = 0.0;
};
// T = I^gamma for gamma < 1 and the iterated transform for gamma >= 1.
AtomConstant atom_constant(const Tower& t, const Operator& a, int n, const Operator& e, double p,
                           double q, const CoefficientSequence& coeffs);

}  // namespace ncmart
