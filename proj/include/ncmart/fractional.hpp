#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ncmart/algebra.hpp"
#include "ncmart/martingale.hpp"

namespace ncmart {

enum class Provenance { ClosedFormDyadic, ClosedFormAbelianDyadic, Optimized, UserSupplied };
const char* provenance_name(Provenance p);

struct ZetaCertificate {
  int level = 0;
  double ratio = 0.0;  // best ||x||_inf found with ||x||_2 = 1
  double zeta = 0.0;   // 1 / ratio^2
  int best_start = -1;
  std::vector<double> start_ratios;  // random starts first, then one per basis element
  Operator maximizer;
};

struct CoefficientSequence {
  std::vector<double> values;  // values[k-1] = zeta_k
  Provenance provenance = Provenance::UserSupplied;
  int restarts = 0;
  double tol = 0.0;
  std::vector<ZetaCertificate> certificates;
  std::vector<std::string> warnings;

  double at(int k) const { return values.at(k - 1); }
  int size() const { return static_cast<int>(values.size()); }
};

struct ZetaOptions {
  int restarts = 32;
  double tol = 1e-10;
  std::uint64_t seed = 0;
  int max_iterations = 2000;
  int threads = 0;
  bool basis_starts = true;
};

ZetaCertificate zeta_optimize(const Tower& t, int k, const ZetaOptions& options = {});

enum class ZetaMethod { Auto, ForceOptimize, UserSupplied };
CoefficientSequence zeta_sequence(const Tower& t, ZetaMethod method,
                                  const std::vector<double>& user_values = {},
                                  const ZetaOptions& options = {});
// Known exact values for uniform 2-factor tensor towers and abelian dyadic towers.
std::optional<std::vector<double>> closed_form_zeta(const Tower& t);

struct EmbeddingReport {
  int level = 0;
  double zeta = 0.0;
  int samples = 0;
  double max_inf_over_2 = 0.0;     // max ||x||_inf / ||x||_2
  double max_2_over_1 = 0.0;       // max ||x||_2 / ||x||_1
  double min_slack_inf_2 = kInf;   // zeta^(-1/2) ||x||_2 - ||x||_inf, with ||x||_2 = 1
  double min_slack_2_1 = kInf;     // 2 zeta^(-1/2) ||x||_1 - ||x||_2, with ||x||_2 = 1
  bool holds(double tol = 1e-9) const { return min_slack_inf_2 >= -tol && min_slack_2_1 >= -tol; }
};
EmbeddingReport embedding_constants_check(const Tower& t, int k, double zeta_k, int samples,
                                          std::uint64_t seed);

// dx_k -> multipliers[k-1] dx_k; the start x_0 is dropped.
MartingaleSequence coefficient_transform(const MartingaleSequence& m,
                                         const std::vector<double>& multipliers);
MartingaleSequence fractional_integral(const MartingaleSequence& m, double alpha,
                                       const CoefficientSequence& coeffs);
MartingaleSequence iterated_transform(const MartingaleSequence& m, double gamma,
                                      const CoefficientSequence& coeffs);

struct SelfAdjointnessReport {
  Complex lhs;  // tau((I x) y^*)
  Complex rhs;  // tau(x (I y)^*)
  double difference = 0.0;
  bool holds = false;
};
SelfAdjointnessReport selfadjointness_check(const MartingaleSequence& x,
                                            const MartingaleSequence& y, double alpha,
                                            const CoefficientSequence& coeffs);

struct OptimalityReport {
  double max_ratio = 0.0;  // max_k nu_k / zeta_k
  int argmax_level = 0;
  // Present when a bound constant c was claimed for the L2 -> BMO map of
  // I_nu^(1/2): per-level check of nu_k <= c^2 zeta_k on the optimizer's
  // single-difference extremal, where both norms are exact.
  std::vector<double> single_difference_ratios;  // ||I_nu^(1/2) a||_BMO^c / ||a||_2
  bool claim_holds = true;
};
OptimalityReport coefficient_optimality(const Tower& t, const CoefficientSequence& nu,
                                        const CoefficientSequence& zeta,
                                        std::optional<double> claimed_constant = std::nullopt);

}  // namespace ncmart
