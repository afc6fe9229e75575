#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "ncmart/algebra.hpp"

namespace ncmart {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Right-continuous decreasing step function on [0,1): value_j on
// [cum_{j-1}, cum_j), cum_0 = 0, last cum = 1.
class SingularValueFunction {
 public:
  struct Step {
    double value;
    double cum_weight;
  };

  SingularValueFunction() : steps_{{0.0, 1.0}} {}
  // Unsorted (value, mass) pairs; masses need not be normalized.
  static SingularValueFunction from_masses(std::vector<std::pair<double, double>> pairs);
  static SingularValueFunction from_steps(std::vector<Step> steps);

  const std::vector<Step>& steps() const { return steps_; }
  double at(double t) const;          // mu_t
  double left_limit(double t) const;  // mu_{t-}
  double top() const { return steps_.front().value; }
  double mass(size_t j) const {
    return steps_[j].cum_weight - (j ? steps_[j - 1].cum_weight : 0.0);
  }
  bool operator==(const SingularValueFunction&) const = default;

 private:
  std::vector<Step> steps_;
};

SingularValueFunction singular_value_function(const Tower& t, const Operator& x);
// For x known to be positive semidefinite: eigenvalues instead of an SVD.
SingularValueFunction positive_value_function(const Tower& t, const Operator& x);

double lp_norm(const SingularValueFunction& s, double p);
double lorentz_norm(const SingularValueFunction& s, double p, double q);
double weak_norm(const SingularValueFunction& s, double p);
// sup over lambda of lambda * distribution(lambda)^(1/p), evaluated at breakpoints.
double weak_norm_by_distribution(const SingularValueFunction& s, double p);
double distribution(const SingularValueFunction& s, double lambda);

inline double lp_norm(const Tower& t, const Operator& x, double p) {
  return lp_norm(singular_value_function(t, x), p);
}

}  // namespace ncmart
