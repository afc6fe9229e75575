#include "ncmart/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace ncmart {

namespace {

constexpr double kMergeTol = 1e-12;

void check_exponent(double p, const char* name) {
  if (!(p > 0.0)) throw InvalidInput(std::string(name) + " must be positive");
}

// log(sum_j exp(terms_j)), ignoring -inf terms.
double log_sum_exp(const std::vector<double>& terms) {
  double m = -kInf;
  for (double t : terms) m = std::max(m, t);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

// Values below d * eps * top are rounding noise of exact zeros; left in, they
// would dominate p < 1 quasi-norms (1e-16^(1/4) = 1e-4).
double rank_floor(int d, double top) {
  return d * std::numeric_limits<double>::epsilon() * top;
}

}  // namespace

SingularValueFunction SingularValueFunction::from_masses(
    std::vector<std::pair<double, double>> pairs) {
  double total = 0.0;
  for (auto& [v, w] : pairs) {
    if (!(v >= 0.0) || !(w >= 0.0)) throw InvalidInput("step values and masses must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidInput("step function with zero total mass");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  const double top = pairs.front().first;
  const double tol = kMergeTol * std::max(1.0, top);
  std::vector<Step> steps;
  double cum = 0.0;
  for (const auto& [v, w] : pairs) {
    if (w == 0.0) continue;
    cum += w / total;
    if (!steps.empty() && steps.back().value - v <= tol)
      steps.back().cum_weight = cum;
    else
      steps.push_back({v, cum});
  }
  steps.back().cum_weight = 1.0;
  return from_steps(std::move(steps));
}

SingularValueFunction SingularValueFunction::from_steps(std::vector<Step> steps) {
  if (steps.empty()) throw InvalidInput("empty step function");
  for (size_t j = 0; j < steps.size(); ++j) {
    if (!(steps[j].value >= 0.0)) throw InvalidInput("step values must be >= 0");
    double prev_cum = j ? steps[j - 1].cum_weight : 0.0;
    if (!(steps[j].cum_weight > prev_cum)) throw InvalidInput("cumulative weights must increase");
    if (j && steps[j].value > steps[j - 1].value) throw InvalidInput("step values must decrease");
  }
  if (std::abs(steps.back().cum_weight - 1.0) > 1e-12)
    throw InvalidInput("final cumulative weight must be 1");
  steps.back().cum_weight = 1.0;
  SingularValueFunction s;
  s.steps_ = std::move(steps);
  return s;
}

double SingularValueFunction::at(double t) const {
  for (const auto& s : steps_)
    if (t < s.cum_weight) return s.value;
  return 0.0;
}

double SingularValueFunction::left_limit(double t) const {
  for (const auto& s : steps_)
    if (t <= s.cum_weight) return s.value;
  return 0.0;
}

SingularValueFunction singular_value_function(const Tower& t, const Operator& x) {
  t.check_dim(x);
  if (!x.allFinite()) throw NumericalError("non-finite entries in operator", operator_hash(x));
  const int d = t.ambient_dim();
  Eigen::VectorXd sv;
  Operator v;
  {
    // BDCSVD occasionally returns NaN on exactly rank-deficient input
    Eigen::BDCSVD<Operator> svd(x, Eigen::ComputeFullV);
    if (svd.info() == Eigen::Success && svd.singularValues().allFinite()) {
      sv = svd.singularValues();
      v = svd.matrixV();
    } else {
      Eigen::JacobiSVD<Operator> jac(x, Eigen::ComputeFullV);
      if (jac.info() != Eigen::Success || !jac.singularValues().allFinite())
        throw NumericalError("SVD failed", operator_hash(x));
      sv = jac.singularValues();
      v = jac.matrixV();
    }
  }
  const double floor = rank_floor(d, sv.size() ? sv.maxCoeff() : 0.0);
  const auto& w = t.trace_weights();
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(d);
  for (int j = 0; j < d; ++j) {
    double mass;
    if (t.uniform_weights()) {
      mass = 1.0 / d;
    } else {
      // tau-mass of the spectral projection v_j v_j^*
      mass = (v.col(j).cwiseAbs2().array() * w.array()).sum();
    }
    pairs.emplace_back(sv(j) <= floor ? 0.0 : sv(j), mass);
  }
  return SingularValueFunction::from_masses(std::move(pairs));
}

SingularValueFunction positive_value_function(const Tower& t, const Operator& x) {
  t.check_dim(x);
  if (!x.allFinite()) throw NumericalError("non-finite entries in operator", operator_hash(x));
  const int d = t.ambient_dim();
  Operator h = 0.5 * (x + x.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed", operator_hash(x));
  const auto& w = t.trace_weights();
  const double floor = rank_floor(d, es.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<std::pair<double, double>> pairs;
  for (int j = 0; j < d; ++j) {
    double mass = t.uniform_weights()
                      ? 1.0 / d
                      : (es.eigenvectors().col(j).cwiseAbs2().array() * w.array()).sum();
    double ev = es.eigenvalues()(j);
    pairs.emplace_back(ev <= floor ? 0.0 : ev, mass);
  }
  return SingularValueFunction::from_masses(std::move(pairs));
}

double lp_norm(const SingularValueFunction& s, double p) {
  check_exponent(p, "p");
  if (p == kInf) return s.top();
  const auto& st = s.steps();
  if (p <= 32.0) {
    double sum = 0.0;
    for (size_t j = 0; j < st.size(); ++j) sum += std::pow(st[j].value, p) * s.mass(j);
    return std::pow(sum, 1.0 / p);
  }
  std::vector<double> terms;
  for (size_t j = 0; j < st.size(); ++j)
    terms.push_back(st[j].value > 0.0 ? p * std::log(st[j].value) + std::log(s.mass(j)) : -kInf);
  double l = log_sum_exp(terms);
  return l == -kInf ? 0.0 : std::exp(l / p);
}

double lorentz_norm(const SingularValueFunction& s, double p, double q) {
  check_exponent(p, "p");
  check_exponent(q, "q");
  if (p == kInf) throw InvalidInput("Lorentz exponent p must be finite");
  if (q == kInf) return weak_norm(s, p);
  // int_{c_{j-1}}^{c_j} v^q t^{q/p - 1} dt = v^q (p/q)(c_j^{q/p} - c_{j-1}^{q/p})
  const auto& st = s.steps();
  const double r = q / p;
  std::vector<double> terms;
  double prev = 0.0;
  for (const auto& step : st) {
    double inc = std::pow(step.cum_weight, r) - std::pow(prev, r);
    prev = step.cum_weight;
    if (step.value <= 0.0 || inc <= 0.0) {
      terms.push_back(-kInf);
      continue;
    }
    terms.push_back(q * std::log(step.value) + std::log(p / q) + std::log(inc));
  }
  if (q / p <= 32.0 && q <= 32.0) {
    double sum = 0.0;
    for (double t : terms) sum += t == -kInf ? 0.0 : std::exp(t);
    return std::pow(sum, 1.0 / q);
  }
  double l = log_sum_exp(terms);
  return l == -kInf ? 0.0 : std::exp(l / q);
}

double weak_norm(const SingularValueFunction& s, double p) {
  if (!(p >= 1.0)) throw InvalidInput("weak norm needs p >= 1");
  double best = 0.0;
  for (const auto& step : s.steps())
    best = std::max(best, step.value * std::pow(step.cum_weight, 1.0 / p));
  return best;
}

double weak_norm_by_distribution(const SingularValueFunction& s, double p) {
  if (!(p >= 1.0)) throw InvalidInput("weak norm needs p >= 1");
  // lambda * distribution(lambda)^(1/p) is increasing between consecutive
  // values and jumps down at each value, so the sup is the limit from below
  // at each breakpoint value.
  double best = 0.0;
  for (const auto& step : s.steps()) {
    double lambda = step.value;
    if (lambda <= 0.0) continue;
    double below = std::nextafter(lambda, 0.0);
    best = std::max(best, lambda * std::pow(distribution(s, below), 1.0 / p));
  }
  return best;
}

double distribution(const SingularValueFunction& s, double lambda) {
  if (!(lambda > 0.0)) throw InvalidInput("distribution needs lambda > 0");
  double mass = 0.0;
  for (const auto& step : s.steps())
    if (step.value > lambda) mass = step.cum_weight;
  return mass;
}

}  // namespace ncmart
