#include "ncmart/fractional.hpp"

#include <algorithm>
#include <cmath>

#include "ncmart/parallel.hpp"
#include "ncmart/random.hpp"

namespace ncmart {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::ClosedFormDyadic: return "closed_form_dyadic";
    case Provenance::ClosedFormAbelianDyadic: return "closed_form_abelian_dyadic";
    case Provenance::Optimized: return "optimized";
    case Provenance::UserSupplied: return "user_supplied";
  }
  return "unknown";
}

namespace {

struct StartResult {
  double ratio = 0.0;
  Eigen::VectorXcd coords;
};

// Top right singular vector of x, written to v; returns ||x||_inf. Small
// matrices use a dense eigensolver on x^*x. Larger ones run power iteration
// warm-started at v, whose Rayleigh quotient on the PSD matrix x^*x never
// decreases, so the alternating objective stays monotone either way.
double top_singular(const Operator& x, Eigen::VectorXcd& v) {
  if (x.rows() <= 128) {
    Eigen::SelfAdjointEigenSolver<Operator> es(x.adjoint() * x);
    const long last = x.cols() - 1;
    v = es.eigenvectors().col(last);
    return (x * v).norm();
  }
  double last = (x * v).norm();
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXcd w = x.adjoint() * (x * v);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    double cur = (x * v).norm();
    if (cur - last <= 1e-15 * cur) return cur;
    last = cur;
  }
  return (x * v).norm();
}

StartResult alternate(const Tower& t, int k, Eigen::VectorXcd c, Rng& rng,
                      const ZetaOptions& opt) {
  const int d = t.ambient_dim();
  const Eigen::VectorXd inv_w = t.trace_weights().cwiseInverse();
  c.normalize();
  Eigen::VectorXcd v = rng.complex_vector(d).normalized();
  Operator x = t.from_coordinates(k, c);
  double f = top_singular(x, v);
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (f == 0.0) break;
    Eigen::VectorXcd u = x * v / f;
    // argmax over the unit sphere of Re(u^* X(c) v): c = Q^* vec(u v^* W^{-1/2})
    Operator target = u * v.adjoint() * inv_w.asDiagonal();
    Eigen::VectorXcd g = t.coordinates(k, target);
    double ng = g.norm();
    if (ng == 0.0) break;
    c = g / ng;
    x = t.from_coordinates(k, c);
    double next = top_singular(x, v);
    if (next < f * (1.0 - 1e-12))
      throw NumericalError("zeta optimizer objective decreased at level " + std::to_string(k),
                           operator_hash(x));
    bool done = next - f <= opt.tol * next;
    f = std::max(f, next);
    if (done) break;
  }
  return {f, c};
}

}  // namespace

ZetaCertificate zeta_optimize(const Tower& t, int k, const ZetaOptions& opt) {
  t.check_level(k, false);
  if (opt.restarts < 1) throw InvalidInput("zeta_optimize needs restarts >= 1");
  const int m = t.difference_dim(k);
  if (m == 0)
    throw InvalidInput("level " + std::to_string(k) + " is degenerate: D_" + std::to_string(k) +
                       " = {0}");
  const int starts = opt.restarts + (opt.basis_starts ? m : 0);
  std::vector<StartResult> results(starts);
  parallel_for(starts, opt.threads, [&](int s) {
    Rng rng(derive_seed(opt.seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(s)}));
    Eigen::VectorXcd c;
    if (s < opt.restarts) {
      c = rng.complex_vector(m);
    } else {
      c = Eigen::VectorXcd::Zero(m);
      c(s - opt.restarts) = 1.0;
    }
    results[s] = alternate(t, k, std::move(c), rng, opt);
  });

  ZetaCertificate cert;
  cert.level = k;
  for (int s = 0; s < starts; ++s) {
    cert.start_ratios.push_back(results[s].ratio);
    if (cert.best_start < 0 || results[s].ratio > results[cert.best_start].ratio) cert.best_start = s;
  }
  cert.maximizer = t.from_coordinates(k, results[cert.best_start].coords);
  cert.ratio = std::max(results[cert.best_start].ratio, operator_norm(cert.maximizer));
  cert.zeta = 1.0 / (cert.ratio * cert.ratio);
  return cert;
}

std::optional<std::vector<double>> closed_form_zeta(const Tower& t) {
  const auto& spec = t.spec();
  std::vector<double> z;
  if (const auto* tm = std::get_if<TensorMatrix>(&spec.kind)) {
    for (int x : tm->factor_dims)
      if (x != 2) return std::nullopt;
    for (size_t k = 1; k <= tm->factor_dims.size(); ++k) z.push_back(std::ldexp(1.0, -int(k)));
    return z;
  }
  if (const auto* ab = std::get_if<AbelianDyadic>(&spec.kind)) {
    for (int k = 1; k <= ab->levels; ++k) z.push_back(std::ldexp(1.0, -(k - 1)));
    // With E_0 = 0 the constants join D_1 and (c, c') on two atoms has ratio sqrt(2).
    if (t.origin() == Origin::Zero) z[0] = 0.5;
    return z;
  }
  return std::nullopt;
}

CoefficientSequence zeta_sequence(const Tower& t, ZetaMethod method,
                                  const std::vector<double>& user_values, const ZetaOptions& opt) {
  CoefficientSequence out;
  if (method == ZetaMethod::UserSupplied) {
    if (user_values.empty()) throw InvalidInput("user-supplied coefficients are empty");
    for (size_t i = 0; i < user_values.size(); ++i)
      if (!(user_values[i] > 0.0 && user_values[i] <= 1.0))
        throw InvalidInput("coefficient " + std::to_string(i + 1) + " outside (0,1]");
    out.values = user_values;
    out.provenance = Provenance::UserSupplied;
  } else {
    for (int k = 1; k <= t.levels(); ++k)
      if (t.difference_dim(k) == 0)
        throw InvalidInput("level " + std::to_string(k) + " is degenerate: D_" +
                           std::to_string(k) + " = {0}");
    auto closed = method == ZetaMethod::Auto ? closed_form_zeta(t) : std::nullopt;
    if (closed) {
      out.values = *closed;
      out.provenance = t.kind() == TowerKind::Abelian ? Provenance::ClosedFormAbelianDyadic
                                                      : Provenance::ClosedFormDyadic;
    } else {
      out.provenance = Provenance::Optimized;
      out.restarts = opt.restarts;
      out.tol = opt.tol;
      for (int k = 1; k <= t.levels(); ++k) {
        out.certificates.push_back(zeta_optimize(t, k, opt));
        out.values.push_back(out.certificates.back().zeta);
      }
    }
  }
  for (size_t i = 1; i < out.values.size(); ++i)
    if (out.values[i] > out.values[i - 1] * (1.0 + 1e-12))
      out.warnings.push_back("coefficients increase at level " + std::to_string(i + 1));
  return out;
}

EmbeddingReport embedding_constants_check(const Tower& t, int k, double zeta_k, int samples,
                                          std::uint64_t seed) {
  t.check_level(k, false);
  if (!(zeta_k > 0.0 && zeta_k <= 1.0)) throw InvalidInput("zeta_k outside (0,1]");
  const int m = t.difference_dim(k);
  if (m == 0) throw InvalidInput("level " + std::to_string(k) + " is degenerate");
  const int d = t.ambient_dim();
  EmbeddingReport r;
  r.level = k;
  r.zeta = zeta_k;
  r.samples = samples;
  const double root = 1.0 / std::sqrt(zeta_k);
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(s)}));
    Operator x;
    // alternate spread-out samples with projected rank-one ones, which sit
    // near the extremals of both inequalities
    if (s % 2 == 0)
      x = t.from_coordinates(k, rng.complex_vector(m));
    else
      x = t.difference(k, Operator(rng.complex_vector(d) * rng.complex_vector(d).adjoint()));
    double n2 = t.l2_norm(x);
    if (n2 < 1e-12) continue;
    x /= n2;
    auto svf = singular_value_function(t, x);
    double ninf = svf.top(), n1 = lp_norm(svf, 1.0);
    r.max_inf_over_2 = std::max(r.max_inf_over_2, ninf);
    r.max_2_over_1 = std::max(r.max_2_over_1, 1.0 / n1);
    r.min_slack_inf_2 = std::min(r.min_slack_inf_2, root - ninf);
    r.min_slack_2_1 = std::min(r.min_slack_2_1, 2.0 * root * n1 - 1.0);
  }
  return r;
}

MartingaleSequence coefficient_transform(const MartingaleSequence& m,
                                         const std::vector<double>& multipliers) {
  if (static_cast<int>(multipliers.size()) < m.length())
    throw InvalidInput("coefficient sequence shorter than the martingale");
  std::vector<Operator> d;
  d.reserve(m.length());
  for (int k = 1; k <= m.length(); ++k) d.push_back(multipliers[k - 1] * m.difference(k));
  return MartingaleSequence(m.tower_ptr(), std::move(d));
}

namespace {

std::vector<double> powers(const CoefficientSequence& coeffs, double e) {
  std::vector<double> out;
  for (double z : coeffs.values) out.push_back(std::pow(z, e));
  return out;
}

}  // namespace

MartingaleSequence fractional_integral(const MartingaleSequence& m, double alpha,
                                       const CoefficientSequence& coeffs) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidInput("fractional order must be in (0,1); use iterated_transform");
  return coefficient_transform(m, powers(coeffs, alpha));
}

MartingaleSequence iterated_transform(const MartingaleSequence& m, double gamma,
                                      const CoefficientSequence& coeffs) {
  if (!(gamma > 0.0)) throw InvalidInput("transform order must be positive");
  return coefficient_transform(m, powers(coeffs, gamma));
}

SelfAdjointnessReport selfadjointness_check(const MartingaleSequence& x,
                                            const MartingaleSequence& y, double alpha,
                                            const CoefficientSequence& coeffs) {
  if (x.tower_ptr() != y.tower_ptr() && x.tower().ambient_dim() != y.tower().ambient_dim())
    throw InvalidInput("self-adjointness check needs martingales on the same tower");
  if (x.length() != y.length()) throw InvalidInput("martingales differ in length");
  const Tower& t = x.tower();
  Operator ix = fractional_integral(x, alpha, coeffs).final_value();
  Operator iy = fractional_integral(y, alpha, coeffs).final_value();
  SelfAdjointnessReport r;
  r.lhs = t.trace(Operator(ix * y.final_value().adjoint()));
  r.rhs = t.trace(Operator(x.final_value() * iy.adjoint()));
  r.difference = std::abs(r.lhs - r.rhs);
  r.holds = r.difference <= 1e-10 * std::max(1.0, std::abs(r.lhs));
  return r;
}

OptimalityReport coefficient_optimality(const Tower& t, const CoefficientSequence& nu,
                                        const CoefficientSequence& zeta,
                                        std::optional<double> claimed_constant) {
  OptimalityReport r;
  const int n = std::min(nu.size(), zeta.size());
  for (int k = 1; k <= n; ++k) {
    double ratio = nu.at(k) / zeta.at(k);
    if (ratio > r.max_ratio) {
      r.max_ratio = ratio;
      r.argmax_level = k;
    }
  }
  if (!claimed_constant) return r;
  const double c = *claimed_constant;
  TowerPtr view(std::shared_ptr<const Tower>{}, &t);
  for (int k = 1; k <= std::min(n, t.levels()); ++k) {
    Operator a = static_cast<int>(zeta.certificates.size()) >= k
                     ? zeta.certificates[k - 1].maximizer
                     : zeta_optimize(t, k).maximizer;
    a /= t.l2_norm(a);
    std::vector<Operator> d(k, Operator::Zero(t.ambient_dim(), t.ambient_dim()));
    d[k - 1] = std::sqrt(nu.at(k)) * a;
    double ratio = bmo_column_norm(MartingaleSequence(view, std::move(d)));
    r.single_difference_ratios.push_back(ratio);
    if (ratio > c * (1.0 + 1e-9)) r.claim_holds = false;
  }
  return r;
}

}  // namespace ncmart
