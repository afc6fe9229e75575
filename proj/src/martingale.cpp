#include "ncmart/martingale.hpp"

#include <algorithm>
#include <cmath>

#include "ncmart/fractional.hpp"
#include "ncmart/random.hpp"

namespace ncmart {

namespace {

double residual_scale(const Operator& x, const Tower& t) { return std::max(1.0, t.l2_norm(x)); }

// sqrt of the values of a positive operator's step function
SingularValueFunction sqrt_values(const SingularValueFunction& s) {
  std::vector<SingularValueFunction::Step> steps = s.steps();
  for (auto& st : steps) st.value = std::sqrt(st.value);
  return SingularValueFunction::from_steps(std::move(steps));
}

Operator square_sum(const MartingaleSequence& m, int n, bool column) {
  const int d = m.tower().ambient_dim();
  Operator s = Operator::Zero(d, d);
  for (int k = 1; k <= n; ++k) {
    const Operator& dx = m.difference(k);
    s += column ? Operator(dx.adjoint() * dx) : Operator(dx * dx.adjoint());
  }
  return s;
}

Operator psd_sqrt(const Operator& x) {
  Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (x + x.adjoint()));
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed", operator_hash(x));
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
}

double top_eigenvalue(const Operator& h) {
  Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed", operator_hash(h));
  return es.eigenvalues().maxCoeff();
}

double square_norm(const Tower& t, const std::vector<Operator>& parts, bool column, double p) {
  const int d = t.ambient_dim();
  Operator s = Operator::Zero(d, d);
  for (const auto& a : parts) s += column ? Operator(a.adjoint() * a) : Operator(a * a.adjoint());
  return lp_norm(sqrt_values(positive_value_function(t, s)), p);
}

void check_p(double p) {
  if (!(p > 0.0)) throw InvalidInput("exponent p must be positive");
}

}  // namespace

MartingaleSequence::MartingaleSequence(TowerPtr tower, Operator start,
                                       std::vector<Operator> differences)
    : tower_(std::move(tower)), start_(std::move(start)), diffs_(std::move(differences)) {
  if (!tower_) throw InvalidInput("martingale without a tower");
  const Tower& t = *tower_;
  if (static_cast<int>(diffs_.size()) > t.levels())
    throw InvalidInput("martingale longer than the tower");
  t.check_dim(start_);
  if (t.l2_norm(start_ - t.expectation(0, start_)) > 1e-9 * residual_scale(start_, t))
    throw InvalidInput("martingale start is not in the level-0 algebra");
  for (int k = 1; k <= length(); ++k) {
    const Operator& dx = diffs_[k - 1];
    t.check_dim(dx);
    if (t.l2_norm(dx - t.difference(k, dx)) > 1e-9 * residual_scale(dx, t))
      throw InvalidInput("difference " + std::to_string(k) + " is not in D_" + std::to_string(k));
  }
}

MartingaleSequence::MartingaleSequence(TowerPtr tower, std::vector<Operator> differences)
    : MartingaleSequence(tower,
                         Operator::Zero(tower ? tower->ambient_dim() : 0,
                                        tower ? tower->ambient_dim() : 0),
                         std::move(differences)) {}

Operator MartingaleSequence::value(int n) const {
  if (n < 0 || n > length()) throw InvalidInput("martingale index out of range");
  Operator x = start_;
  for (int k = 1; k <= n; ++k) x += diffs_[k - 1];
  return x;
}

MartingaleSequence MartingaleSequence::adjoint() const {
  std::vector<Operator> d;
  d.reserve(diffs_.size());
  for (const auto& x : diffs_) d.push_back(x.adjoint());
  return MartingaleSequence(tower_, start_.adjoint(), std::move(d));
}

MartingaleSequence adapt(const TowerPtr& t, const Operator& x) {
  t->check_dim(x);
  std::vector<Operator> d;
  for (int k = 1; k <= t->levels(); ++k) d.push_back(t->difference(k, x));
  return MartingaleSequence(t, t->expectation(0, x), std::move(d));
}

Operator column_square_function(const MartingaleSequence& m, int n) {
  if (n < 1 || n > m.length()) throw InvalidInput("square function index out of range");
  return psd_sqrt(square_sum(m, n, true));
}

Operator row_square_function(const MartingaleSequence& m, int n) {
  if (n < 1 || n > m.length()) throw InvalidInput("square function index out of range");
  return psd_sqrt(square_sum(m, n, false));
}

double hardy_column_norm(const MartingaleSequence& m, double p) {
  check_p(p);
  return square_norm(m.tower(), m.differences(), true, p);
}

double hardy_row_norm(const MartingaleSequence& m, double p) {
  check_p(p);
  return square_norm(m.tower(), m.differences(), false, p);
}

MixedHardyBound hardy_mixed_upper(const MartingaleSequence& m, double p) {
  check_p(p);
  if (p >= 2.0) throw InvalidInput("hardy_mixed_upper needs p < 2; use hardy_mixed_max");
  const Tower& t = m.tower();
  const int n = m.length();

  // Candidate column parts per difference; the row part is dx - a.
  std::vector<std::vector<Operator>> cand(n);
  for (int k = 1; k <= n; ++k) {
    const Operator& dx = m.difference(k);
    auto& c = cand[k - 1];
    c.push_back(dx);
    c.push_back(Operator::Zero(dx.rows(), dx.cols()));
    c.push_back(t.difference(k, Operator(dx.triangularView<Eigen::Upper>())));
    c.push_back(t.difference(k, Operator(dx.triangularView<Eigen::StrictlyLower>())));
    Eigen::JacobiSVD<Operator> svd(dx, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const long half = (dx.rows() + 1) / 2;
    Operator top = svd.matrixU().leftCols(half) *
                   svd.singularValues().head(half).asDiagonal() *
                   svd.matrixV().leftCols(half).adjoint();
    c.push_back(t.difference(k, top));
    c.push_back(0.5 * (dx + dx.adjoint()));
  }

  auto evaluate = [&](const std::vector<Operator>& a) {
    std::vector<Operator> b(n);
    for (int k = 0; k < n; ++k) b[k] = m.difference(k + 1) - a[k];
    return square_norm(t, a, true, p) + square_norm(t, b, false, p);
  };

  MixedHardyBound best;
  best.value = kInf;
  std::vector<Operator> current;
  const size_t rules = n ? cand[0].size() : 0;
  for (size_t r = 0; r < std::max<size_t>(rules, 1); ++r) {
    std::vector<Operator> a(n);
    for (int k = 0; k < n; ++k) a[k] = cand[k][r];
    double v = evaluate(a);
    if (v < best.value) {
      best.value = v;
      current = a;
    }
  }
  // coordinate-wise convex interpolation toward each candidate
  const double thetas[] = {0.25, 0.5, 0.75, 1.0};
  for (int sweep = 0; sweep < 2; ++sweep) {
    bool improved = false;
    for (int k = 0; k < n; ++k) {
      const Operator base = current[k];
      bool took = false;
      for (size_t r = 0; r < cand[k].size() && !took; ++r) {
        for (double th : thetas) {
          current[k] = (1.0 - th) * base + th * cand[k][r];
          double v = evaluate(current);
          if (v < best.value * (1.0 - 1e-14)) {
            best.value = v;
            took = improved = true;
            break;
          }
        }
      }
      if (!took) current[k] = base;
    }
    if (!improved) break;
  }
  best.column_part = current;
  best.row_part.resize(n);
  for (int k = 0; k < n; ++k) best.row_part[k] = m.difference(k + 1) - current[k];
  if (n == 0) best.value = 0.0;
  return best;
}

double hardy_mixed_max(const MartingaleSequence& m, double p) {
  check_p(p);
  if (p < 2.0) throw InvalidInput("hardy_mixed_max needs p >= 2");
  return std::max(hardy_column_norm(m, p), hardy_row_norm(m, p));
}

double hd_norm(const MartingaleSequence& m, double p) {
  check_p(p);
  if (p == kInf) throw InvalidInput("hd_norm needs finite p");
  double s = 0.0;
  for (const auto& dx : m.differences()) s += std::pow(lp_norm(m.tower(), dx, p), p);
  return std::pow(s, 1.0 / p);
}

double bmo_column_norm(const MartingaleSequence& m) {
  const Tower& t = m.tower();
  const Operator a = m.final_value();
  double best = 0.0;
  for (int n = 1; n <= m.length(); ++n) {
    Operator y = a - t.expectation(n - 1, a);
    best = std::max(best, top_eigenvalue(t.expectation(n, Operator(y.adjoint() * y))));
  }
  return std::sqrt(std::max(0.0, best));
}

double bmo_row_norm(const MartingaleSequence& m) { return bmo_column_norm(m.adjoint()); }

double bmo_norm(const MartingaleSequence& m) {
  return std::max(bmo_column_norm(m), bmo_row_norm(m));
}

double lipschitz_ratio(const Tower& t, const Operator& x, int n, const Operator& e, double beta) {
  Operator y = x - t.expectation(n, x);
  double te = t.trace(e).real();
  if (!(te > 0.0)) throw InvalidInput("projection with zero trace");
  return t.l2_norm(y * e) / std::pow(te, beta + 0.5);
}

LipschitzBound lipschitz_column_lower(const MartingaleSequence& m, double beta,
                                      const LipschitzStrategy& strategy) {
  if (!(beta >= 0.0)) throw InvalidInput("beta must be >= 0");
  const Tower& t = m.tower();
  const int d = t.ambient_dim();
  const Operator x = m.final_value();
  LipschitzBound out;
  out.value = m.length() >= 1 ? operator_norm(t.expectation(1, x)) : 0.0;
  out.exact = true;
  Rng rng(derive_seed(strategy.seed, {0x11b5}));

  for (int n = 1; n <= m.length(); ++n) {
    Operator y = x - t.expectation(n, x);
    Operator z = t.expectation(n, Operator(y.adjoint() * y));
    // ||y e||_2^2 = tau(z e) for projections e in level n
    auto consider = [&](const Operator& e) {
      double te = t.trace(e).real();
      if (te <= 1e-14) return;
      if (t.l2_norm(e - t.expectation(n, e)) > 1e-8) return;
      double r = std::sqrt(std::max(0.0, t.trace(Operator(z * e)).real())) / std::pow(te, beta + 0.5);
      if (r > out.value) {
        out.value = r;
        out.level = n;
      }
    };
    // Spectral projections chi_[lambda, inf)(h) for h in level n.
    auto spectral_family = [&](const Operator& h) {
      Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (h + h.adjoint()));
      const auto& ev = es.eigenvalues();
      const double tol = 1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff());
      Operator e = Operator::Zero(d, d);
      for (int j = d - 1; j >= 0; --j) {
        e += es.eigenvectors().col(j) * es.eigenvectors().col(j).adjoint();
        if (j == 0 || ev(j) - ev(j - 1) > tol) consider(e);
      }
    };
    spectral_family(z);
    for (int r = 0; r < strategy.random_projections; ++r)
      spectral_family(t.expectation(n, rng.hermitian_matrix(d)));

    const auto& atoms = t.atoms(n);
    if (!atoms) {
      out.exact = false;
      continue;
    }
    const int na = static_cast<int>(atoms->size());
    std::vector<double> zmass(na), mass(na);
    for (int i = 0; i < na; ++i)
      for (int idx : (*atoms)[i]) {
        zmass[i] += t.trace_weights()(idx) * z(idx, idx).real();
        mass[i] += t.trace_weights()(idx);
      }
    auto ratio = [&](double zm, double ms) {
      return ms > 0.0 ? std::sqrt(std::max(0.0, zm)) / std::pow(ms, beta + 0.5) : 0.0;
    };
    if (na <= strategy.exhaustive_atom_limit) {
      // Gray-code walk over all nonempty unions of atoms.
      double zm = 0.0, ms = 0.0;
      std::vector<char> in(na, 0);
      for (std::uint64_t g = 1; g < (1ULL << na); ++g) {
        int bit = __builtin_ctzll(g);
        in[bit] ^= 1;
        double s = in[bit] ? 1.0 : -1.0;
        zm += s * zmass[bit];
        ms += s * mass[bit];
        double r = ratio(zm, ms);
        if (r > out.value) {
          out.value = r;
          out.level = n;
        }
      }
    } else {
      out.exact = false;
      std::vector<int> order(na);
      for (int i = 0; i < na; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return zmass[a] / mass[a] > zmass[b] / mass[b];
      });
      double zm = 0.0, ms = 0.0;
      for (int i : order) {
        double r1 = ratio(zmass[i], mass[i]);
        zm += zmass[i];
        ms += mass[i];
        double r = std::max(r1, ratio(zm, ms));
        if (r > out.value) {
          out.value = r;
          out.level = n;
        }
      }
    }
  }
  // Levels past the martingale's length add nothing only if it ends at the top.
  if (m.length() < t.levels()) out.exact = false;
  return out;
}

AtomCertificate validate_atom(const Tower& t, const Operator& a, int n, const Operator& e,
                              double p, AtomSide side) {
  t.check_dim(a);
  t.check_dim(e);
  t.check_level(n, false);
  if (!(p > 0.0 && p < 2.0)) throw InvalidInput("atom exponent p must be in (0,2)");
  const double proj_res =
      std::max((e * e - e).cwiseAbs().maxCoeff(), (e - e.adjoint()).cwiseAbs().maxCoeff());
  if (proj_res > 1e-8) throw InvalidInput("e is not a projection");
  if (t.l2_norm(e - t.expectation(n, e)) > 1e-8)
    throw InvalidInput("e is not in level " + std::to_string(n));
  const double te = t.trace(e).real();
  if (te <= 1e-14) throw InvalidInput("atom projection is zero");

  AtomCertificate c;
  c.level = n;
  c.projection = e;
  c.p = p;
  c.side = side;
  c.mean_zero_residual = t.l2_norm(t.expectation(n, a));
  c.support_residual =
      side == AtomSide::Column ? t.l2_norm(Operator(a * e - a)) : t.l2_norm(Operator(e * a - a));
  const double a2 = t.l2_norm(a);
  c.l2_slack = std::pow(te, 0.5 - 1.0 / p) - a2;
  c.degenerate = a2 == 0.0;
  return c;
}

Operator make_atom(const Tower& t, int n, const Operator& e, double p, int m, std::uint64_t seed) {
  t.check_level(n, false);
  t.check_level(m, false);
  if (m <= n) throw InvalidInput("atom construction needs a strictly deeper level");
  if (t.difference_dim(m) == 0)
    throw InvalidInput("level " + std::to_string(m) + " has an empty difference subspace");
  const double te = t.trace(e).real();
  if (te <= 1e-14) throw InvalidInput("atom projection is zero");
  Rng rng(seed);
  for (int attempt = 0; attempt < 16; ++attempt) {
    Operator v = t.from_coordinates(m, rng.complex_vector(t.difference_dim(m)));
    Operator a = v * e;
    double norm = t.l2_norm(a);
    if (norm > 1e-12) return a * (std::pow(te, 0.5 - 1.0 / p) / norm);
  }
  throw NumericalError("could not draw a nonzero atom", operator_hash(e));
}

AtomConstant atom_constant(const Tower& t, const Operator& a, int n, const Operator& e, double p,
                           double q, const CoefficientSequence& coeffs) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("atom_constant needs 0 < p < 1");
  if (!(q > p && q < 2.0)) throw InvalidInput("atom_constant needs p < q < 2");
  AtomCertificate cert = validate_atom(t, a, n, e, p, AtomSide::Column);
  if (!cert.valid()) throw InvalidInput("not a (p,2) column atom");
  AtomConstant out;
  out.gamma = 1.0 / p - 1.0 / q;
  if (cert.degenerate) return out;

  // Share ownership without copying: a non-owning pointer with a no-op deleter.
  TowerPtr view(std::shared_ptr<const Tower>{}, &t);
  MartingaleSequence ma = adapt(view, a);
  MartingaleSequence ta = out.gamma < 1.0 ? fractional_integral(ma, out.gamma, coeffs)
                                          : iterated_transform(ma, out.gamma, coeffs);
  Operator ya = ta.final_value();
  const double te = t.trace(e).real();
  out.constant = t.l2_norm(ya) / std::pow(te, 0.5 - 1.0 / q);
  out.mean_zero_residual = t.l2_norm(t.expectation(n, ya));
  out.support_residual = t.l2_norm(Operator(ya * e - ya));
  return out;
}

}  // namespace ncmart
