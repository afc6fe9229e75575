#include "ncmart/algebra.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "ncmart/random.hpp"

namespace ncmart {

namespace {

using Triplet = Eigen::Triplet<Complex>;

SparseBlock make_block(int rows, int cols, const std::vector<Triplet>& entries) {
  SparseBlock q(rows, cols);
  q.setFromTriplets(entries.begin(), entries.end());
  q.makeCompressed();
  return q;
}

// Columns are vec(W diag(sqrt w)) for W a tensor product of clock-and-shift
// unitaries X^a Z^b on factors 1..k and the identity on the rest.
SparseBlock tensor_block(const std::vector<int>& dims, int k, bool include_identity) {
  const int nf = static_cast<int>(dims.size());
  int d = 1;
  for (int x : dims) d *= x;
  std::vector<int> stride(nf, 1);
  for (int i = nf - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];

  long count = include_identity ? dims[k - 1] * dims[k - 1] : dims[k - 1] * dims[k - 1] - 1;
  for (int i = 0; i < k - 1; ++i) count *= dims[i] * dims[i];

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Triplet> entries;
  entries.reserve(static_cast<size_t>(count) * d);
  std::vector<int> a(k), b(k);
  for (long col = 0; col < count; ++col) {
    long rest = col;
    // factor k is the fastest-varying digit
    for (int i = k - 1; i >= 0; --i) {
      int radix = dims[i] * dims[i];
      int skip = 0;
      if (i == k - 1 && !include_identity) {
        radix -= 1;
        skip = 1;
      }
      int pair = static_cast<int>(rest % radix) + skip;
      rest /= radix;
      a[i] = pair / dims[i];
      b[i] = pair % dims[i];
    }
    for (int c = 0; c < d; ++c) {
      int r = c;
      double phase = 0.0;
      for (int i = 0; i < k; ++i) {
        int ci = (c / stride[i]) % dims[i];
        int ri = (ci + a[i]) % dims[i];
        r += (ri - ci) * stride[i];
        phase += 2.0 * std::numbers::pi * b[i] * ci / dims[i];
      }
      entries.emplace_back(r + c * d, static_cast<int>(col), std::polar(scale, phase));
    }
  }
  return make_block(d * d, static_cast<int>(count), entries);
}

SparseBlock identity_block(int d) {
  std::vector<Triplet> entries;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < d; ++i) entries.emplace_back(i + i * d, 0, s);
  return make_block(d * d, 1, entries);
}

// Normalized Haar functions of level k on 2^L points.
SparseBlock haar_block(int L, int k, bool include_constant) {
  const int d = 1 << L;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Triplet> entries;
  int col = 0;
  if (include_constant) {
    for (int i = 0; i < d; ++i) entries.emplace_back(i + i * d, col, s);
    ++col;
  }
  const int size = 1 << (L - k + 1);
  const double c = std::pow(2.0, 0.5 * (k - 1)) * s;
  for (int j = 0; j < (1 << (k - 1)); ++j, ++col) {
    for (int i = 0; i < size; ++i) {
      int idx = j * size + i;
      entries.emplace_back(idx + idx * d, col, i < size / 2 ? c : -c);
    }
  }
  return make_block(d * d, col, entries);
}

struct Span {
  std::vector<Eigen::VectorXcd> basis;

  Eigen::VectorXcd residual(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd r = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) r -= b.dot(r) * b;
    return r;
  }

  // Column-wise relative distance of V from the span, all columns at once.
  Eigen::VectorXd relative_residuals(const Eigen::MatrixXcd& V) const {
    Eigen::MatrixXcd Q(V.rows(), static_cast<long>(basis.size()));
    for (size_t i = 0; i < basis.size(); ++i) Q.col(static_cast<long>(i)) = basis[i];
    Eigen::MatrixXcd R = V;
    for (int pass = 0; pass < 2; ++pass) R -= Q * (Q.adjoint() * R);
    Eigen::VectorXd out(V.cols());
    for (long j = 0; j < V.cols(); ++j) out(j) = R.col(j).norm() / std::max(1.0, V.col(j).norm());
    return out;
  }

  // Returns true if v added a new direction.
  bool add(const Eigen::VectorXcd& v) {
    double nv = v.norm();
    if (nv == 0.0) return false;
    Eigen::VectorXcd r = residual(v / nv);
    double nr = r.norm();
    if (nr < 1e-12) return false;
    basis.push_back(r / nr);
    return true;
  }
};

}  // namespace

TowerPtr build_tower(const FiltrationSpec& spec) {
  std::shared_ptr<Tower> t(new Tower());
  t->spec_ = spec;

  if (const auto* tm = std::get_if<TensorMatrix>(&spec.kind)) {
    if (tm->factor_dims.empty()) throw InvalidInput("tensor tower needs at least one factor");
    long d = 1;
    for (int x : tm->factor_dims) {
      if (x < 2) throw InvalidInput("tensor factor dimension must be >= 2");
      d *= x;
      if (d > 4096) throw InvalidInput("tensor tower too large (ambient dimension > 4096)");
    }
    t->kind_ = TowerKind::Tensor;
    t->origin_ = spec.origin.value_or(Origin::Zero);
    t->dim_ = static_cast<int>(d);
    t->weights_ = Eigen::VectorXd::Constant(d, 1.0 / d);
    bool zero = t->origin_ == Origin::Zero;
    t->blocks_.push_back(zero ? SparseBlock(d * d, 0) : identity_block(t->dim_));
    for (int k = 1; k <= static_cast<int>(tm->factor_dims.size()); ++k)
      t->blocks_.push_back(tensor_block(tm->factor_dims, k, zero && k == 1));
  } else if (const auto* ab = std::get_if<AbelianDyadic>(&spec.kind)) {
    if (ab->levels < 1) throw InvalidInput("abelian tower needs at least one level");
    if (ab->levels > 12) throw InvalidInput("abelian tower too large (levels > 12)");
    const int L = ab->levels;
    const int d = 1 << L;
    t->kind_ = TowerKind::Abelian;
    t->origin_ = spec.origin.value_or(Origin::Scalars);
    t->dim_ = d;
    t->weights_ = Eigen::VectorXd::Constant(d, 1.0 / d);
    bool zero = t->origin_ == Origin::Zero;
    t->blocks_.push_back(zero ? SparseBlock(d * d, 0) : identity_block(d));
    for (int k = 1; k <= L; ++k) t->blocks_.push_back(haar_block(L, k, zero && k == 1));
  } else {
    const auto& cs = std::get<CustomSubalgebraBases>(spec.kind);
    if (cs.spanning_sets.empty()) throw InvalidInput("custom tower has no levels");
    int d = -1;
    for (const auto& set : cs.spanning_sets)
      for (const auto& x : set) {
        if (x.rows() != x.cols()) throw InvalidInput("custom tower: generators must be square");
        if (d < 0) d = static_cast<int>(x.rows());
        if (x.rows() != d) throw DimensionMismatch(d, x.rows());
      }
    if (d <= 0) throw InvalidInput("custom tower: all spanning sets are empty");
    t->kind_ = TowerKind::Custom;
    t->origin_ = spec.origin.value_or(Origin::Zero);
    t->dim_ = d;
    if (cs.weights.empty()) {
      t->weights_ = Eigen::VectorXd::Constant(d, 1.0 / d);
    } else {
      if (static_cast<int>(cs.weights.size()) != d)
        throw DimensionMismatch(d, static_cast<long>(cs.weights.size()));
      t->weights_ = Eigen::Map<const Eigen::VectorXd>(cs.weights.data(), d);
      if (t->weights_.minCoeff() <= 0.0) throw InvalidInput("trace weights must be positive");
      if (std::abs(t->weights_.sum() - 1.0) > 1e-9)
        throw InvalidInput("trace weights must sum to 1");
    }
    t->sqrt_w_ = t->weights_.cwiseSqrt();
    t->uniform_ = (t->weights_.array() == t->weights_(0)).all();

    const Eigen::VectorXcd one = t->to_vector(identity(d));
    std::vector<Span> spans;
    for (size_t n = 0; n < cs.spanning_sets.size(); ++n) {
      Span s;
      for (const auto& x : cs.spanning_sets[n]) s.add(t->to_vector(x));
      std::string where = "custom tower level " + std::to_string(n + 1) + ": ";
      auto inside = [&](const Eigen::VectorXcd& v) {
        return s.residual(v).norm() <= 1e-8 * std::max(1.0, v.norm());
      };
      if (!inside(one)) throw InvalidInput(where + "span is not unital");
      // A bilinear residual that vanishes on random pairs vanishes identically
      // (almost surely), so a few random elements replace all m^2 products.
      const long m = static_cast<long>(s.basis.size());
      Rng rng(0x5eed + n);
      auto random_element = [&] {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<long>(d) * d);
        for (const auto& b : s.basis) v += rng.complex_normal() * b;
        return t->from_vector(v);
      };
      constexpr int kProbes = 4;
      Eigen::MatrixXcd adj(static_cast<long>(d) * d, kProbes), prod(static_cast<long>(d) * d, kProbes);
      for (int r = 0; r < kProbes && m > 0; ++r) {
        Operator a = random_element(), b = random_element();
        adj.col(r) = t->to_vector(a.adjoint());
        prod.col(r) = t->to_vector(a * b);
      }
      if (m > 0 && s.relative_residuals(adj).maxCoeff() > 1e-8)
        throw InvalidInput(where + "span is not *-closed");
      if (m > 0 && s.relative_residuals(prod).maxCoeff() > 1e-8)
        throw InvalidInput(where + "span is not closed under multiplication");
      if (n > 0)
        for (const auto& v : spans.back().basis)
          if (!inside(v))
            throw InvalidInput(where + "does not contain level " + std::to_string(n));
      spans.push_back(std::move(s));
    }

    // tau must be tracial on the top algebra: tr(D b_i b_j) symmetric in (i, j).
    const auto& top = spans.back().basis;
    const int m = static_cast<int>(top.size());
    Eigen::MatrixXcd A(m, d * d), B(d * d, m);
    for (int i = 0; i < m; ++i) {
      Operator bi = t->from_vector(top[i]);
      Operator left = t->weights_.asDiagonal() * bi;
      Operator tr = bi.transpose();
      A.row(i) = Eigen::Map<const Eigen::VectorXcd>(left.data(), d * d).transpose();
      B.col(i) = Eigen::Map<const Eigen::VectorXcd>(tr.data(), d * d);
    }
    Eigen::MatrixXcd T = A * B;
    double scale = std::max(1.0, T.cwiseAbs().maxCoeff());
    if ((T - T.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
      throw InvalidInput("custom tower: trace weights are not tracial on the top level");

    // Nested orthonormal bases, identity first.
    Span acc;
    bool zero = t->origin_ == Origin::Zero;
    auto to_block = [&](const std::vector<Eigen::VectorXcd>& cols) {
      Eigen::MatrixXcd dense(d * d, static_cast<int>(cols.size()));
      for (size_t i = 0; i < cols.size(); ++i) dense.col(static_cast<int>(i)) = cols[i];
      SparseBlock q = dense.sparseView();
      q.makeCompressed();
      return q;
    };
    if (!zero) acc.add(one);
    t->blocks_.push_back(to_block(acc.basis));
    for (const auto& s : spans) {
      size_t before = acc.basis.size();
      acc.add(one);
      for (const auto& v : s.basis) acc.add(v);
      t->blocks_.push_back(to_block(std::vector<Eigen::VectorXcd>(
          acc.basis.begin() + static_cast<long>(before), acc.basis.end())));
    }
  }
  t->finish();
  return t;
}

void Tower::finish() {
  sqrt_w_ = weights_.cwiseSqrt();
  uniform_ = (weights_.array() == weights_(0)).all();
  const int L = levels();
  atoms_.assign(L + 1, std::nullopt);
  const int d = dim_;
  if (kind_ == TowerKind::Abelian) {
    for (int n = 0; n <= L; ++n) {
      if (n == 0 && origin_ == Origin::Zero) continue;
      std::vector<std::vector<int>> groups(1 << n);
      const int size = d >> n;
      for (int i = 0; i < d; ++i) groups[i / size].push_back(i);
      atoms_[n] = std::move(groups);
    }
    return;
  }
  if (kind_ != TowerKind::Custom) return;
  // Diagonal custom levels: group indices on which every basis element agrees.
  std::vector<Eigen::VectorXcd> diag_cols;
  for (int n = 0; n <= L; ++n) {
    bool diagonal = true;
    const SparseBlock& q = blocks_[n];
    for (int c = 0; c < q.outerSize() && diagonal; ++c) {
      Eigen::VectorXcd col = Eigen::VectorXcd::Zero(d);
      for (SparseBlock::InnerIterator it(q, c); it; ++it) {
        int r = static_cast<int>(it.row()) % d, cc = static_cast<int>(it.row()) / d;
        if (r != cc) {
          diagonal = false;
          break;
        }
        col(r) = it.value() / sqrt_w_(r);
      }
      diag_cols.push_back(col);
    }
    if (!diagonal) break;
    if (n == 0 && origin_ == Origin::Zero) continue;
    std::vector<int> label(d, -1);
    std::vector<std::vector<int>> groups;
    for (int i = 0; i < d; ++i) {
      if (label[i] >= 0) continue;
      label[i] = static_cast<int>(groups.size());
      groups.push_back({i});
      for (int j = i + 1; j < d; ++j) {
        if (label[j] >= 0) continue;
        bool same = true;
        for (const auto& col : diag_cols)
          if (std::abs(col(i) - col(j)) > 1e-9 * std::max(1.0, std::abs(col(i)))) {
            same = false;
            break;
          }
        if (same) {
          label[j] = label[i];
          groups.back().push_back(j);
        }
      }
    }
    atoms_[n] = std::move(groups);
  }
}

std::string Tower::describe() const {
  std::ostringstream os;
  if (const auto* tm = std::get_if<TensorMatrix>(&spec_.kind)) {
    os << "tensor:";
    for (size_t i = 0; i < tm->factor_dims.size(); ++i) os << (i ? "," : "") << tm->factor_dims[i];
  } else if (const auto* ab = std::get_if<AbelianDyadic>(&spec_.kind)) {
    os << "abelian:" << ab->levels;
  } else {
    os << "custom(d=" << dim_ << ",levels=" << levels() << ")";
  }
  os << (origin_ == Origin::Zero ? " origin=zero" : " origin=scalars");
  return os.str();
}

void Tower::check_dim(const Operator& x) const {
  if (x.rows() != dim_) throw DimensionMismatch(dim_, x.rows());
  if (x.cols() != dim_) throw DimensionMismatch(dim_, x.cols());
}

void Tower::check_level(int n, bool allow_zero) const {
  if (n < (allow_zero ? 0 : 1) || n > levels())
    throw InvalidInput("level " + std::to_string(n) + " out of range [" +
                       std::to_string(allow_zero ? 0 : 1) + ", " + std::to_string(levels()) + "]");
}

Complex Tower::trace(const Operator& x) const {
  check_dim(x);
  Complex s = 0.0;
  for (int i = 0; i < dim_; ++i) s += weights_(i) * x(i, i);
  return s;
}

Complex Tower::inner(const Operator& a, const Operator& b) const {
  return to_vector(b).dot(to_vector(a));
}

double Tower::l2_norm(const Operator& x) const { return to_vector(x).norm(); }

Eigen::VectorXcd Tower::to_vector(const Operator& x) const {
  check_dim(x);
  Operator y = x * sqrt_w_.asDiagonal();
  return Eigen::Map<const Eigen::VectorXcd>(y.data(), y.size());
}

Operator Tower::from_vector(const Eigen::VectorXcd& v) const {
  if (v.size() != static_cast<long>(dim_) * dim_) throw DimensionMismatch(dim_ * dim_, v.size());
  Operator y = Eigen::Map<const Operator>(v.data(), dim_, dim_);
  return y * sqrt_w_.cwiseInverse().asDiagonal();
}

Operator Tower::expectation(int n, const Operator& x) const {
  check_level(n, true);
  Eigen::VectorXcd v = to_vector(x);
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(v.size());
  for (int j = 0; j <= n; ++j) {
    if (blocks_[j].cols() == 0) continue;
    Eigen::VectorXcd c = blocks_[j].adjoint() * v;
    acc += blocks_[j] * c;
  }
  return from_vector(acc);
}

Operator Tower::difference(int k, const Operator& x) const {
  check_level(k, false);
  return from_coordinates(k, coordinates(k, x));
}

Eigen::VectorXcd Tower::coordinates(int k, const Operator& x) const {
  check_level(k, true);
  return blocks_[k].adjoint() * to_vector(x);
}

Operator Tower::from_coordinates(int k, const Eigen::VectorXcd& c) const {
  check_level(k, true);
  if (c.size() != blocks_[k].cols()) throw DimensionMismatch(blocks_[k].cols(), c.size());
  if (c.size() == 0) return Operator::Zero(dim_, dim_);
  return from_vector(blocks_[k] * c);
}

const SparseBlock& Tower::block(int k) const {
  check_level(k, true);
  return blocks_[k];
}

int Tower::difference_dim(int k) const {
  check_level(k, true);
  return static_cast<int>(blocks_[k].cols());
}

int Tower::level_dim(int n) const {
  check_level(n, true);
  int s = 0;
  for (int j = 0; j <= n; ++j) s += static_cast<int>(blocks_[j].cols());
  return s;
}

std::vector<Operator> Tower::difference_basis(int k) const {
  check_level(k, true);
  std::vector<Operator> out;
  const int m = static_cast<int>(blocks_[k].cols());
  out.reserve(m);
  for (int i = 0; i < m; ++i) out.push_back(from_vector(Eigen::VectorXcd(blocks_[k].col(i))));
  return out;
}

std::vector<Operator> Tower::level_basis(int n) const {
  check_level(n, true);
  std::vector<Operator> out;
  for (int j = 0; j <= n; ++j) {
    auto part = difference_basis(j);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

const std::optional<std::vector<std::vector<int>>>& Tower::atoms(int n) const {
  check_level(n, true);
  return atoms_[n];
}

std::uint64_t operator_hash(const Operator& x) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  long r = x.rows(), c = x.cols();
  mix(&r, sizeof r);
  mix(&c, sizeof c);
  mix(x.data(), sizeof(Complex) * static_cast<size_t>(x.size()));
  return h;
}

double operator_norm(const Operator& x) {
  if (x.size() == 0) return 0.0;
  if (!x.allFinite()) throw NumericalError("non-finite entries in operator", operator_hash(x));
  Eigen::JacobiSVD<Operator> svd(x);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed", operator_hash(x));
  return svd.singularValues()(0);
}

Operator identity(int d) { return Operator::Identity(d, d); }

}  // namespace ncmart
