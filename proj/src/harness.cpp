#include "ncmart/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "ncmart/parallel.hpp"
#include "ncmart/random.hpp"
#include "ncmart/serialize.hpp"
#include "ncmart/spectral.hpp"

namespace ncmart {

// ---------------------------------------------------------------- sampling

MartingaleSequence random_martingale(const TowerPtr& t, const ProfileSpec& profile,
                                     std::uint64_t seed) {
  Rng rng(seed);
  const int d = t->ambient_dim(), L = t->levels();
  switch (profile.kind) {
    case Profile::Gaussian: {
      std::vector<Operator> diffs;
      for (int k = 1; k <= L; ++k) diffs.push_back(t->difference(k, rng.complex_matrix(d)));
      return MartingaleSequence(t, std::move(diffs));
    }
    case Profile::PositiveL1Normalized: {
      // random rank, so that both spread-out and concentrated positives occur
      for (;;) {
        const int r = rng.uniform_int(1, d);
        Operator g(r, d);
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < r; ++i) g(i, j) = rng.complex_normal();
        Operator x = t->expectation(L, Operator(g.adjoint() * g));
        double tr = t->trace(x).real();
        if (tr < 1e-12) continue;
        return adapt(t, Operator(x / tr));
      }
    }
    case Profile::SingleDifference: {
      t->check_level(profile.level, false);
      std::vector<Operator> diffs(L, Operator::Zero(d, d));
      diffs[profile.level - 1] = t->difference(profile.level, rng.complex_matrix(d));
      return MartingaleSequence(t, std::move(diffs));
    }
    case Profile::Zero:
      return MartingaleSequence(t, std::vector<Operator>(L, Operator::Zero(d, d)));
  }
  throw InvalidInput("unknown martingale profile");
}

namespace {

Operator diagonal(const std::vector<double>& v) {
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
  return w.cast<Complex>().asDiagonal();
}

Operator kron(const Operator& a, const Operator& b) {
  Operator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Commutative filtration generated by 2^N chi_[0,2^-N): atom 0 = [0,2^-N),
// atom j = [2^-(N-j+1), 2^-(N-j)) for j = 1..N. Level k: [0,2^-k) and the
// intervals [2^-i, 2^-(i-1)) for i <= k.
std::pair<std::vector<double>, std::vector<std::vector<std::vector<double>>>> reduced_classical(
    int n) {
  const int atoms = n + 1;
  std::vector<double> w(atoms);
  w[0] = std::ldexp(1.0, -n);
  for (int j = 1; j <= n; ++j) w[j] = std::ldexp(1.0, -(n - j + 1));
  std::vector<std::vector<std::vector<double>>> levels;
  for (int k = 1; k <= n; ++k) {
    std::vector<std::vector<double>> set;
    std::vector<double> head(atoms, 0.0);
    for (int j = 0; j <= n - k; ++j) head[j] = 1.0;
    set.push_back(head);
    for (int i = 1; i <= k; ++i) {
      std::vector<double> single(atoms, 0.0);
      single[n - i + 1] = 1.0;
      set.push_back(single);
    }
    levels.push_back(std::move(set));
  }
  return {w, levels};
}

}  // namespace

ExtremalExample extremal_example(int n, ExampleKind kind, ExampleScale scale) {
  if (n < 1) throw InvalidInput("extremal example needs N >= 1");
  if (scale == ExampleScale::Auto) scale = n <= 6 ? ExampleScale::Full : ExampleScale::Reduced;
  if (scale == ExampleScale::Full && n > 6)
    throw InvalidInput("full realization limited to N <= 6 (ambient 2^N)");
  const double height = std::ldexp(1.0, n);
  FiltrationSpec spec;
  spec.origin = Origin::Scalars;
  Operator f;
  if (scale == ExampleScale::Full) {
    if (kind == ExampleKind::ClassicalIndicator)
      spec.kind = AbelianDyadic{n};
    else
      spec.kind = TensorMatrix{std::vector<int>(n, 2)};
    const int d = 1 << n;
    f = Operator::Zero(d, d);
    f(0, 0) = height;
  } else {
    auto [w, levels] = reduced_classical(n);
    CustomSubalgebraBases c;
    if (kind == ExampleKind::ClassicalIndicator) {
      c.weights = w;
      for (const auto& set : levels) {
        std::vector<Operator> ops;
        for (const auto& v : set) ops.push_back(diagonal(v));
        c.spanning_sets.push_back(std::move(ops));
      }
      f = Operator::Zero(n + 1, n + 1);
      f(0, 0) = height;
    } else {
      // M_2 (x) (level k-1 of the reduced classical tower on N-1 levels)
      auto [w1, levels1] = reduced_classical(n - 1);
      if (n == 1) {
        w1 = {1.0};
        levels1.clear();
      }
      const int a = static_cast<int>(w1.size());
      for (int i = 0; i < 2; ++i)
        for (double x : w1) c.weights.push_back(0.5 * x);
      for (int k = 1; k <= n; ++k) {
        std::vector<std::vector<double>> inner =
            k == 1 ? std::vector<std::vector<double>>{std::vector<double>(a, 1.0)} : levels1[k - 2];
        std::vector<Operator> ops;
        for (int r = 0; r < 2; ++r)
          for (int s = 0; s < 2; ++s) {
            Operator unit = Operator::Zero(2, 2);
            unit(r, s) = 1.0;
            for (const auto& v : inner)
              ops.push_back(kron(unit, diagonal(v)));
          }
        c.spanning_sets.push_back(std::move(ops));
      }
      f = Operator::Zero(2 * a, 2 * a);
      f(0, 0) = height;
    }
    spec.kind = std::move(c);
  }
  TowerPtr t = build_tower(spec);
  std::vector<double> nu;
  for (int k = 1; k <= n; ++k) nu.push_back(std::ldexp(1.0, -k));
  return {t, adapt(t, f), zeta_sequence(*t, ZetaMethod::UserSupplied, nu)};
}

// ---------------------------------------------------------------- config

namespace {

const std::pair<Experiment, const char*> kNames[] = {
    {Experiment::WeakType, "weak-type"},
    {Experiment::LpLq, "lp-lq"},
    {Experiment::HardyColumn, "hardy-column"},
    {Experiment::L1aToBMO, "l1a-to-bmo"},
    {Experiment::L1aToM, "l1a-to-m"},
    {Experiment::H1ToBMO, "h1-to-bmo"},
    {Experiment::AtomMap, "atom-map"},
    {Experiment::EmbeddingLemmas, "embedding-lemmas"},
    {Experiment::SingularValueLemma, "singular-value-lemma"},
    {Experiment::HdScalar, "hd-scalar"},
    {Experiment::QuasiTriangle, "quasi-triangle"},
    {Experiment::SelfAdjointness, "self-adjointness"},
    {Experiment::Example, "example"},
};

std::string squash(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != '-' && c != '_') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

ProfileSpec profile_from_json(const Json& j) {
  ProfileSpec p;
  std::string s;
  if (j.is_object()) {
    s = j.at("kind").get<std::string>();
    if (j.contains("level")) p.level = j.at("level").get<int>();
  } else {
    s = j.get<std::string>();
  }
  auto colon = s.find(':');
  std::string head = s.substr(0, colon);
  if (head == "gaussian") {
    p.kind = Profile::Gaussian;
  } else if (head == "positive" || head == "positive_l1") {
    p.kind = Profile::PositiveL1Normalized;
  } else if (head == "zero") {
    p.kind = Profile::Zero;
  } else if (head == "single") {
    p.kind = Profile::SingleDifference;
    if (colon != std::string::npos) p.level = std::stoi(s.substr(colon + 1));
  } else {
    throw InvalidInput("unknown profile \"" + s + "\"");
  }
  return p;
}

Json profile_to_json(const ProfileSpec& p) {
  switch (p.kind) {
    case Profile::Gaussian: return "gaussian";
    case Profile::PositiveL1Normalized: return "positive";
    case Profile::SingleDifference: return "single:" + std::to_string(p.level);
    case Profile::Zero: return "zero";
  }
  return "gaussian";
}

}  // namespace

const char* experiment_name(Experiment e) {
  for (const auto& [k, name] : kNames)
    if (k == e) return name;
  return "unknown";
}

std::optional<Experiment> parse_experiment(const std::string& name) {
  for (const auto& [k, n] : kNames)
    if (squash(n) == squash(name)) return k;
  return std::nullopt;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  if (!j.is_object()) throw InvalidInput("config must be a JSON object");
  ExperimentConfig c;
  static const char* known[] = {"experiment", "tower", "trials", "seed", "alphas", "pq", "ps",
                                "eps", "profile", "coeffs", "extremal_max_n", "threads"};
  for (const auto& [key, _] : j.items())
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known))
      throw InvalidInput("unknown config key \"" + key + "\"");
  try {
    if (j.contains("experiment")) {
      auto e = parse_experiment(j.at("experiment").get<std::string>());
      if (!e) throw InvalidInput("unknown experiment \"" + j.at("experiment").get<std::string>() + "\"");
      c.experiment = *e;
    }
    if (j.contains("tower")) {
      const auto& t = j.at("tower");
      c.tower = t.is_string() ? tower_spec_from_string(t.get<std::string>()) : tower_spec_from_json(t);
    }
    if (j.contains("trials")) c.trials = j.at("trials").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
    if (j.contains("ps")) c.ps = j.at("ps").get<std::vector<double>>();
    if (j.contains("eps")) c.eps = j.at("eps").get<std::vector<double>>();
    if (j.contains("pq"))
      for (const auto& pair : j.at("pq")) {
        auto v = pair.get<std::vector<double>>();
        if (v.size() != 2) throw InvalidInput("pq entries must be [p, q]");
        c.pq.emplace_back(v[0], v[1]);
      }
    if (j.contains("profile")) c.profile = profile_from_json(j.at("profile"));
    if (j.contains("coeffs")) {
      const auto& v = j.at("coeffs");
      if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "auto")
          c.coeffs.kind = CoeffSource::Kind::Auto;
        else if (s == "optimize")
          c.coeffs.kind = CoeffSource::Kind::Optimize;
        else
          throw InvalidInput("coeffs must be \"auto\", \"optimize\" or a list");
      } else {
        c.coeffs.kind = CoeffSource::Kind::User;
        c.coeffs.values = (v.is_object() ? v.at("values") : v).get<std::vector<double>>();
      }
    }
    if (j.contains("extremal_max_n")) c.extremal_max_n = j.at("extremal_max_n").get<int>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  return c;
}

Json ExperimentConfig::to_json() const {
  Json pqj = Json::array();
  for (const auto& [p, q] : pq) pqj.push_back({p, q});
  Json coeff_json;
  switch (coeffs.kind) {
    case CoeffSource::Kind::Auto: coeff_json = "auto"; break;
    case CoeffSource::Kind::Optimize: coeff_json = "optimize"; break;
    case CoeffSource::Kind::User: coeff_json = coeffs.values; break;
  }
  return {{"experiment", experiment_name(experiment)},
          {"tower", tower_spec_to_json(tower)},
          {"trials", trials},
          {"seed", seed},
          {"alphas", alphas},
          {"pq", pqj},
          {"ps", ps},
          {"eps", eps},
          {"profile", profile_to_json(profile)},
          {"coeffs", coeff_json},
          {"extremal_max_n", extremal_max_n}};
}

void ExperimentConfig::validate() {
  if (trials < 1) throw InvalidInput("trials must be >= 1");
  if (extremal_max_n < 0 || extremal_max_n > 30) throw InvalidInput("extremal_max_n must be in [0,30]");
  auto fill = [](auto& grid, auto defaults) {
    if (grid.empty()) grid = defaults;
  };
  auto each_in = [](const std::vector<double>& v, double lo, double hi, const char* what) {
    for (double x : v)
      if (!(x > lo && x < hi))
        throw InvalidInput(std::string(what) + " " + fmt(x) + " outside (" + fmt(lo) + ", " + fmt(hi) + ")");
  };
  switch (experiment) {
    case Experiment::WeakType:
    case Experiment::HardyColumn:
    case Experiment::L1aToBMO:
    case Experiment::L1aToM:
    case Experiment::SelfAdjointness:
      fill(alphas, std::vector<double>{0.25, 0.5, 0.75});
      each_in(alphas, 0.0, 1.0, "alpha");
      break;
    case Experiment::LpLq:
      fill(pq, std::vector<std::pair<double, double>>{{4.0 / 3.0, 4.0}, {2.0, 4.0}, {1.5, 3.0}});
      for (auto [p, q] : pq)
        if (!(1.0 < p && p < q && q < kInf)) throw InvalidInput("lp-lq needs 1 < p < q < inf");
      break;
    case Experiment::AtomMap:
      fill(pq, std::vector<std::pair<double, double>>{{0.5, 1.0}, {2.0 / 3.0, 1.0}, {0.5, 4.0 / 3.0}});
      for (auto [p, q] : pq)
        if (!(0.0 < p && p < 1.0 && p < q && q < 2.0))
          throw InvalidInput("atom-map needs 0 < p < 1 and p < q < 2");
      break;
    case Experiment::EmbeddingLemmas:
      fill(alphas, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
      fill(ps, std::vector<double>{1.1, 1.25, 1.5, 1.75});
      each_in(alphas, 0.0, 1.0, "alpha");
      each_in(ps, 1.0, 2.0, "p");
      break;
    case Experiment::SingularValueLemma:
      fill(alphas, std::vector<double>{0.1, 0.2, 0.25, 0.3, 0.4, 0.45});
      each_in(alphas, 0.0, 0.5, "alpha");
      break;
    case Experiment::HdScalar:
      fill(pq, std::vector<std::pair<double, double>>{
                   {0.25, 0.5}, {0.5, 0.75}, {0.5, 1.0}, {0.75, 1.0}, {1.0 / 3.0, 1.0}});
      for (auto [p, q] : pq)
        if (!(0.0 < p && p < q && q <= 1.0)) throw InvalidInput("hd-scalar needs 0 < p < q <= 1");
      break;
    case Experiment::Example:
      fill(eps, std::vector<double>{0.25, 0.5});
      each_in(eps, 0.0, 1.0, "epsilon");
      if (extremal_max_n < 1) throw InvalidInput("example needs extremal_max_n >= 1");
      break;
    case Experiment::H1ToBMO:
    case Experiment::QuasiTriangle:
      break;
  }
  if (profile.kind == Profile::SingleDifference && profile.level < 1)
    throw InvalidInput("single-difference profile needs a level >= 1");
}

// ---------------------------------------------------------------- running

namespace {

enum class Kind { Ratio, Inequality, Identity, Witness, Atom };

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Ratio: return "ratio";
    case Kind::Inequality: return "inequality";
    case Kind::Identity: return "identity";
    case Kind::Witness: return "witness";
    case Kind::Atom: return "atom";
  }
  return "ratio";
}

struct Sample {
  Sample() = default;
  Sample(double l, double r) : lhs(l), rhs(r) {}
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  // atom conditions after the transform
  int tag = 0;            // atom projection rank
  std::string error;      // exception text, if evaluation threw
};

struct GridPoint {
  std::string name;
  Kind kind = Kind::Ratio;
  int trials = 0;
  double tol = 1e-9;
  bool seeded = true;  // false: deterministic family indexed by trial (extremal N = trial + 1)
  std::function<Sample(int trial, std::uint64_t seed)> eval;
};

constexpr double kSentinel = 1e-12;

double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  return sorted[static_cast<size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)))];
}

void summarize(const GridPoint& g, const std::vector<Sample>& samples,
               const std::vector<std::uint64_t>& seeds, Report& report) {
  GridSummary s;
  s.grid = g.name;
  s.kind = kind_name(g.kind);
  s.worst = g.kind == Kind::Inequality ? kInf : 0.0;
  std::vector<double> ratios;
  const int n = static_cast<int>(samples.size());
  const int half = n / 2;
  std::map<int, double> rank_max;
  auto fail = [&](int trial, const std::string& check, double value) {
    report.failures.push_back({g.name, trial, seeds[trial], check, value});
  };
  for (int i = 0; i < n; ++i) {
    const Sample& x = samples[i];
    TrialRecord rec{g.name, i, seeds[i], x.lhs, x.rhs, std::nullopt};
    if (!x.error.empty()) {
      report.trials.push_back(rec);
      fail(i, "exception: " + x.error, 0.0);
      s.excluded++;
      continue;
    }
    if (g.kind == Kind::Atom) {
      if (x.rhs > 0.0) rec.ratio = x.lhs / x.rhs;
    } else if (std::abs(x.rhs) >= kSentinel) {
      rec.ratio = x.lhs / x.rhs;
    }
    switch (g.kind) {
      case Kind::Ratio:
        if (!std::isfinite(x.lhs) || !std::isfinite(x.rhs) ||
            (rec.ratio && !std::isfinite(*rec.ratio)))
          fail(i, "non_finite", x.lhs);
        break;
      case Kind::Inequality: {
        double slack = x.rhs - x.lhs;
        s.worst = std::min(s.worst, slack);
        if (!(slack >= -g.tol)) fail(i, "violation", slack);
        break;
      }
      case Kind::Identity:
      case Kind::Witness: {
        double err = std::abs(x.lhs - x.rhs);
        if (!std::isfinite(err)) err = kInf;
        s.worst = std::max(s.worst, err);
        if (!(err <= g.tol)) fail(i, "mismatch", err);
        if (g.kind == Kind::Witness && i > 0 && !(x.lhs > samples[i - 1].lhs))
          fail(i, "not_increasing", x.lhs - samples[i - 1].lhs);
        break;
      }
      case Kind::Atom:
        s.worst = std::max(s.worst, x.residual);
        if (!(x.residual <= g.tol)) fail(i, "atom_conditions", x.residual);
        if (!rec.ratio || !std::isfinite(*rec.ratio)) fail(i, "non_finite", x.lhs);
        else rank_max[x.tag] = std::max(rank_max[x.tag], *rec.ratio);
        break;
    }
    if (rec.ratio && std::isfinite(*rec.ratio)) {
      ratios.push_back(*rec.ratio);
      if (i < half || n == 1) s.first_half_max = std::max(s.first_half_max, *rec.ratio);
    }
    if ((g.kind == Kind::Ratio || g.kind == Kind::Atom) && !rec.ratio)
      s.excluded++;
    else
      s.count++;
    report.trials.push_back(rec);
  }
  if (!ratios.empty()) {
    s.max = *std::max_element(ratios.begin(), ratios.end());
    s.mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / static_cast<double>(ratios.size());
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    s.q50 = nearest_rank(sorted, 0.5);
    s.q90 = nearest_rank(sorted, 0.9);
    s.q99 = nearest_rank(sorted, 0.99);
  }
  if (g.kind == Kind::Ratio) {
    // the running maximum may grow by at most 10% over the second half
    s.stable = s.max <= 1.1 * s.first_half_max;
    if (!s.stable) report.failures.push_back({g.name, n - 1, seeds[n - 1], "unstable_max", s.max / s.first_half_max});
  }
  if (g.kind == Kind::Atom && !rank_max.empty()) {
    Json per_rank = Json::object();
    double hi = 0.0, lo = kInf;
    for (const auto& [rank, mx] : rank_max) {
      per_rank[std::to_string(rank)] = mx;
      hi = std::max(hi, mx);
      lo = std::min(lo, mx);
    }
    double spread = hi > 0.0 ? (hi - lo) / hi : 0.0;
    s.extra["rank_max"] = per_rank;
    s.extra["rank_spread"] = spread;
    s.stable = spread <= 0.1;
    if (!s.stable) report.failures.push_back({g.name, n - 1, seeds[n - 1], "rank_spread", spread});
  }
  report.summary.push_back(std::move(s));
}

struct Context {
  const ExperimentConfig& cfg;
  TowerPtr tower;
  CoefficientSequence coeffs;
  std::vector<ExtremalExample> classical;  // index N-1, Auto realization
  std::vector<GridPoint> grids;
};

double norm_p(const Tower& t, const Operator& x, double p) { return lp_norm(t, x, p); }

std::string alpha_tag(double a) { return "alpha=" + fmt(a); }
std::string pq_tag(double p, double q) { return "p=" + fmt(p) + ",q=" + fmt(q); }

CoefficientSequence coefficients_for(const Tower& t, const CoeffSource& src, std::uint64_t seed) {
  ZetaOptions opt;
  opt.seed = seed;
  switch (src.kind) {
    case CoeffSource::Kind::Auto: return zeta_sequence(t, ZetaMethod::Auto, {}, opt);
    case CoeffSource::Kind::Optimize: return zeta_sequence(t, ZetaMethod::ForceOptimize, {}, opt);
    case CoeffSource::Kind::User: {
      auto c = zeta_sequence(t, ZetaMethod::UserSupplied, src.values, opt);
      if (c.size() < t.levels())
        throw InvalidInput("user coefficients shorter than the tower (" + std::to_string(t.levels()) + " levels)");
      return c;
    }
  }
  throw InvalidInput("unknown coefficient source");
}

// Theorem-level ratio, evaluated on random martingales and on the extremal family.
void add_ratio(Context& ctx, const std::string& name,
               std::function<Sample(const MartingaleSequence&, const CoefficientSequence&)> f) {
  const auto& cfg = ctx.cfg;
  GridPoint g;
  g.name = name;
  g.kind = Kind::Ratio;
  g.trials = cfg.trials;
  g.eval = [&ctx, f](int, std::uint64_t seed) {
    return f(random_martingale(ctx.tower, ctx.cfg.profile, seed), ctx.coeffs);
  };
  ctx.grids.push_back(g);
  if (cfg.extremal_max_n > 0) {
    GridPoint e;
    e.name = "extremal:" + name;
    e.kind = Kind::Ratio;
    e.trials = cfg.extremal_max_n;
    e.seeded = false;
    e.eval = [&ctx, f](int trial, std::uint64_t) {
      const auto& ex = ctx.classical[trial];
      return f(ex.martingale, ex.coeffs);
    };
    ctx.grids.push_back(e);
  }
}

void add_witness(Context& ctx) {
  GridPoint g;
  g.name = "strong-type-witness";
  g.kind = Kind::Witness;
  g.trials = ctx.cfg.extremal_max_n;
  g.seeded = false;
  g.eval = [&ctx](int trial, std::uint64_t) {
    const auto& ex = ctx.classical[trial];
    const Tower& t = *ex.tower;
    double num = t.l2_norm(fractional_integral(ex.martingale, 0.5, ex.coeffs).final_value());
    double den = norm_p(t, ex.martingale.final_value(), 1.0);
    return Sample{num / den, std::sqrt((trial + 1) / 2.0)};
  };
  ctx.grids.push_back(g);
}

// Sample from D_k: Gaussian coordinates on even trials, a projected rank-one
// operator on odd ones.
Operator difference_sample(const Tower& t, int k, Rng& rng, int trial) {
  const int d = t.ambient_dim();
  if (trial % 2 == 0) return t.from_coordinates(k, rng.complex_vector(t.difference_dim(k)));
  return t.difference(k, Operator(rng.complex_vector(d) * rng.complex_vector(d).adjoint()));
}

Operator level_sample(const Tower& t, int k, Rng& rng, int trial) {
  const int d = t.ambient_dim();
  if (trial % 2 == 0) return t.expectation(k, rng.complex_matrix(d));
  return t.expectation(k, Operator(rng.complex_vector(d) * rng.complex_vector(d).adjoint()));
}

// Projection chi_[lambda, inf)(h) for a random Hermitian h in level n, keeping
// the top `groups` distinct eigenvalues; groups = 0 picks a random count.
Operator random_level_projection(const Tower& t, int n, Rng& rng) {
  const int d = t.ambient_dim();
  Operator h = t.expectation(n, rng.hermitian_matrix(d));
  Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (h + h.adjoint()));
  const auto& ev = es.eigenvalues();
  const double tol = 1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<int> cuts;  // number of top eigenvectors at each group boundary
  for (int j = d - 1; j >= 0; --j)
    if (j == 0 || ev(j) - ev(j - 1) > tol) cuts.push_back(d - j);
  const int take = cuts[rng.uniform_int(0, static_cast<int>(cuts.size()) - 1)];
  Operator e = Operator::Zero(d, d);
  for (int j = d - 1; j >= d - take; --j) e += es.eigenvectors().col(j) * es.eigenvectors().col(j).adjoint();
  return e;
}

Sample catch_all(const std::function<Sample()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    Sample s;
    s.error = e.what();
    return s;
  }
}

void build_grids(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Tower& t = *ctx.tower;
  const int L = t.levels();

  switch (cfg.experiment) {
    case Experiment::WeakType:
      for (double a : cfg.alphas)
        add_ratio(ctx, "weak:" + alpha_tag(a), [a](const MartingaleSequence& m, const CoefficientSequence& c) {
          const Tower& tw = m.tower();
          auto y = fractional_integral(m, a, c).final_value();
          return Sample{weak_norm(singular_value_function(tw, y), 1.0 / (1.0 - a)),
                        norm_p(tw, m.final_value(), 1.0)};
        });
      if (cfg.extremal_max_n > 0) add_witness(ctx);
      break;
    case Experiment::LpLq:
      for (auto [p, q] : cfg.pq)
        add_ratio(ctx, "lplq:" + pq_tag(p, q), [p, q](const MartingaleSequence& m, const CoefficientSequence& c) {
          const Tower& tw = m.tower();
          auto y = fractional_integral(m, 1.0 / p - 1.0 / q, c).final_value();
          return Sample{norm_p(tw, y, q), norm_p(tw, m.final_value(), p)};
        });
      break;
    case Experiment::HardyColumn:
      for (double a : cfg.alphas)
        add_ratio(ctx, "hardy:" + alpha_tag(a), [a](const MartingaleSequence& m, const CoefficientSequence& c) {
          return Sample{hardy_column_norm(fractional_integral(m, a, c), 1.0 / (1.0 - a)),
                        hardy_column_norm(m, 1.0)};
        });
      break;
    case Experiment::L1aToBMO:
      for (double a : cfg.alphas)
        add_ratio(ctx, "bmo:" + alpha_tag(a), [a](const MartingaleSequence& m, const CoefficientSequence& c) {
          return Sample{bmo_norm(fractional_integral(m, a, c)), norm_p(m.tower(), m.final_value(), 1.0 / a)};
        });
      break;
    case Experiment::L1aToM:
      for (double a : cfg.alphas)
        add_ratio(ctx, "sup:" + alpha_tag(a), [a](const MartingaleSequence& m, const CoefficientSequence& c) {
          const Tower& tw = m.tower();
          auto y = fractional_integral(m, a, c).final_value();
          return Sample{operator_norm(y),
                        lorentz_norm(singular_value_function(tw, m.final_value()), 1.0 / a, 1.0)};
        });
      break;
    case Experiment::H1ToBMO:
      add_ratio(ctx, "bmo-over-mixed-h1", [](const MartingaleSequence& m, const CoefficientSequence& c) {
        return Sample{bmo_norm(iterated_transform(m, 1.0, c)), hardy_mixed_upper(m, 1.0).value};
      });
      add_ratio(ctx, "bmo-over-column-h1", [](const MartingaleSequence& m, const CoefficientSequence& c) {
        return Sample{bmo_norm(iterated_transform(m, 1.0, c)), hardy_column_norm(m, 1.0)};
      });
      break;
    case Experiment::AtomMap: {
      if (L < 2) throw InvalidInput("atom-map needs a tower with at least 2 levels");
      for (auto [p, q] : cfg.pq) {
        GridPoint g;
        g.name = "atom:" + pq_tag(p, q);
        g.kind = Kind::Atom;
        g.trials = cfg.trials;
        g.eval = [&ctx, p, q](int, std::uint64_t seed) {
          const Tower& tw = *ctx.tower;
          const int levels = tw.levels();
          Rng rng(seed);
          const int n = rng.uniform_int(1, levels - 1);
          const int m = rng.uniform_int(n + 1, levels);
          Operator e = random_level_projection(tw, n, rng);
          Operator a = make_atom(tw, n, e, p, m, rng.uniform_int(0, 1 << 30));
          AtomConstant c = atom_constant(tw, a, n, e, p, q, ctx.coeffs);
          Sample s;
          s.rhs = std::pow(tw.trace(e).real(), 0.5 - 1.0 / q);
          s.lhs = c.constant * s.rhs;
          s.residual = std::max(c.mean_zero_residual, c.support_residual);
          s.tag = static_cast<int>(std::lround(e.trace().real()));
          return s;
        };
        ctx.grids.push_back(g);
      }
      break;
    }
    case Experiment::EmbeddingLemmas: {
      auto sample = [&ctx](std::uint64_t seed, int trial, int& k) {
        Rng rng(seed);
        k = rng.uniform_int(1, ctx.tower->levels());
        return difference_sample(*ctx.tower, k, rng, trial);
      };
      for (double a : cfg.alphas) {
        GridPoint g{"basic-i:" + alpha_tag(a), Kind::Inequality, cfg.trials, 1e-9, true, {}};
        g.eval = [&ctx, sample, a](int trial, std::uint64_t seed) {
          int k = 0;
          Operator x = sample(seed, trial, k);
          const Tower& tw = *ctx.tower;
          auto s = singular_value_function(tw, x);
          double n1 = lp_norm(s, 1.0);
          if (n1 < kSentinel) return Sample{0.0, 0.0};
          double z = ctx.coeffs.at(k);
          return Sample{std::pow(z, a) * lp_norm(s, 1.0 / (1.0 - a)) / n1, std::pow(2.0, a)};
        };
        ctx.grids.push_back(g);
      }
      for (double p : cfg.ps) {
        GridPoint g{"basic-ii:p=" + fmt(p), Kind::Inequality, cfg.trials, 1e-9, true, {}};
        g.eval = [&ctx, sample, p](int trial, std::uint64_t seed) {
          int k = 0;
          Operator x = sample(seed, trial, k);
          auto s = singular_value_function(*ctx.tower, x);
          double np = lp_norm(s, p);
          if (np < kSentinel) return Sample{0.0, 0.0};
          double a = 1.0 / p - 0.5;
          return Sample{std::pow(ctx.coeffs.at(k), a) * lp_norm(s, 2.0) / np, 1.0};
        };
        ctx.grids.push_back(g);
      }
      GridPoint g1{"infty-2", Kind::Inequality, cfg.trials, 1e-9, true, {}};
      g1.eval = [&ctx, sample](int trial, std::uint64_t seed) {
        int k = 0;
        Operator x = sample(seed, trial, k);
        double n2 = ctx.tower->l2_norm(x);
        if (n2 < kSentinel) return Sample{0.0, 0.0};
        return Sample{operator_norm(x) / n2, 1.0 / std::sqrt(ctx.coeffs.at(k))};
      };
      ctx.grids.push_back(g1);
      GridPoint g2{"2-1", Kind::Inequality, cfg.trials, 1e-9, true, {}};
      g2.eval = [&ctx, sample](int trial, std::uint64_t seed) {
        int k = 0;
        Operator x = sample(seed, trial, k);
        double n2 = ctx.tower->l2_norm(x);
        if (n2 < kSentinel) return Sample{0.0, 0.0};
        double n1 = norm_p(*ctx.tower, x, 1.0) / n2;
        return Sample{1.0, 2.0 / std::sqrt(ctx.coeffs.at(k)) * n1};
      };
      ctx.grids.push_back(g2);
      break;
    }
    case Experiment::SingularValueLemma: {
      for (double a : cfg.alphas) {
        GridPoint g{"singular-values:" + alpha_tag(a), Kind::Inequality, cfg.trials, 1e-9, true, {}};
        g.eval = [&ctx, a](int, std::uint64_t seed) {
          auto m = random_martingale(ctx.tower, ctx.cfg.profile, seed);
          const Tower& tw = *ctx.tower;
          double scale = hardy_column_norm(m, 2.0);
          if (scale < kSentinel) return Sample{0.0, 0.0};
          auto sq = [&](const MartingaleSequence& x) {
            std::vector<SingularValueFunction::Step> st =
                positive_value_function(tw, Operator(column_square_function(x, x.length()) / scale)).steps();
            return SingularValueFunction::from_steps(std::move(st));
          };
          auto A = sq(fractional_integral(m, a, ctx.coeffs));
          auto B = sq(fractional_integral(m, 2.0 * a, ctx.coeffs));
          auto C = sq(m);
          // all three are constant between these points
          std::vector<double> ts{0.0};
          for (const auto& s : A.steps()) ts.push_back(s.cum_weight);
          for (const auto* f : {&B, &C})
            for (const auto& s : f->steps()) ts.push_back(2.0 * s.cum_weight);
          Sample worst{0.0, 1.0};
          double best_slack = kInf;
          for (double t : ts) {
            if (t >= 1.0) continue;
            double lhs = A.at(t), rhs = std::sqrt(B.at(t / 2.0) * C.at(t / 2.0));
            if (rhs - lhs < best_slack) {
              best_slack = rhs - lhs;
              worst = Sample{lhs, rhs};
            }
          }
          return worst;
        };
        ctx.grids.push_back(g);
      }
      for (double a : cfg.alphas) {
        GridPoint g{"hardy-2alpha:" + alpha_tag(a), Kind::Inequality, cfg.trials, 1e-9, true, {}};
        g.eval = [&ctx, a](int, std::uint64_t seed) {
          auto m = random_martingale(ctx.tower, ctx.cfg.profile, seed);
          double h1 = hardy_column_norm(m, 1.0);
          if (h1 < kSentinel) return Sample{0.0, 0.0};
          double lhs = hardy_column_norm(fractional_integral(m, a, ctx.coeffs), 1.0 / (1.0 - a)) / h1;
          double mid = hardy_column_norm(fractional_integral(m, 2.0 * a, ctx.coeffs), 1.0 / (1.0 - 2.0 * a)) / h1;
          return Sample{lhs, std::pow(2.0, 1.0 - a) * std::sqrt(mid)};
        };
        ctx.grids.push_back(g);
      }
      break;
    }
    case Experiment::HdScalar: {
      for (auto [p, q] : cfg.pq) {
        const double gamma = 1.0 / p - 1.0 / q;
        auto sample = [&ctx](std::uint64_t seed, int trial, int& k) {
          Rng rng(seed);
          k = rng.uniform_int(1, ctx.tower->levels());
          return level_sample(*ctx.tower, k, rng, trial);
        };
        // as stated, normalized to ||a||_p = 1 (the claim is not homogeneous)
        GridPoint g{"hd-scalar:" + pq_tag(p, q), Kind::Inequality, cfg.trials, 1e-9, true, {}};
        g.eval = [&ctx, sample, p, q, gamma](int trial, std::uint64_t seed) {
          int k = 0;
          Operator x = sample(seed, trial, k);
          auto s = singular_value_function(*ctx.tower, x);
          double np = lp_norm(s, p);
          if (np < kSentinel) return Sample{0.0, 0.0};
          double nq = lp_norm(s, q) / np;
          return Sample{std::pow(ctx.coeffs.at(k), gamma * q) * std::pow(nq, q), 1.0};
        };
        ctx.grids.push_back(g);
        GridPoint h{"hd-scalar-homogeneous:" + pq_tag(p, q), Kind::Inequality, cfg.trials, 1e-9, true, {}};
        h.eval = [&ctx, sample, p, q, gamma](int trial, std::uint64_t seed) {
          int k = 0;
          Operator x = sample(seed, trial, k);
          auto s = singular_value_function(*ctx.tower, x);
          double np = lp_norm(s, p);
          if (np < kSentinel) return Sample{0.0, 0.0};
          return Sample{std::pow(ctx.coeffs.at(k), gamma) * lp_norm(s, q) / np, std::pow(2.0, gamma)};
        };
        ctx.grids.push_back(h);
      }
      break;
    }
    case Experiment::QuasiTriangle: {
      GridPoint g{"quasi-triangle", Kind::Inequality, cfg.trials, 1e-9, true, {}};
      g.eval = [&ctx](int, std::uint64_t seed) {
        const Tower& tw = *ctx.tower;
        const int d = tw.ambient_dim();
        Rng rng(seed);
        Operator x1 = rng.complex_matrix(d) * std::exp(rng.uniform() * 4.0 - 2.0);
        Operator x2 = rng.complex_matrix(d) * std::exp(rng.uniform() * 4.0 - 2.0);
        if (rng.uniform() < 0.5) x2 = -x1 + 1e-3 * x2;  // near-cancellation
        auto s12 = singular_value_function(tw, Operator(x1 + x2));
        double lambda = std::max(s12.top(), 1e-300) * std::exp(rng.uniform() * 3.0 - 2.5);
        // divided by lambda: distributions are scale-free
        double lhs = distribution(s12, lambda);
        double rhs = 2.0 * distribution(singular_value_function(tw, x1), lambda / 2.0) +
                     2.0 * distribution(singular_value_function(tw, x2), lambda / 2.0);
        return Sample{lhs, rhs};
      };
      ctx.grids.push_back(g);
      break;
    }
    case Experiment::SelfAdjointness: {
      for (double a : cfg.alphas) {
        GridPoint g{"self-adjoint:" + alpha_tag(a), Kind::Identity, cfg.trials, 1e-10, true, {}};
        g.eval = [&ctx, a](int, std::uint64_t seed) {
          auto x = random_martingale(ctx.tower, ctx.cfg.profile, derive_seed(seed, {1}));
          auto y = random_martingale(ctx.tower, ctx.cfg.profile, derive_seed(seed, {2}));
          auto r = selfadjointness_check(x, y, a, ctx.coeffs);
          return Sample{r.difference / std::max(1.0, std::abs(r.lhs)), 0.0};
        };
        ctx.grids.push_back(g);
        GridPoint lin{"linearity:" + alpha_tag(a), Kind::Identity, cfg.trials, 1e-10, true, {}};
        lin.eval = [&ctx, a](int, std::uint64_t seed) {
          const Tower& tw = *ctx.tower;
          Rng rng(seed);
          auto x = random_martingale(ctx.tower, ctx.cfg.profile, derive_seed(seed, {1}));
          auto y = random_martingale(ctx.tower, ctx.cfg.profile, derive_seed(seed, {2}));
          Complex lam = rng.complex_normal();
          Operator sum = x.final_value() + lam * y.final_value();
          Operator lhs = fractional_integral(adapt(ctx.tower, sum), a, ctx.coeffs).final_value();
          Operator rhs = fractional_integral(x, a, ctx.coeffs).final_value() +
                         lam * fractional_integral(y, a, ctx.coeffs).final_value();
          return Sample{tw.l2_norm(lhs - rhs) / std::max(1.0, tw.l2_norm(rhs)), 0.0};
        };
        ctx.grids.push_back(lin);
      }
      GridPoint it{"iterated:gamma=1.5", Kind::Identity, cfg.trials, 1e-10, true, {}};
      it.eval = [&ctx](int, std::uint64_t seed) {
        const Tower& tw = *ctx.tower;
        auto x = random_martingale(ctx.tower, ctx.cfg.profile, seed);
        Operator direct = iterated_transform(x, 1.5, ctx.coeffs).final_value();
        Operator twice =
            fractional_integral(fractional_integral(x, 0.75, ctx.coeffs), 0.75, ctx.coeffs).final_value();
        return Sample{tw.l2_norm(direct - twice) / std::max(1.0, tw.l2_norm(direct)), 0.0};
      };
      ctx.grids.push_back(it);
      break;
    }
    case Experiment::Example:
      break;
  }
}

// The four Example identities for one realization.
struct ExampleValues {
  double l1 = 0.0;
  std::vector<double> lp;  // one per epsilon
  double half_l2 = 0.0;
  double quarter_l2sq = 0.0;
  double partial_sums = 0.0;  // deviation of f_k from 2^k times a projection of trace 2^-k
};

ExampleValues example_values(const ExtremalExample& ex, const std::vector<double>& eps) {
  const Tower& t = *ex.tower;
  const MartingaleSequence& m = ex.martingale;
  ExampleValues v;
  const Operator f = m.final_value();
  auto s = singular_value_function(t, f);
  v.l1 = lp_norm(s, 1.0);
  for (double e : eps) v.lp.push_back(lp_norm(s, (4.0 - e) / 3.0));
  v.half_l2 = t.l2_norm(fractional_integral(m, 0.5, ex.coeffs).final_value());
  double q = t.l2_norm(fractional_integral(m, 0.25, ex.coeffs).final_value());
  v.quarter_l2sq = q * q;
  for (int k = 1; k <= m.length(); ++k) {
    Operator fk = m.value(k);
    double h = std::ldexp(1.0, k);
    double err = operator_norm(Operator(fk * fk - h * fk)) / (h * h) +
                 operator_norm(Operator(fk - fk.adjoint())) / h + std::abs(t.trace(fk) - 1.0);
    v.partial_sums = std::max(v.partial_sums, err);
  }
  return v;
}

void build_example_grids(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const int maxn = cfg.extremal_max_n;
  struct Cache {
    std::vector<ExampleValues> classical, noncommutative;
    std::vector<ExampleValues> classical_full, classical_reduced, nc_full, nc_reduced;
  };
  auto cache = std::make_shared<Cache>();
  for (int n = 1; n <= maxn; ++n) {
    cache->classical.push_back(example_values(ctx.classical[n - 1], cfg.eps));
    cache->noncommutative.push_back(
        example_values(extremal_example(n, ExampleKind::NoncommutativeProjection), cfg.eps));
  }
  const int fulln = std::min(6, maxn);
  for (int n = 1; n <= fulln; ++n) {
    cache->classical_full.push_back(
        example_values(extremal_example(n, ExampleKind::ClassicalIndicator, ExampleScale::Full), cfg.eps));
    cache->classical_reduced.push_back(
        example_values(extremal_example(n, ExampleKind::ClassicalIndicator, ExampleScale::Reduced), cfg.eps));
    cache->nc_full.push_back(
        example_values(extremal_example(n, ExampleKind::NoncommutativeProjection, ExampleScale::Full), cfg.eps));
    cache->nc_reduced.push_back(example_values(
        extremal_example(n, ExampleKind::NoncommutativeProjection, ExampleScale::Reduced), cfg.eps));
  }

  using Getter = std::function<double(const ExampleValues&)>;
  std::vector<std::pair<std::string, Getter>> items;
  items.emplace_back("i:l1-norm", [](const ExampleValues& v) { return v.l1; });
  for (size_t e = 0; e < cfg.eps.size(); ++e)
    items.emplace_back("ii:lp-norm:eps=" + fmt(cfg.eps[e]), [e](const ExampleValues& v) { return v.lp[e]; });
  items.emplace_back("iii:half-integral-l2", [](const ExampleValues& v) { return v.half_l2; });
  items.emplace_back("iv:quarter-integral-l2-squared", [](const ExampleValues& v) { return v.quarter_l2sq; });
  items.emplace_back("partial-sums", [](const ExampleValues& v) { return v.partial_sums; });

  auto expected = [&cfg](size_t item, int n) -> double {
    const double N = n;
    if (item == 0) return 1.0;
    if (item <= cfg.eps.size()) {
      double e = cfg.eps[item - 1];
      return std::pow(2.0, (1.0 - e) / (4.0 - e) * N);
    }
    size_t rest = item - cfg.eps.size();
    if (rest == 1) return std::sqrt(N / 2.0);
    if (rest == 2) return (std::pow(2.0, N / 2.0) - 1.0) / (2.0 - std::sqrt(2.0));
    return 0.0;
  };

  const std::pair<const char*, std::vector<ExampleValues> Cache::*> kinds[] = {
      {"classical", &Cache::classical}, {"noncommutative", &Cache::noncommutative}};
  for (const auto& [kname, member] : kinds)
    for (size_t i = 0; i < items.size(); ++i) {
      GridPoint g{std::string(kname) + ":" + items[i].first, Kind::Identity, maxn, 1e-9, false, {}};
      Getter get = items[i].second;
      g.eval = [cache, member, get, expected, i](int trial, std::uint64_t) {
        return Sample{get(((*cache).*member)[trial]), expected(i, trial + 1)};
      };
      ctx.grids.push_back(g);
    }
  for (size_t i = 0; i < items.size(); ++i) {
    GridPoint g{"agreement:" + items[i].first, Kind::Identity, maxn, 1e-10, false, {}};
    Getter get = items[i].second;
    g.eval = [cache, get](int trial, std::uint64_t) {
      return Sample{get(cache->classical[trial]), get(cache->noncommutative[trial])};
    };
    ctx.grids.push_back(g);
  }
  const std::tuple<const char*, std::vector<ExampleValues> Cache::*, std::vector<ExampleValues> Cache::*>
      pairs[] = {{"classical", &Cache::classical_full, &Cache::classical_reduced},
                 {"noncommutative", &Cache::nc_full, &Cache::nc_reduced}};
  for (const auto& [kname, full, reduced] : pairs)
    for (size_t i = 0; i < items.size(); ++i) {
      GridPoint g{std::string("realization:") + kname + ":" + items[i].first, Kind::Identity, fulln,
                  1e-10, false, {}};
      Getter get = items[i].second;
      g.eval = [cache, full, reduced, get](int trial, std::uint64_t) {
        return Sample{get(((*cache).*full)[trial]), get(((*cache).*reduced)[trial])};
      };
      ctx.grids.push_back(g);
    }
  add_witness(ctx);
}

}  // namespace

Report run_ratio_experiment(const ExperimentConfig& input) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig cfg = input;
  cfg.validate();
  Context ctx{cfg, nullptr, {}, {}, {}};
  Report report;
  report.experiment = experiment_name(cfg.experiment);
  report.config = cfg.to_json();

  if (cfg.experiment != Experiment::Example) {
    ctx.tower = build_tower(cfg.tower);
    ctx.coeffs = coefficients_for(*ctx.tower, cfg.coeffs, cfg.seed);
    report.config["coefficients"] = to_json(ctx.coeffs);
    if (cfg.profile.kind == Profile::SingleDifference) ctx.tower->check_level(cfg.profile.level, false);
  }
  const bool wants_extremal =
      cfg.experiment == Experiment::Example ||
      (cfg.extremal_max_n > 0 &&
       (cfg.experiment == Experiment::WeakType || cfg.experiment == Experiment::LpLq ||
        cfg.experiment == Experiment::HardyColumn || cfg.experiment == Experiment::L1aToBMO ||
        cfg.experiment == Experiment::L1aToM || cfg.experiment == Experiment::H1ToBMO));
  if (wants_extremal)
    for (int n = 1; n <= cfg.extremal_max_n; ++n)
      ctx.classical.push_back(extremal_example(n, ExampleKind::ClassicalIndicator));

  if (cfg.experiment == Experiment::Example)
    build_example_grids(ctx);
  else
    build_grids(ctx);

  for (size_t gi = 0; gi < ctx.grids.size(); ++gi) {
    const GridPoint& g = ctx.grids[gi];
    std::vector<Sample> samples(g.trials);
    std::vector<std::uint64_t> seeds(g.trials, 0);
    for (int i = 0; i < g.trials; ++i)
      if (g.seeded) seeds[i] = derive_seed(cfg.seed, {gi, static_cast<std::uint64_t>(i)});
    parallel_for(g.trials, cfg.threads, [&](int i) {
      samples[i] = catch_all([&] { return g.eval(i, seeds[i]); });
    });
    summarize(g, samples, seeds, report);
  }
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------- output

const GridSummary* Report::find(const std::string& grid) const {
  for (const auto& s : summary)
    if (s.grid == grid) return &s;
  return nullptr;
}

namespace {

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double denum(const Json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace

Json Report::to_json() const {
  Json sj = Json::array();
  for (const auto& s : summary)
    sj.push_back({{"grid", s.grid},
                  {"kind", s.kind},
                  {"count", s.count},
                  {"excluded", s.excluded},
                  {"max", num(s.max)},
                  {"mean", num(s.mean)},
                  {"q50", num(s.q50)},
                  {"q90", num(s.q90)},
                  {"q99", num(s.q99)},
                  {"first_half_max", num(s.first_half_max)},
                  {"worst", num(s.worst)},
                  {"stable", s.stable},
                  {"extra", s.extra}});
  Json tj = Json::array();
  for (const auto& t : trials)
    tj.push_back({{"grid", t.grid},
                  {"trial", t.trial},
                  {"seed", t.seed},
                  {"lhs", num(t.lhs)},
                  {"rhs", num(t.rhs)},
                  {"ratio", t.ratio ? num(*t.ratio) : Json(nullptr)}});
  Json fj = Json::array();
  for (const auto& f : failures)
    fj.push_back({{"grid", f.grid}, {"trial", f.trial}, {"seed", f.seed}, {"check", f.check}, {"value", num(f.value)}});
  return {{"schema_version", schema_version},
          {"experiment", experiment},
          {"config", config},
          {"summary", sj},
          {"trials", tj},
          {"failures", fj},
          {"wall_time", wall_time}};
}

Report Report::from_json(const Json& j) {
  Report r;
  r.schema_version = j.at("schema_version").get<int>();
  r.experiment = j.at("experiment").get<std::string>();
  r.config = j.at("config");
  for (const auto& s : j.at("summary")) {
    GridSummary g;
    g.grid = s.at("grid").get<std::string>();
    g.kind = s.at("kind").get<std::string>();
    g.count = s.at("count").get<int>();
    g.excluded = s.at("excluded").get<int>();
    g.max = denum(s.at("max"));
    g.mean = denum(s.at("mean"));
    g.q50 = denum(s.at("q50"));
    g.q90 = denum(s.at("q90"));
    g.q99 = denum(s.at("q99"));
    g.first_half_max = denum(s.at("first_half_max"));
    g.worst = denum(s.at("worst"));
    g.stable = s.at("stable").get<bool>();
    g.extra = s.at("extra");
    r.summary.push_back(std::move(g));
  }
  for (const auto& t : j.at("trials")) {
    TrialRecord rec;
    rec.grid = t.at("grid").get<std::string>();
    rec.trial = t.at("trial").get<int>();
    rec.seed = t.at("seed").get<std::uint64_t>();
    rec.lhs = denum(t.at("lhs"));
    rec.rhs = denum(t.at("rhs"));
    if (!t.at("ratio").is_null()) rec.ratio = t.at("ratio").get<double>();
    r.trials.push_back(std::move(rec));
  }
  for (const auto& f : j.at("failures"))
    r.failures.push_back({f.at("grid").get<std::string>(), f.at("trial").get<int>(),
                          f.at("seed").get<std::uint64_t>(), f.at("check").get<std::string>(),
                          denum(f.at("value"))});
  r.wall_time = j.at("wall_time").get<double>();
  return r;
}

std::string render_report(const Report& r, ReportFormat format) {
  if (format == ReportFormat::JSON) return r.to_json().dump(2) + "\n";
  std::ostringstream os;
  os.precision(17);
  os << "experiment,grid,kind,count,excluded,max,mean,q50,q90,q99,first_half_max,worst,stable,failures\n";
  for (const auto& s : r.summary) {
    long nf = std::count_if(r.failures.begin(), r.failures.end(),
                            [&](const FailureRecord& f) { return f.grid == s.grid; });
    os << r.experiment << ',' << '"' << s.grid << '"' << ',' << s.kind << ',' << s.count << ','
       << s.excluded << ',' << s.max << ',' << s.mean << ',' << s.q50 << ',' << s.q90 << ','
       << s.q99 << ',' << s.first_half_max << ',' << s.worst << ',' << (s.stable ? "true" : "false")
       << ',' << nf << '\n';
  }
  return os.str();
}

void emit_report(const Report& r, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << render_report(r, format);
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace ncmart
