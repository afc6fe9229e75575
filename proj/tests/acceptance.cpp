// One line per acceptance criterion; exit status is nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ncmart/cli.hpp"
#include "ncmart/harness.hpp"
#include "ncmart/random.hpp"
#include "ncmart/serialize.hpp"

using namespace ncmart;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

void note(Outcome& o, const std::string& s) {
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += s;
}

ExperimentConfig config(Experiment e, FiltrationSpec tower, int trials, std::uint64_t seed) {
  ExperimentConfig c;
  c.experiment = e;
  c.tower = std::move(tower);
  c.trials = trials;
  c.seed = seed;
  return c;
}

FiltrationSpec dyadic(int levels) { return {TensorMatrix{std::vector<int>(levels, 2)}, std::nullopt}; }

// Summarizes a report's failures as "grid check value" strings, at most `limit`.
std::string failure_digest(const Report& r, size_t limit = 6) {
  std::string s;
  for (size_t i = 0; i < r.failures.size() && i < limit; ++i) {
    const auto& f = r.failures[i];
    s += (i ? ", " : "") + f.grid + " " + f.check + "=" + fmt(f.value, 4);
  }
  if (r.failures.size() > limit) s += ", +" + std::to_string(r.failures.size() - limit) + " more";
  return s;
}

Outcome closed_form_zeta() {
  Outcome o;
  auto start = Clock::now();
  auto path = std::filesystem::temp_directory_path() / "ncmart_acceptance_zeta.json";
  std::ostringstream out, err;
  int code = run_cli({"zeta", "--tower", "tensor:2,2,2,2,2,2", "--out", path.string()}, out, err);
  double t = seconds_since(start);
  if (code != 0) {
    o.pass = false;
    note(o, "exit " + std::to_string(code) + " " + err.str());
  }
  std::ifstream in(path);
  Json j = Json::parse(in);
  double worst = 0.0;
  for (const auto& row : j.at("rows")) {
    int k = row.at("k");
    double z = row.at("optimized"), closed = row.at("closed_form");
    double gap = std::abs(z - std::ldexp(1.0, -k)) / std::ldexp(1.0, -k);
    worst = std::max(worst, gap);
    if (closed != std::ldexp(1.0, -k) || !(gap <= 1e-6)) o.pass = false;
  }
  if (j.at("rows").size() != 6) o.pass = false;
  if (t > 60.0) o.pass = false;
  note(o, "k=1..6 max relative gap " + fmt(worst) + ", " + fmt(t) + " s (limit 60 s)");
  return o;
}

Outcome example_reproduction() {
  Outcome o;
  auto start = Clock::now();
  ExperimentConfig c;
  c.experiment = Experiment::Example;
  c.extremal_max_n = 12;
  c.eps = {0.25, 0.5};
  c.seed = 1;
  Report r = run_ratio_experiment(c);
  double t = seconds_since(start);
  double identity_err = 0.0, agreement_err = 0.0;
  int identity_grids = 0;
  for (const auto& s : r.summary) {
    if (s.grid.find("partial-sums") != std::string::npos) continue;
    if (s.grid.rfind("classical:", 0) == 0 || s.grid.rfind("noncommutative:", 0) == 0) {
      identity_err = std::max(identity_err, s.worst);
      identity_grids++;
      if (s.count != 12) o.pass = false;
    }
    if (s.grid.rfind("agreement:", 0) == 0) agreement_err = std::max(agreement_err, s.worst);
  }
  if (identity_grids != 10 || !(identity_err <= 1e-9) || !(agreement_err <= 1e-10) || !r.passed()) o.pass = false;
  if (t > 10.0) o.pass = false;
  note(o, "N=1..12, both realizations: max identity error " + fmt(identity_err) + ", classical/noncommutative gap " +
              fmt(agreement_err) + ", " + fmt(t) + " s (limit 10 s)");
  if (!r.passed()) note(o, failure_digest(r));
  return o;
}

Outcome hard_suites() {
  Outcome o;
  auto start = Clock::now();
  int grids = 0;
  long samples = 0;
  double worst_slack = kInf;
  for (auto e : {Experiment::EmbeddingLemmas, Experiment::QuasiTriangle, Experiment::SingularValueLemma,
                 Experiment::HdScalar, Experiment::SelfAdjointness}) {
    Report r = run_ratio_experiment(config(e, dyadic(4), 1000, 2024));
    for (const auto& s : r.summary) {
      grids++;
      samples += s.count;
      if (s.kind == "inequality") worst_slack = std::min(worst_slack, s.worst);
    }
    if (!r.passed()) {
      o.pass = false;
      note(o, r.experiment + ": " + failure_digest(r));
    }
  }
  double t = seconds_since(start);
  if (t > 300.0) o.pass = false;
  note(o, std::to_string(grids) + " grid points, " + std::to_string(samples) + " samples on the dyadic tower (M_2)^4, min slack " +
              fmt(worst_slack) + ", " + fmt(t) + " s (limit 300 s)");
  return o;
}

Outcome structural() {
  Outcome o;
  double ce = 0.0, hardy = 0.0, lorentz = 0.0, weak = 0.0;
  CustomSubalgebraBases custom;  // M_2 (x) C^2 inside M_2 (x) M_2
  {
    auto unit = [](int d, int r, int c) {
      Operator e = Operator::Zero(d, d);
      e(r, c) = 1.0;
      return e;
    };
    std::vector<Operator> l1, l2, l3;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        Operator big = Operator::Zero(4, 4);
        big.block(2 * r, 2 * c, 2, 2) = identity(2);
        l1.push_back(big);
        for (int u = 0; u < 2; ++u) {
          Operator e = Operator::Zero(4, 4);
          e(2 * r + u, 2 * c + u) = 1.0;
          l2.push_back(e);
        }
      }
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) l3.push_back(unit(4, i, j));
    custom.spanning_sets = {l1, l2, l3};
  }
  std::vector<TowerPtr> towers{build_tower(dyadic(3)), build_tower({AbelianDyadic{4}, std::nullopt}),
                               build_tower({custom, std::nullopt})};
  for (const auto& t : towers) {
    const int d = t->ambient_dim(), L = t->levels();
    for (int trial = 0; trial < 500; ++trial) {
      Rng rng(derive_seed(31, {static_cast<std::uint64_t>(trial)}));
      Operator x = t->expectation(L, rng.complex_matrix(d));
      const int n = rng.uniform_int(0, L);
      Operator ex = t->expectation(n, x);
      Operator a = t->expectation(n, rng.complex_matrix(d)), b = t->expectation(n, rng.complex_matrix(d));
      const double scale = std::max(1.0, operator_norm(x));
      ce = std::max(ce, operator_norm(Operator(t->expectation(n, ex) - ex)) / scale);
      if (n > 0 || t->origin() == Origin::Scalars) ce = std::max(ce, std::abs(t->trace(ex) - t->trace(x)) / scale);
      Eigen::SelfAdjointEigenSolver<Operator> es(t->expectation(n, Operator(x.adjoint() * x)));
      ce = std::max(ce, -es.eigenvalues().minCoeff() / (scale * scale));
      ce = std::max(ce, operator_norm(Operator(t->expectation(n, Operator(a * x * b)) - a * ex * b)) /
                            (scale * std::max(1.0, operator_norm(a) * operator_norm(b))));

      auto m = adapt(t, x);
      double l2 = t->l2_norm(m.final_value() - m.start());
      hardy = std::max(hardy, std::abs(hardy_column_norm(m, 2.0) - l2) / std::max(1.0, l2));

      auto s = singular_value_function(*t, x);
      for (double p : {0.5, 1.0, 1.5, 2.0, 3.0}) {
        double lp = lp_norm(s, p);
        lorentz = std::max(lorentz, std::abs(lorentz_norm(s, p, p) - lp) / std::max(1.0, lp));
        if (p >= 1.0) {
          double w = weak_norm(s, p);
          weak = std::max(weak, std::abs(w - weak_norm_by_distribution(s, p)) / std::max(1.0, w));
        }
      }
    }
  }
  if (!(ce <= 1e-9) || !(hardy <= 1e-10) || !(lorentz <= 1e-10) || !(weak <= 1e-10)) o.pass = false;
  note(o, "500 inputs x {tensor, abelian, custom}: conditional expectation " + fmt(ce) + " (tol 1e-9), L2 Hardy isometry " +
              fmt(hardy) + ", L_{p,p}=L_p " + fmt(lorentz) + ", weak-norm formulas " + fmt(weak) + " (tol 1e-10)");
  return o;
}

Outcome theorem_ratios() {
  Outcome o;
  std::vector<std::string> unstable;
  double witness_err = 0.0;
  bool witness_ok = true;
  for (auto e : {Experiment::WeakType, Experiment::LpLq, Experiment::HardyColumn, Experiment::L1aToBMO,
                 Experiment::L1aToM}) {
    auto c = config(e, dyadic(4), 500, 7);
    c.extremal_max_n = 12;
    Report r = run_ratio_experiment(c);
    for (const auto& f : r.failures) {
      if (f.grid == "strong-type-witness") {
        witness_ok = false;
        continue;
      }
      if (f.check == "unstable_max")
        unstable.push_back(f.grid + " x" + fmt(f.value, 4));
      else
        note(o, f.grid + " " + f.check);
      o.pass = false;
    }
    if (const auto* w = r.find("strong-type-witness")) witness_err = std::max(witness_err, w->worst);
  }
  if (!witness_ok) o.pass = false;
  note(o, std::string("strong-type witness sqrt(N/2) ") + (witness_ok ? "holds" : "FAILS") + ", max error " +
              fmt(witness_err) + ", strictly increasing in N");
  if (!unstable.empty()) {
    std::string s = "running max grows > 10% after the first half on: ";
    for (size_t i = 0; i < unstable.size(); ++i) s += (i ? ", " : "") + unstable[i];
    note(o, s);
  } else {
    note(o, "all ratios finite, running max stable within 10%");
  }
  return o;
}

Outcome atom_mapping() {
  Outcome o;
  double residual = 0.0;
  std::string spreads;
  for (const auto& tower : {dyadic(4), FiltrationSpec{AbelianDyadic{6}, std::nullopt}}) {
    Report r = run_ratio_experiment(config(Experiment::AtomMap, tower, 200, 11));
    const std::string name = build_tower(tower)->describe();
    for (const auto& s : r.summary) {
      residual = std::max(residual, s.worst);
      double spread = s.extra.value("rank_spread", 0.0);
      spreads += (spreads.empty() ? "" : ", ") + name + " " + s.grid + " max C=" + fmt(s.max, 4) + " spread=" + fmt(spread, 3);
    }
    for (const auto& f : r.failures)
      if (f.check != "rank_spread") note(o, name + " " + f.grid + " " + f.check + "=" + fmt(f.value));
    if (!r.passed()) o.pass = false;
  }
  note(o, "conditions after transform max residual " + fmt(residual) + " (tol 1e-9); " + spreads + " (limit 0.1)");
  return o;
}

Outcome determinism() {
  Outcome o;
  int checked = 0;
  for (int i = 0; i <= static_cast<int>(Experiment::Example); ++i) {
    auto e = static_cast<Experiment>(i);
    auto c = config(e, dyadic(3), 40, 99);
    c.extremal_max_n = e == Experiment::Example ? 8 : 6;
    c.threads = 1;
    Json a = run_ratio_experiment(c).to_json();
    c.threads = 8;
    Json b = run_ratio_experiment(c).to_json();
    a.erase("wall_time");
    b.erase("wall_time");
    checked++;
    if (a.dump() != b.dump()) {
      o.pass = false;
      note(o, std::string(experiment_name(e)) + " differs");
    }
  }
  note(o, std::to_string(checked) + " experiments, 1 vs 8 threads, reports byte-identical apart from wall_time");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  std::vector<Criterion> all{
      {"1 closed-form zeta on the dyadic tensor tower", closed_form_zeta},
      {"2 extremal example identities", example_reproduction},
      {"3 hard inequality suites", hard_suites},
      {"4 structural properties", structural},
      {"5 theorem-level ratios and strong-type witness", theorem_ratios},
      {"6 atom mapping", atom_mapping},
      {"7 determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : all) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) failed++;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (7 - failed) << "/7 criteria pass" << std::endl;
  return failed ? 1 : 0;
}
