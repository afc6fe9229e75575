#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncmart/harness.hpp"
#include "ncmart/serialize.hpp"

using namespace ncmart;

namespace {

std::string without_wall_time(const Report& r) {
  Json j = r.to_json();
  j.erase("wall_time");
  return j.dump();
}

ExperimentConfig small(Experiment e, int trials = 20) {
  ExperimentConfig c;
  c.experiment = e;
  c.trials = trials;
  c.seed = 77;
  c.extremal_max_n = 4;
  return c;
}

}  // namespace

TEST_CASE("experiment names round-trip") {
  for (int i = 0; i <= static_cast<int>(Experiment::Example); ++i) {
    auto e = static_cast<Experiment>(i);
    CHECK(parse_experiment(experiment_name(e)) == e);
  }
  CHECK(parse_experiment("WeakType") == Experiment::WeakType);
  CHECK(parse_experiment("l1a_to_bmo") == Experiment::L1aToBMO);
  CHECK(!parse_experiment("strong-type"));
}

TEST_CASE("random martingales per profile") {
  auto t = build_tower({TensorMatrix{{2, 2, 2}}, std::nullopt});
  auto g = random_martingale(t, {Profile::Gaussian, 1}, 1);
  CHECK(g.length() == 3);
  auto p = random_martingale(t, {Profile::PositiveL1Normalized, 1}, 2);
  Operator x = p.final_value();
  CHECK(std::abs(t->trace(x) - 1.0) < 1e-12);
  Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (x + x.adjoint()));
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
  auto s = random_martingale(t, {Profile::SingleDifference, 2}, 3);
  CHECK(s.difference(1).norm() == 0.0);
  CHECK(s.difference(2).norm() > 0.0);
  CHECK(s.difference(3).norm() == 0.0);
  CHECK_THROWS_AS(random_martingale(t, {Profile::SingleDifference, 4}, 3), InvalidInput);
  // same seed, same draw
  CHECK((random_martingale(t, {Profile::Gaussian, 1}, 9).final_value() -
         random_martingale(t, {Profile::Gaussian, 1}, 9).final_value()).norm() == 0.0);
}

TEST_CASE("full and reduced realizations of the extremal example agree") {
  for (auto kind : {ExampleKind::ClassicalIndicator, ExampleKind::NoncommutativeProjection})
    for (int n = 1; n <= 6; ++n) {
      auto full = extremal_example(n, kind, ExampleScale::Full);
      auto red = extremal_example(n, kind, ExampleScale::Reduced);
      CHECK(red.tower->ambient_dim() < full.tower->ambient_dim() + (n <= 2 ? 4 : 0));
      for (int k = 0; k <= n; ++k) {
        auto a = singular_value_function(*full.tower, full.martingale.value(k));
        auto b = singular_value_function(*red.tower, red.martingale.value(k));
        CHECK(a.steps().size() == b.steps().size());
        for (double p : {0.5, 1.0, 2.0, 5.0}) CHECK(lp_norm(a, p) == doctest::Approx(lp_norm(b, p)).epsilon(1e-12));
      }
      for (double alpha : {0.25, 0.5, 0.75}) {
        auto fa = fractional_integral(full.martingale, alpha, full.coeffs).final_value();
        auto fb = fractional_integral(red.martingale, alpha, red.coeffs).final_value();
        CHECK(lp_norm(*full.tower, fa, 1.0) == doctest::Approx(lp_norm(*red.tower, fb, 1.0)).epsilon(1e-12));
      }
    }
  CHECK_THROWS_AS(extremal_example(7, ExampleKind::ClassicalIndicator, ExampleScale::Full), InvalidInput);
  CHECK_THROWS_AS(extremal_example(0, ExampleKind::ClassicalIndicator), InvalidInput);
}

TEST_CASE("reports are deterministic and independent of thread count") {
  for (auto e : {Experiment::WeakType, Experiment::AtomMap, Experiment::SingularValueLemma, Experiment::H1ToBMO}) {
    auto cfg = small(e);
    cfg.threads = 1;
    auto a = run_ratio_experiment(cfg);
    cfg.threads = 4;
    auto b = run_ratio_experiment(cfg);
    CHECK(without_wall_time(a) == without_wall_time(b));
    cfg.seed = 78;
    CHECK(without_wall_time(a) != without_wall_time(run_ratio_experiment(cfg)));
  }
}

TEST_CASE("report JSON round-trip") {
  auto r = run_ratio_experiment(small(Experiment::AtomMap, 10));
  REQUIRE(!r.failures.empty());  // rank spread is reported as a failure row
  auto back = Report::from_json(Json::parse(r.to_json().dump()));
  CHECK(back.to_json().dump() == r.to_json().dump());
  for (const auto& f : r.failures) CHECK(!f.grid.empty());
  const auto* s = r.find(r.summary.front().grid);
  REQUIRE(s != nullptr);
  CHECK(s->extra.contains("rank_spread"));
}

TEST_CASE("zero martingales are sentinel-excluded") {
  for (auto e : {Experiment::WeakType, Experiment::LpLq, Experiment::HardyColumn, Experiment::L1aToBMO,
                 Experiment::L1aToM, Experiment::H1ToBMO}) {
    auto cfg = small(e, 6);
    cfg.extremal_max_n = 0;
    cfg.profile.kind = Profile::Zero;
    auto r = run_ratio_experiment(cfg);
    CHECK(r.passed());
    for (const auto& s : r.summary) {
      CHECK(s.count == 0);
      CHECK(s.excluded == 6);
    }
    for (const auto& t : r.trials) CHECK(!t.ratio);
  }
}

TEST_CASE("hard suites pass on the dyadic tensor tower") {
  for (auto e : {Experiment::EmbeddingLemmas, Experiment::SingularValueLemma, Experiment::HdScalar,
                 Experiment::QuasiTriangle, Experiment::SelfAdjointness}) {
    auto r = run_ratio_experiment(small(e, 50));
    CAPTURE(r.experiment);
    CHECK(r.passed());
  }
}

TEST_CASE("example experiment covers the four identities for both realizations") {
  auto cfg = small(Experiment::Example);
  cfg.extremal_max_n = 8;
  auto r = run_ratio_experiment(cfg);
  CHECK(r.passed());
  for (const char* kind : {"classical", "noncommutative"})
    for (const char* item : {"i:l1-norm", "ii:lp-norm:eps=0.25", "ii:lp-norm:eps=0.5", "iii:half-integral-l2",
                             "iv:quarter-integral-l2-squared"}) {
      const auto* s = r.find(std::string(kind) + ":" + item);
      REQUIRE(s != nullptr);
      CHECK(s->count == 8);
      CHECK(s->worst <= 1e-9);
    }
  CHECK(r.find("strong-type-witness") != nullptr);
}

TEST_CASE("config parsing and validation") {
  auto c = ExperimentConfig::from_json(Json::parse(R"({
    "experiment": "lp-lq", "tower": "abelian:3", "trials": 7, "seed": 5,
    "pq": [[1.5, 3]], "profile": "single:2", "coeffs": [0.5, 0.25, 0.125], "threads": 3
  })"));
  CHECK(c.experiment == Experiment::LpLq);
  CHECK(c.trials == 7);
  CHECK(c.profile.kind == Profile::SingleDifference);
  CHECK(c.profile.level == 2);
  CHECK(c.coeffs.kind == CoeffSource::Kind::User);
  c.validate();
  Json echo = c.to_json();
  CHECK(!echo.contains("threads"));
  CHECK(ExperimentConfig::from_json(echo).to_json() == echo);

  CHECK_THROWS_AS(ExperimentConfig::from_json(Json::parse(R"({"trails": 3})")), InvalidInput);
  CHECK_THROWS_AS(ExperimentConfig::from_json(Json::parse(R"({"experiment": "nope"})")), InvalidInput);
  auto bad = small(Experiment::LpLq);
  bad.pq = {{3.0, 2.0}};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  auto bad2 = small(Experiment::SingularValueLemma);
  bad2.alphas = {0.5};
  CHECK_THROWS_AS(bad2.validate(), InvalidInput);
  auto bad3 = small(Experiment::WeakType);
  bad3.coeffs = {CoeffSource::Kind::User, {0.5}};
  CHECK_THROWS_AS(run_ratio_experiment(bad3), InvalidInput);
}

TEST_CASE("CSV has one row per grid point and failures carry seeds") {
  auto r = run_ratio_experiment(small(Experiment::AtomMap, 10));
  std::string csv = render_report(r, ReportFormat::CSV);
  std::istringstream in(csv);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(r.summary.size()));
  auto path = std::filesystem::temp_directory_path() / "ncmart_report_test.json";
  emit_report(r, ReportFormat::JSON, path);
  std::ifstream f(path);
  Json j = Json::parse(f);
  CHECK(j.at("schema_version") == 1);
  for (const auto& fail : j.at("failures")) {
    CHECK(fail.contains("seed"));
    CHECK(fail.contains("grid"));
  }
  std::filesystem::remove(path);
  CHECK_THROWS(emit_report(r, ReportFormat::JSON, "/nonexistent-dir/x.json"));
}
