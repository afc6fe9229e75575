#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ncmart/algebra.hpp"
#include "ncmart/fractional.hpp"
#include "ncmart/martingale.hpp"

namespace ncmart {

using Json = nlohmann::json;

enum class Profile { Gaussian, PositiveL1Normalized, SingleDifference, Zero };

struct ProfileSpec {
  Profile kind = Profile::Gaussian;
  int level = 1;  // SingleDifference only
};

MartingaleSequence random_martingale(const TowerPtr& t, const ProfileSpec& profile,
                                     std::uint64_t seed);

enum class ExampleKind { ClassicalIndicator, NoncommutativeProjection };
// Full: the dyadic towers themselves (ambient 2^N). Reduced: the filtration
// generated by f_N's own martingale, which carries identical norms at ambient
// size N+1 (classical) or 2N (noncommutative). Auto picks Full for N <= 6.
enum class ExampleScale { Auto, Full, Reduced };

struct ExtremalExample {
  TowerPtr tower;
  MartingaleSequence martingale;
  CoefficientSequence coeffs;  // nu_k = 2^-k, passed as user-supplied values
};

ExtremalExample extremal_example(int n, ExampleKind kind, ExampleScale scale = ExampleScale::Auto);

enum class Experiment {
  WeakType,
  LpLq,
  HardyColumn,
  L1aToBMO,
  L1aToM,
  H1ToBMO,
  AtomMap,
  EmbeddingLemmas,
  SingularValueLemma,
  HdScalar,
  QuasiTriangle,
  SelfAdjointness,
  Example,
};
const char* experiment_name(Experiment e);
std::optional<Experiment> parse_experiment(const std::string& name);

struct CoeffSource {
  enum class Kind { Auto, Optimize, User } kind = Kind::Auto;
  std::vector<double> values;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Example;
  FiltrationSpec tower = FiltrationSpec{TensorMatrix{{2, 2, 2}}, std::nullopt};
  int trials = 100;
  std::uint64_t seed = 0;
  std::vector<double> alphas;                    // empty: experiment default
  std::vector<std::pair<double, double>> pq;     // empty: experiment default
  std::vector<double> ps;                        // Lemma basic(ii) exponents
  std::vector<double> eps;                       // Example item (ii)
  ProfileSpec profile;
  CoeffSource coeffs;
  int extremal_max_n = 12;  // 0 disables the extremal grid points
  int threads = 0;          // scheduling only; not echoed in reports

  static ExperimentConfig from_json(const Json& j);
  Json to_json() const;
  // Fills empty grids with the experiment's defaults and checks hypothesis ranges.
  void validate();
};

// One evaluated sample at a grid point. For inequalities lhs <= rhs is
// asserted; for identities |lhs - rhs| <= tolerance; for ratios lhs / rhs is
// the empirical constant.
struct TrialRecord {
  std::string grid;
  int trial = 0;
  std::uint64_t seed = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  std::optional<double> ratio;  // empty: 0/0 sentinel, excluded from statistics
};

struct FailureRecord {
  std::string grid;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string check;
  double value = 0.0;
};

struct GridSummary {
  std::string grid;
  std::string kind;  // ratio | inequality | identity | witness | atom
  int count = 0;
  int excluded = 0;
  double max = 0.0;
  double mean = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
  double first_half_max = 0.0;
  double worst = 0.0;  // min slack (inequality) or max error (identity, witness)
  bool stable = true;
  Json extra = Json::object();
};

struct Report {
  int schema_version = 1;
  std::string experiment;
  Json config;
  std::vector<GridSummary> summary;
  std::vector<TrialRecord> trials;
  std::vector<FailureRecord> failures;
  double wall_time = 0.0;

  bool passed() const { return failures.empty(); }
  const GridSummary* find(const std::string& grid) const;
  Json to_json() const;
  static Report from_json(const Json& j);
};

Report run_ratio_experiment(const ExperimentConfig& cfg);

enum class ReportFormat { JSON, CSV };
std::string render_report(const Report& r, ReportFormat format);
void emit_report(const Report& r, ReportFormat format, const std::filesystem::path& path);

}  // namespace ncmart
