#include "ncmart/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ncmart/harness.hpp"
#include "ncmart/serialize.hpp"

namespace ncmart {
namespace {

struct UsageError : InvalidInput {
  using InvalidInput::InvalidInput;
};

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw UsageError(path + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

FiltrationSpec read_tower(const std::string& arg, const std::string& origin) {
  FiltrationSpec spec;
  if (arg.empty()) throw UsageError("--tower is required");
  if (std::filesystem::is_regular_file(arg))
    spec = tower_spec_from_json(read_json_file(arg));
  else
    spec = tower_spec_from_string(arg);
  if (!origin.empty()) spec.origin = origin_from_string(origin);
  return spec;
}

std::string num(double v, int precision = 10) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
}

// ---------------------------------------------------------------- zeta

struct ZetaArgs {
  std::string tower, origin, tower_config, out;
  int levels = 0;
  int restarts = 32;
  double tol = 1e-10;
  std::uint64_t seed = 0;
  int threads = 0;
};

int cmd_zeta(const ZetaArgs& a, std::ostream& out) {
  FiltrationSpec spec = a.tower_config.empty() ? read_tower(a.tower, a.origin)
                                               : read_tower(a.tower_config, a.origin);
  TowerPtr t = build_tower(spec);
  const int levels = a.levels > 0 ? std::min(a.levels, t->levels()) : t->levels();
  ZetaOptions opt;
  opt.restarts = a.restarts;
  opt.tol = a.tol;
  opt.seed = a.seed;
  opt.threads = a.threads;
  auto closed = closed_form_zeta(*t);

  out << "tower " << t->describe() << "\n";
  out << std::left << std::setw(4) << "k" << std::setw(20) << "closed_form" << std::setw(20)
      << "optimized" << "gap\n";
  Json rows = Json::array();
  bool ok = true;
  for (int k = 1; k <= levels; ++k) {
    ZetaCertificate c = zeta_optimize(*t, k, opt);
    Json row = {{"k", k}, {"optimized", c.zeta}, {"ratio", c.ratio}, {"best_start", c.best_start}};
    out << std::setw(4) << k;
    if (closed) {
      double z = (*closed)[k - 1];
      double gap = std::abs(c.zeta - z) / z;
      if (!(gap <= 1e-4)) ok = false;
      row["closed_form"] = z;
      row["gap"] = gap;
      out << std::setw(20) << num(z) << std::setw(20) << num(c.zeta) << num(gap, 3) << "\n";
    } else {
      row["closed_form"] = nullptr;
      row["gap"] = nullptr;
      out << std::setw(20) << "-" << std::setw(20) << num(c.zeta) << "-\n";
    }
    rows.push_back(row);
  }
  out << std::right;
  if (!a.out.empty()) {
    Json doc = {{"tower", tower_spec_to_json(spec)},
                {"restarts", a.restarts},
                {"tol", a.tol},
                {"seed", a.seed},
                {"rows", rows}};
    write_text(a.out, doc.dump(2) + "\n");
  }
  if (!ok) out << "optimizer disagrees with the closed form beyond 1e-4\n";
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string experiment, config, out, format = "json", coeffs, tower;
  std::uint64_t seed = 0;
  int threads = 0;
  int trials = 0;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  // precedence: flags > config file > defaults
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = ExperimentConfig::from_json(read_json_file(a.config));
  if (!a.experiment.empty()) {
    auto e = parse_experiment(a.experiment);
    if (!e) throw UsageError("unknown experiment \"" + a.experiment + "\"");
    cfg.experiment = *e;
  } else if (a.config.empty() || !read_json_file(a.config).contains("experiment")) {
    throw UsageError("--experiment is required (or an \"experiment\" key in --config)");
  }
  cfg.seed = a.seed;
  if (a.trials > 0) cfg.trials = a.trials;
  if (a.threads > 0) cfg.threads = a.threads;
  if (!a.tower.empty()) cfg.tower = read_tower(a.tower, "");
  if (!a.coeffs.empty()) {
    if (a.coeffs == "auto") {
      cfg.coeffs = {CoeffSource::Kind::Auto, {}};
    } else if (a.coeffs == "optimize") {
      cfg.coeffs = {CoeffSource::Kind::Optimize, {}};
    } else {
      Json j = read_json_file(a.coeffs);
      cfg.coeffs.kind = CoeffSource::Kind::User;
      try {
        cfg.coeffs.values = (j.is_object() ? j.at("values") : j).get<std::vector<double>>();
      } catch (const Json::exception& e) {
        throw UsageError(a.coeffs + ": expected a list of coefficients: " + e.what());
      }
    }
  }
  ReportFormat format;
  if (a.format == "json")
    format = ReportFormat::JSON;
  else if (a.format == "csv")
    format = ReportFormat::CSV;
  else
    throw UsageError("--format must be json or csv");

  Report r = run_ratio_experiment(cfg);
  if (a.out.empty()) {
    out << render_report(r, format);
  } else {
    emit_report(r, format, a.out);
    out << std::left << std::setw(48) << "grid" << std::setw(12) << "kind" << std::setw(8) << "count"
        << std::setw(16) << "max" << "worst\n";
    for (const auto& s : r.summary)
      out << std::setw(48) << s.grid << std::setw(12) << s.kind << std::setw(8) << s.count
          << std::setw(16) << num(s.max, 8) << num(s.worst, 4) << "\n";
    out << std::right;
    for (const auto& f : r.failures)
      out << "FAILURE " << f.grid << " trial " << f.trial << " seed " << f.seed << " " << f.check
          << " " << num(f.value, 6) << "\n";
    out << r.experiment << ": " << r.failures.size() << " failure(s)\n";
  }
  return r.passed() ? 0 : 1;
}

// ---------------------------------------------------------------- example

struct ExampleArgs {
  int n = 0;
  std::string kind = "classical", scale = "auto", operator_out, tower_out;
  std::vector<double> eps{0.25, 0.5};
};

int cmd_example(const ExampleArgs& a, std::ostream& out) {
  ExampleKind kind;
  if (a.kind == "classical")
    kind = ExampleKind::ClassicalIndicator;
  else if (a.kind == "noncommutative")
    kind = ExampleKind::NoncommutativeProjection;
  else
    throw UsageError("--kind must be classical or noncommutative");
  ExampleScale scale;
  if (a.scale == "auto")
    scale = ExampleScale::Auto;
  else if (a.scale == "full")
    scale = ExampleScale::Full;
  else if (a.scale == "reduced")
    scale = ExampleScale::Reduced;
  else
    throw UsageError("--scale must be auto, full or reduced");
  for (double e : a.eps)
    if (!(e > 0.0 && e < 1.0)) throw UsageError("--eps values must lie in (0,1)");

  ExtremalExample ex = extremal_example(a.n, kind, scale);
  const Tower& t = *ex.tower;
  const Operator f = ex.martingale.final_value();
  const double N = a.n;
  auto s = singular_value_function(t, f);
  struct Row {
    std::string name;
    double value, expected;
  };
  std::vector<Row> rows;
  rows.push_back({"||f||_1", lp_norm(s, 1.0), 1.0});
  for (double e : a.eps)
    rows.push_back({"||f||_p, p=(4-" + num(e, 4) + ")/3", lp_norm(s, (4.0 - e) / 3.0),
                    std::pow(2.0, (1.0 - e) / (4.0 - e) * N)});
  rows.push_back({"||I^(1/2) f||_2", t.l2_norm(fractional_integral(ex.martingale, 0.5, ex.coeffs).final_value()),
                  std::sqrt(N / 2.0)});
  double q = t.l2_norm(fractional_integral(ex.martingale, 0.25, ex.coeffs).final_value());
  rows.push_back({"||I^(1/4) f||_2^2", q * q, (std::pow(2.0, N / 2.0) - 1.0) / (2.0 - std::sqrt(2.0))});

  out << "tower " << t.describe() << " (ambient " << t.ambient_dim() << ")\n";
  out << std::left << std::setw(28) << "quantity" << std::setw(24) << "computed" << std::setw(24)
      << "expected" << "error\n";
  bool ok = true;
  for (const auto& r : rows) {
    double err = std::abs(r.value - r.expected);
    if (!(err <= 1e-9)) ok = false;
    out << std::setw(28) << r.name << std::setw(24) << num(r.value, 16) << std::setw(24)
        << num(r.expected, 16) << num(err, 3) << "\n";
  }
  out << std::right;
  if (!a.operator_out.empty()) write_text(a.operator_out, operator_to_json(f).dump() + "\n");
  if (!a.tower_out.empty()) write_text(a.tower_out, tower_spec_to_json(t.spec()).dump() + "\n");
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- norms

struct NormsArgs {
  std::string op, tower, origin;
  std::vector<std::string> norms;
};

std::vector<double> norm_params(const std::string& spec, const std::string& body, size_t count) {
  std::vector<double> v;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "inf") {
      v.push_back(kInf);
      continue;
    }
    try {
      size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("bad number in --norm " + spec);
    }
  }
  if (v.size() != count) throw UsageError("--norm " + spec + " expects " + std::to_string(count) + " parameter(s)");
  return v;
}

int cmd_norms(const NormsArgs& a, std::ostream& out) {
  if (a.op.empty()) throw UsageError("--operator is required");
  TowerPtr t = build_tower(read_tower(a.tower, a.origin));
  Operator x;
  try {
    x = operator_from_json(read_json_file(a.op));
  } catch (const Json::exception& e) {
    throw UsageError(a.op + ": " + e.what());
  }
  t->check_dim(x);
  if (a.norms.empty()) throw UsageError("at least one --norm is required");
  std::optional<MartingaleSequence> m;
  auto mart = [&]() -> const MartingaleSequence& {
    if (!m) m = adapt(t, x);
    return *m;
  };
  for (const auto& spec : a.norms) {
    auto colon = spec.find(':');
    std::string name = spec.substr(0, colon);
    std::string body = colon == std::string::npos ? "" : spec.substr(colon + 1);
    std::string value;
    if (name == "lp") {
      value = num(lp_norm(*t, x, norm_params(spec, body, 1)[0]), 15);
    } else if (name == "lorentz") {
      auto v = norm_params(spec, body, 2);
      value = num(lorentz_norm(singular_value_function(*t, x), v[0], v[1]), 15);
    } else if (name == "weak") {
      value = num(weak_norm(singular_value_function(*t, x), norm_params(spec, body, 1)[0]), 15);
    } else if (name == "hardy_c") {
      value = num(hardy_column_norm(mart(), norm_params(spec, body, 1)[0]), 15);
    } else if (name == "bmo") {
      if (!body.empty()) throw UsageError("--norm bmo takes no parameter");
      value = num(bmo_norm(mart()), 15);
    } else if (name == "lipschitz_c") {
      auto b = lipschitz_column_lower(mart(), norm_params(spec, body, 1)[0]);
      value = num(b.value, 15) + (b.exact ? " (exact)" : " (lower bound)");
    } else {
      throw UsageError("unknown norm \"" + spec + "\"");
    }
    out << spec << "\t" << value << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"noncommutative martingale fractional integrals"};
  app.name("ncmart");
  app.require_subcommand(1, 1);

  ZetaArgs za;
  auto* zeta = app.add_subcommand("zeta", "coefficients zeta_k: closed form vs optimizer");
  zeta->add_option("--tower", za.tower, "tensor:2,2,2 | abelian:4 | path to tower JSON");
  zeta->add_option("--origin", za.origin, "zero | scalars");
  zeta->add_option("--tower-config", za.tower_config, "tower JSON file");
  zeta->add_option("--levels", za.levels, "only levels 1..K");
  zeta->add_option("--restarts", za.restarts)->check(CLI::NonNegativeNumber);
  zeta->add_option("--tol", za.tol)->check(CLI::PositiveNumber);
  zeta->add_option("--seed", za.seed);
  zeta->add_option("--threads", za.threads)->check(CLI::NonNegativeNumber);
  zeta->add_option("--out", za.out, "write JSON table");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "run a verification experiment");
  verify->add_option("--experiment", va.experiment);
  verify->add_option("--config", va.config, "experiment JSON; flags take precedence");
  verify->add_option("--seed", va.seed)->required();
  verify->add_option("--out", va.out);
  verify->add_option("--format", va.format, "json | csv");
  verify->add_option("--threads", va.threads)->check(CLI::NonNegativeNumber);
  verify->add_option("--trials", va.trials)->check(CLI::PositiveNumber);
  verify->add_option("--coeffs", va.coeffs, "auto | optimize | JSON file");
  verify->add_option("--tower", va.tower);

  ExampleArgs ea;
  auto* example = app.add_subcommand("example", "the extremal f_N and its norm identities");
  example->add_option("--n", ea.n)->required()->check(CLI::Range(1, 30));
  example->add_option("--kind", ea.kind, "classical | noncommutative");
  example->add_option("--scale", ea.scale, "auto | full | reduced");
  example->add_option("--eps", ea.eps);
  example->add_option("--operator-out", ea.operator_out, "write f_N as operator JSON");
  example->add_option("--tower-out", ea.tower_out, "write the tower as JSON");

  NormsArgs na;
  auto* norms = app.add_subcommand("norms", "evaluate norms of one operator");
  norms->add_option("--operator", na.op);
  norms->add_option("--tower", na.tower);
  norms->add_option("--origin", na.origin);
  norms->add_option("--norm", na.norms, "lp:p lorentz:p,q weak:p hardy_c:p bmo lipschitz_c:beta");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*zeta) return cmd_zeta(za, out);
    if (*verify) return cmd_verify(va, out);
    if (*example) return cmd_example(ea, out);
    if (*norms) return cmd_norms(na, out);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ncmart
