#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ncmart/cli.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = ncmart::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "ncmart_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

Json read(const fs::path& p) {
  std::ifstream in(p);
  return Json::parse(in);
}

}  // namespace

TEST_CASE("zeta on the dyadic tensor tower") {
  auto path = scratch("zeta.json");
  auto r = run({"zeta", "--tower", "tensor:2,2,2", "--restarts", "4", "--out", path.string()});
  CHECK(r.code == 0);
  Json j = read(path);
  REQUIRE(j.at("rows").size() == 3);
  for (int k = 1; k <= 3; ++k) {
    const auto& row = j.at("rows")[k - 1];
    CHECK(row.at("closed_form").get<double>() == std::ldexp(1.0, -k));
    CHECK(row.at("gap").get<double>() < 1e-6);
  }
  CHECK(r.out.find("0.125") != std::string::npos);
}

TEST_CASE("zeta on the abelian tower") {
  auto path = scratch("zeta_ab.json");
  auto r = run({"zeta", "--tower", "abelian:4", "--restarts", "4", "--out", path.string()});
  CHECK(r.code == 0);
  Json j = read(path);
  std::vector<double> expect{1.0, 0.5, 0.25, 0.125};
  for (int k = 0; k < 4; ++k) CHECK(j.at("rows")[k].at("optimized").get<double>() == doctest::Approx(expect[k]).epsilon(1e-8));
}

TEST_CASE("zeta options") {
  auto r = run({"zeta", "--tower", "tensor:3,2", "--levels", "1", "--restarts", "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("0.333333") != std::string::npos);
  auto path = scratch("tower.json");
  write(path, R"({"kind": "tensor", "dims": [2, 2], "origin": "scalars"})");
  CHECK(run({"zeta", "--tower-config", path.string(), "--restarts", "2"}).code == 0);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({"zeta", "--tower", "tensor:2,x"}).code == 2);
  CHECK(run({"zeta", "--tower", "cube:3"}).code == 2);
  CHECK(run({"zeta"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"zeta", "verify"}).code == 2);
  CHECK(run({"verify", "--experiment", "example"}).code == 2);  // --seed is required
  CHECK(run({"verify", "--experiment", "nope", "--seed", "1"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("malformed config reports the parse position") {
  auto path = scratch("bad.json");
  write(path, "{\"experiment\": \"example\",, }");
  auto r = run({"verify", "--config", path.string(), "--seed", "1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("byte 26") != std::string::npos);
  write(path, R"({"experiment": "lp-lq", "pq": [[3, 2]]})");
  CHECK(run({"verify", "--config", path.string(), "--seed", "1"}).code == 2);
}

TEST_CASE("verify example writes the four identities and exits 0") {
  auto cfg = scratch("ex.json");
  write(cfg, R"({"extremal_max_n": 6})");
  auto out = scratch("ex_report.json");
  auto r = run({"verify", "--experiment", "example", "--config", cfg.string(), "--seed", "1", "--out", out.string()});
  CHECK(r.code == 0);
  Json j = read(out);
  CHECK(j.at("experiment") == "example");
  CHECK(j.at("failures").empty());
  int identities = 0;
  for (const auto& s : j.at("summary")) {
    std::string g = s.at("grid");
    if (g.rfind("classical:", 0) == 0 && g.find("partial") == std::string::npos) ++identities;
  }
  CHECK(identities == 5);  // (i), (ii) for two epsilons, (iii), (iv)
}

TEST_CASE("verify weak-type on the dyadic tower without the extremal grid exits 0") {
  auto cfg = scratch("weak.json");
  write(cfg, R"({"tower": "tensor:2,2,2", "extremal_max_n": 0})");
  auto r = run({"verify", "--experiment", "weak-type", "--config", cfg.string(), "--seed", "4", "--trials", "500",
                "--format", "csv"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("experiment,grid", 0) == 0);
}

TEST_CASE("verification failures exit 1") {
  auto out = scratch("atoms.json");
  auto r = run({"verify", "--experiment", "atom-map", "--seed", "2", "--trials", "20", "--out", out.string()});
  CHECK(r.code == 1);
  CHECK(!read(out).at("failures").empty());
}

TEST_CASE("flags override the config file and the seed determines the report") {
  auto cfg = scratch("det.json");
  write(cfg, R"({"experiment": "quasi-triangle", "trials": 5, "seed": 99})");
  auto a = scratch("det_a.json"), b = scratch("det_b.json");
  CHECK(run({"verify", "--config", cfg.string(), "--seed", "3", "--trials", "12", "--threads", "1", "--out", a.string()}).code == 0);
  CHECK(run({"verify", "--config", cfg.string(), "--seed", "3", "--trials", "12", "--threads", "3", "--out", b.string()}).code == 0);
  Json ja = read(a), jb = read(b);
  CHECK(ja.at("config").at("seed") == 3);
  CHECK(ja.at("config").at("trials") == 12);
  ja.erase("wall_time");
  jb.erase("wall_time");
  CHECK(ja.dump() == jb.dump());
}

TEST_CASE("coefficients from a file") {
  auto coeffs = scratch("coeffs.json");
  write(coeffs, "[0.5, 0.25, 0.125]");
  auto r = run({"verify", "--experiment", "self-adjointness", "--seed", "1", "--trials", "5", "--coeffs",
                coeffs.string(), "--out", scratch("c.json").string()});
  CHECK(r.code == 0);
  CHECK(read(scratch("c.json")).at("config").at("coefficients").at("provenance") == "user_supplied");
  write(coeffs, "{\"values\": \"x\"}");
  CHECK(run({"verify", "--experiment", "self-adjointness", "--seed", "1", "--coeffs", coeffs.string()}).code == 2);
}

TEST_CASE("norms of the identity and of f_N") {
  auto id = scratch("id.json");
  Json op = {{"dim", 4}, {"re", {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}}};
  write(id, op.dump());
  auto r = run({"norms", "--operator", id.string(), "--tower", "tensor:2,2", "--norm", "lp:3"});
  CHECK(r.code == 0);
  CHECK(r.out == "lp:3\t1\n");

  const int n = 5;
  auto f = scratch("f.json"), t = scratch("f_tower.json");
  CHECK(run({"example", "--n", std::to_string(n), "--operator-out", f.string(), "--tower-out", t.string()}).code == 0);
  auto norms = run({"norms", "--operator", f.string(), "--tower", t.string(), "--norm", "lp:1", "--norm", "weak:2",
                    "--norm", "lorentz:2,2", "--norm", "hardy_c:2", "--norm", "bmo", "--norm", "lipschitz_c:0.5"});
  CHECK(norms.code == 0);
  std::istringstream lines(norms.out);
  std::string name;
  double value;
  std::map<std::string, double> got;
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    ls >> name >> value;
    got[name] = value;
  }
  CHECK(got["lp:1"] == doctest::Approx(1.0));
  CHECK(got["weak:2"] == doctest::Approx(std::pow(2.0, n / 2.0)));
  CHECK(got.count("lipschitz_c:0.5") == 1);

  CHECK(run({"norms", "--operator", id.string(), "--tower", "tensor:2,2,2", "--norm", "lp:1"}).code == 2);
  CHECK(run({"norms", "--operator", id.string(), "--tower", "tensor:2,2", "--norm", "sup"}).code == 2);
  CHECK(run({"norms", "--operator", id.string(), "--tower", "tensor:2,2", "--norm", "lp:a"}).code == 2);
}

TEST_CASE("example subcommand") {
  auto r = run({"example", "--n", "3", "--kind", "noncommutative"});
  CHECK(r.code == 0);
  CHECK(r.out.find("||I^(1/2) f||_2") != std::string::npos);
  CHECK(run({"example", "--n", "8", "--scale", "full"}).code == 2);
  CHECK(run({"example", "--n", "0"}).code == 2);
}
