// End-to-end checks of the bpca binary: command wiring, exit codes,
// deterministic outputs, and conformance of every emitted JSON document to
// its shipped schema.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bpca/k1.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef BPCA_BIN
#error "BPCA_BIN must be defined by the build"
#endif
#ifndef BPCA_SCHEMA_DIR
#error "BPCA_SCHEMA_DIR must be defined by the build"
#endif

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BPCA_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path make_workdir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Minimal structural validator for the subset of JSON Schema the shipped
// schemas use: type, required, properties, items.
bool validates(const json& value, const json& schema, std::string* why) {
  if (schema.contains("type")) {
    const std::string type = schema.at("type");
    const bool ok =
        (type == "object" && value.is_object()) ||
        (type == "array" && value.is_array()) ||
        (type == "string" && value.is_string()) ||
        (type == "integer" && value.is_number_integer()) ||
        (type == "number" && value.is_number()) ||
        (type == "boolean" && value.is_boolean());
    if (!ok) {
      *why = "expected type " + type + ", got " + value.dump().substr(0, 40);
      return false;
    }
  }
  if (schema.contains("required"))
    for (const auto& key : schema.at("required"))
      if (!value.contains(key.get<std::string>())) {
        *why = "missing required key " + key.get<std::string>();
        return false;
      }
  if (schema.contains("properties") && value.is_object())
    for (const auto& [key, sub] : schema.at("properties").items())
      if (value.contains(key) && !validates(value.at(key), sub, why))
        return false;
  if (schema.contains("items") && value.is_array())
    for (const auto& item : value)
      if (!validates(item, schema.at("items"), why)) return false;
  return true;
}

void check_schema(const json& value, const char* schema_name) {
  const json schema =
      read_json(fs::path(BPCA_SCHEMA_DIR) / schema_name);
  std::string why;
  const bool ok = validates(value, schema, &why);
  CAPTURE(schema_name);
  CAPTURE(why);
  CHECK(ok);
}

}  // namespace

TEST_CASE("simulate: deterministic outputs, schema, and n<d rejection") {
  const fs::path dir = make_workdir("bpca_cli_sim");
  write_json(dir / "sim.json", {{"n", 30},
                                {"d", 5},
                                {"k", 1},
                                {"tau0", 100.0},
                                {"seed", 7}});
  CHECK(run_cli("simulate --config " + (dir / "sim.json").string() +
                " --out " + dir.string()) == 0);
  REQUIRE(fs::exists(dir / "X.csv"));
  REQUIRE(fs::exists(dir / "generative.json"));
  check_schema(read_json(dir / "generative.json"), "generative.schema.json");

  // Rerun writes byte-identical files.
  const std::string x_before = read_bytes(dir / "X.csv");
  const std::string g_before = read_bytes(dir / "generative.json");
  CHECK(run_cli("simulate --config " + (dir / "sim.json").string() +
                " --out " + dir.string()) == 0);
  CHECK(read_bytes(dir / "X.csv") == x_before);
  CHECK(read_bytes(dir / "generative.json") == g_before);

  // n < d violates the model and is a schema error (exit 2).
  write_json(dir / "bad.json",
             {{"n", 3}, {"d", 5}, {"k", 1}, {"tau0", 100.0}, {"seed", 7}});
  CHECK(run_cli("simulate --config " + (dir / "bad.json").string() +
                " --out " + dir.string()) == 2);

  // Unknown keys are rejected too.
  write_json(dir / "unknown.json", {{"n", 30},
                                    {"d", 5},
                                    {"k", 1},
                                    {"tau0", 100.0},
                                    {"seed", 7},
                                    {"typo_key", 1}});
  CHECK(run_cli("simulate --config " + (dir / "unknown.json").string() +
                " --out " + dir.string()) == 2);
}

TEST_CASE("fit: trace and final state with schemas; epsilon ordering") {
  const fs::path dir = make_workdir("bpca_cli_fit");
  write_json(dir / "sim.json",
             {{"n", 40}, {"d", 6}, {"k", 1}, {"tau0", 50.0}, {"seed", 3}});
  REQUIRE(run_cli("simulate --config " + (dir / "sim.json").string() +
                  " --out " + dir.string()) == 0);

  write_json(dir / "fit.json", {{"data", (dir / "X.csv").string()},
                                {"k", 1},
                                {"tau0", 50.0},
                                {"epsilon", 1e-10}});
  REQUIRE(run_cli("fit --config " + (dir / "fit.json").string() + " --out " +
                  dir.string()) == 0);
  const json final_state = read_json(dir / "final_state.json");
  check_schema(final_state, "final_state.schema.json");
  CHECK(final_state.at("status") == "converged");

  long sweeps_loose = 0, sweeps_tight = 0;
  {
    std::ifstream trace(dir / "trace.jsonl");
    std::string line, last;
    while (std::getline(trace, line)) {
      check_schema(json::parse(line), "trace_record.schema.json");
      last = line;
      ++sweeps_loose;
    }
    CHECK(sweeps_loose == final_state.at("sweeps").get<long>());
  }

  // Refitting the same config overwrites byte-identical outputs.
  const std::string state_before = read_bytes(dir / "final_state.json");
  const std::string trace_before = read_bytes(dir / "trace.jsonl");
  REQUIRE(run_cli("fit --config " + (dir / "fit.json").string() + " --out " +
                  dir.string()) == 0);
  CHECK(read_bytes(dir / "final_state.json") == state_before);
  CHECK(read_bytes(dir / "trace.jsonl") == trace_before);

  // A tighter epsilon runs strictly more sweeps.
  write_json(dir / "fit_tight.json", {{"data", (dir / "X.csv").string()},
                                      {"k", 1},
                                      {"tau0", 50.0},
                                      {"epsilon", 1e-15}});
  REQUIRE(run_cli("fit --config " + (dir / "fit_tight.json").string() +
                  " --out " + dir.string()) == 0);
  sweeps_tight = read_json(dir / "final_state.json").at("sweeps").get<long>();
  CHECK(sweeps_tight > sweeps_loose);

  // Missing data file is a numerical/IO abort, not a crash.
  write_json(dir / "fit_missing.json",
             {{"data", (dir / "nope.csv").string()}, {"k", 1}, {"tau0", 1.0}});
  CHECK(run_cli("fit --config " + (dir / "fit_missing.json").string() +
                " --out " + dir.string()) == 3);
}

TEST_CASE("analyze-k1: figure data and fixed-point report") {
  const fs::path dir = make_workdir("bpca_cli_k1");
  write_json(dir / "sim.json",
             {{"n", 100}, {"d", 10}, {"k", 1}, {"tau0", 100.0}, {"seed", 7}});
  REQUIRE(run_cli("simulate --config " + (dir / "sim.json").string() +
                  " --out " + dir.string()) == 0);
  write_json(dir / "analyze.json",
             {{"data", (dir / "X.csv").string()},
              {"tau0", 100.0},
              {"epsilon", 1e-15},
              {"init", {{"mu_z", "random(13)"}}}});
  REQUIRE(run_cli("analyze-k1 --config " + (dir / "analyze.json").string() +
                  " --out " + dir.string()) == 0);

  const json fp = read_json(dir / "fixed_point.json");
  check_schema(fp, "fixed_point.schema.json");
  REQUIRE(fp.at("candidates").size() == 1);
  CHECK(fp.at("candidates")[0].at("verified").get<bool>());
  CHECK(fp.at("candidates")[0].at("jacobian_eig_mags")[0].get<double>() < 1.0);

  // Direction-error series: the bound column dominates the observed one
  // for t >= 2 while the bound is above the double-precision floor.
  std::ifstream direction(dir / "direction_error.csv");
  std::string line;
  std::getline(direction, line);
  CHECK(line == "t,observed_z,bound_z,observed_w,bound_w");
  int checked = 0;
  while (std::getline(direction, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    // strtod: the bound column underflows to subnormals late in the trace,
    // which std::stod rejects as out of range.
    while (std::getline(ss, cell, ','))
      row.push_back(std::strtod(cell.c_str(), nullptr));
    REQUIRE(row.size() == 5);
    if (row[0] >= 2.0 && row[2] > 1e-13) {
      CHECK(row[1] <= row[2]);
      CHECK(row[3] <= row[4]);
      ++checked;
    }
  }
  CHECK(checked >= 2);

  // Both scaling-error series are straight lines on the log
  // scale over the pre-floor range.
  REQUIRE(fs::exists(dir / "scaling_error.csv"));
  {
    const json fp_report = read_json(dir / "fixed_point.json");
    const double a_star = fp_report.at("candidates")[0].at("a").get<double>();
    const double b_star = fp_report.at("candidates")[0].at("b").get<double>();
    std::ifstream scaling(dir / "scaling_error.csv");
    std::string header;
    std::getline(scaling, header);
    CHECK(header == "t,abs_err_a,abs_err_b");
    std::vector<double> ts_a, la, ts_b, lb;
    std::string row_line;
    while (std::getline(scaling, row_line)) {
      std::stringstream ss(row_line);
      std::string cell;
      std::vector<double> row;
      while (std::getline(ss, cell, ','))
        row.push_back(std::strtod(cell.c_str(), nullptr));
      REQUIRE(row.size() == 3);
      if (row[1] > 1e-12 * std::max(1.0, a_star)) {
        ts_a.push_back(row[0]);
        la.push_back(std::log(row[1]));
      }
      if (row[2] > 1e-12 * std::max(1.0, b_star)) {
        ts_b.push_back(row[0]);
        lb.push_back(std::log(row[2]));
      }
    }
    REQUIRE(ts_a.size() >= 100);
    const bpca::LinearFit fit_a = bpca::fit_line(ts_a, la);
    const bpca::LinearFit fit_b = bpca::fit_line(ts_b, lb);
    CHECK(fit_a.r2 > 0.99);
    CHECK(fit_b.r2 > 0.99);
    CHECK(fit_a.slope < 0.0);
  }

  // k != 1 is rejected up front.
  write_json(dir / "analyze_k2.json", {{"data", (dir / "X.csv").string()},
                                       {"tau0", 100.0},
                                       {"k", 2}});
  CHECK(run_cli("analyze-k1 --config " + (dir / "analyze_k2.json").string() +
                " --out " + dir.string()) == 2);
}

TEST_CASE("gcorr and stationary pipelines") {
  const fs::path dir = make_workdir("bpca_cli_stat");
  write_json(dir / "sim.json", {{"n", 4},
                                {"d", 3},
                                {"k", 2},
                                {"tau0", 100.0},
                                {"lambda_diag", {1.0, 2.0}},
                                {"seed", 27}});
  REQUIRE(run_cli("simulate --config " + (dir / "sim.json").string() +
                  " --out " + dir.string()) == 0);

  write_json(dir / "stationary.json",
             {{"data", (dir / "X.csv").string()},
              {"k", 2},
              {"tau0", 100.0},
              {"lambda_diag", {1.0, 2.0}}});
  REQUIRE(run_cli("stationary --config " + (dir / "stationary.json").string() +
                  " --out " + dir.string()) == 0);
  const json hessian = read_json(dir / "hessian.json");
  check_schema(hessian, "hessian.schema.json");
  CHECK_FALSE(hessian.at("singular_flag").get<bool>());
  CHECK(hessian.at("grad_norm_at_point").get<double>() <= 1e-12);
  CHECK(fs::exists(dir / "eigvals.csv"));

  // The isotropic prior flips the singular flag on the same data.
  write_json(dir / "stationary_iso.json",
             {{"data", (dir / "X.csv").string()},
              {"k", 2},
              {"tau0", 100.0},
              {"lambda_diag", {1.0, 1.0}}});
  REQUIRE(run_cli("stationary --config " +
                  (dir / "stationary_iso.json").string() + " --out " +
                  (dir / "iso").string()) == 0);
  CHECK(read_json(dir / "iso" / "hessian.json").at("singular_flag").get<bool>());

  // gcorr on the refined state emitted above (no second refinement).
  write_json(dir / "gcorr_cfg.json",
             {{"data", (dir / "X.csv").string()},
              {"k", 2},
              {"tau0", 100.0},
              {"lambda_diag", {1.0, 2.0}},
              {"state", (dir / "refined_state.json").string()},
              {"refine", false}});
  REQUIRE(run_cli("gcorr --config " + (dir / "gcorr_cfg.json").string() +
                  " --out " + dir.string()) == 0);
  check_schema(read_json(dir / "gcorr.json"), "gcorr.schema.json");
}

TEST_CASE("gcorr emits a schema-conformant report") {
  const fs::path dir = make_workdir("bpca_cli_gcorr");
  write_json(dir / "sim.json", {{"n", 4},
                                {"d", 3},
                                {"k", 2},
                                {"tau0", 100.0},
                                {"lambda_diag", {1.0, 2.0}},
                                {"seed", 27}});
  REQUIRE(run_cli("simulate --config " + (dir / "sim.json").string() +
                  " --out " + dir.string()) == 0);
  write_json(dir / "gc.json", {{"data", (dir / "X.csv").string()},
                               {"k", 2},
                               {"tau0", 100.0},
                               {"lambda_diag", {1.0, 2.0}}});
  REQUIRE(run_cli("gcorr --config " + (dir / "gc.json").string() + " --out " +
                  dir.string()) == 0);
  const json report = read_json(dir / "gcorr.json");
  check_schema(report, "gcorr.schema.json");
  for (const auto& term : report.at("terms")) CHECK(term.get<double>() > 0.0);
  CHECK(report.at("gamma0").get<double>() ==
        doctest::Approx(0.25 * (1.0 + std::exp(-1.0))));
}

TEST_CASE("verify runs the randomized suites and reports per its schema") {
  const fs::path dir = make_workdir("bpca_cli_verify");
  write_json(dir / "cfg.json", {{"trials", 1000}, {"seed", 1}, {"dim", 3}});
  CHECK(run_cli("verify --config " + (dir / "cfg.json").string() + " --out " +
                dir.string()) == 0);
  const json report = read_json(dir / "verify.json");
  check_schema(report, "verify.schema.json");
  CHECK(report.at("all_ok").get<bool>());
  CHECK(report.at("suites").size() == 5);
  for (const auto& suite : report.at("suites"))
    CHECK(suite.at("passes") == suite.at("trials"));
}
