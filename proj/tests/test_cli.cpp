#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bozd/experiment.hpp"

using namespace bozd;
using namespace bozd::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("bozd_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool has_error(const std::vector<Diagnostic>& d, const std::string& field, ErrorKind kind) {
  for (const auto& x : d)
    if (x.severity == Diagnostic::Severity::Error && x.field == field && x.kind == kind) return true;
  return false;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(BOZD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const char* kCompareZero = R"({
  "command": "zd-compare",
  "initial_data": {"family": "zero"},
  "t": [1.0],
  "x_points": {"from": -2, "to": 2, "count": 5}
})";

}  // namespace

TEST_CASE("hash and exit code helpers") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(exit_code(ErrorKind::Validation) == 2);
  CHECK(exit_code(ErrorKind::RegimeRefusal) == 3);
  CHECK(exit_code(ErrorKind::Numerical) == 4);
  CHECK(command_names().size() == 8);
}

TEST_CASE("family registry") {
  CHECK(FamilyRegistry::make({{"family", "gaussian"}, {"a", 2.0}})(0.0) == doctest::Approx(2.0));
  CHECK(FamilyRegistry::make({{"family", "zero"}}).is_zero());
  CHECK_THROWS_AS(FamilyRegistry::make({{"family", "nope"}}), ValidationError);
  CHECK_THROWS_AS(FamilyRegistry::make({{"a", 1.0}}), ValidationError);
  const auto r = FamilyRegistry::make(
      {{"family", "custom_sampled"},
       {"x", {-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0}},
       {"u", {0.0, 0.0, 0.0, 0.5, 1.0, 0.5, 0.0, 0.0, 0.0}}});
  CHECK(r(0.0) == doctest::Approx(1.0));
}

TEST_CASE("parse diagnostics carry fields and lines") {
  const auto bad_json = parse_config("{\n  \"command\": \"pi-u\",\n  \"t\": [0.1,\n}");
  REQUIRE_FALSE(bad_json.ok());
  CHECK(bad_json.diagnostics[0].line >= 3);

  const std::string text = R"({
  "command": "pi-u",
  "initial_data": {"family": "gaussian", "sigmaa": 1},
  "t": [0.1],
  "z_points": [[0, -1]],
  "numerics": {"m": 20},
  "colour": "blue"
})";
  const auto r = parse_config(text);
  bool z_err = false, m_err = false, unknown_warn = false, param_warn = false;
  std::vector<Diagnostic> all = r.diagnostics;
  if (r.config) {
    const auto v = validate(*r.config);
    all.insert(all.end(), v.begin(), v.end());
  }
  for (const auto& d : all) {
    if (d.field.rfind("z_points", 0) == 0 && d.severity == Diagnostic::Severity::Error) z_err = true;
    if (d.field == "numerics.m" && d.severity == Diagnostic::Severity::Error) {
      m_err = true;
      CHECK(d.line == 6);
    }
    if (d.field == "colour" && d.severity == Diagnostic::Severity::Warning) unknown_warn = true;
    if (d.severity == Diagnostic::Severity::Warning && d.field == "initial_data.sigmaa")
      param_warn = true;
  }
  CHECK(z_err);
  CHECK(m_err);
  CHECK(unknown_warn);
  CHECK(param_warn);

  const auto mismatch = parse_config(R"({"command": "pi-u"})", "zd-op");
  CHECK_FALSE(mismatch.ok());
}

TEST_CASE("regime checks in validation") {
  auto c = parse_config(R"({"command": "zd-branch", "initial_data": {"family": "spike_train"},
                            "t": [0.5], "x_points": [0.0]})");
  REQUIRE(c.config);
  CHECK(has_error(validate(*c.config), "initial_data", ErrorKind::RegimeRefusal));

  auto lin = parse_config(R"({"command": "zd-op",
      "initial_data": {"family": "spike_train", "exponent": 1, "decay": 8},
      "t": [5.0], "z_points": [[0, 1]]})");
  REQUIRE(lin.config);
  bool refused = false;
  for (const auto& d : validate(*lin.config))
    if (d.kind == ErrorKind::RegimeRefusal && d.severity == Diagnostic::Severity::Error) refused = true;
  CHECK(refused);

  auto zl = parse_config(R"({"command": "zd-log", "initial_data": {"family": "gaussian"},
                             "t": [0.0], "z_points": [[0, 1]]})");
  REQUIRE(zl.config);
  CHECK(has_error(validate(*zl.config), "t[0]", ErrorKind::Validation));
}

TEST_CASE("config hash ignores output_dir and threads") {
  auto a = parse_config(kCompareZero);
  REQUIRE(a.config);
  auto b = *a.config;
  b.output_dir = "elsewhere";
  b.threads = 7;
  CHECK(config_hash(*a.config) == config_hash(b));
  b.seed = 99;
  CHECK(config_hash(*a.config) != config_hash(b));
  CHECK(config_hash(*a.config).rfind("fnv1a64:", 0) == 0);
}

TEST_CASE("zero data gives zero columns and byte-identical reruns") {
  const auto dir = scratch("zero");
  auto loaded = parse_config(kCompareZero);
  REQUIRE(loaded.ok());
  auto cfg = *loaded.config;
  cfg.output_dir = (dir / "a").string();
  const auto r1 = run(cfg);
  REQUIRE(r1.exit_code == 0);
  cfg.output_dir = (dir / "b").string();
  const auto r2 = run(cfg);
  REQUIRE(r2.exit_code == 0);
  REQUIRE(r1.artifacts.size() == r2.artifacts.size());
  bool saw_csv = false, saw_plot = false;
  for (std::size_t k = 0; k < r1.artifacts.size(); ++k) {
    CHECK(r1.artifacts[k].filename() == r2.artifacts[k].filename());
    CHECK(slurp(r1.artifacts[k]) == slurp(r2.artifacts[k]));
    const auto name = r1.artifacts[k].filename().string();
    if (name.rfind("plot_", 0) == 0) saw_plot = true;
    if (r1.artifacts[k].extension() == ".csv") {
      saw_csv = true;
      const auto text = slurp(r1.artifacts[k]);
      CHECK(text.rfind("# bo-zdl", 0) == 0);
      CHECK(text.find("config_hash=fnv1a64:") != std::string::npos);
      std::istringstream in(text);
      std::string line;
      bool header_seen = false;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
          header_seen = true;
          continue;
        }
        std::stringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');  // x
        std::getline(row, cell, ',');  // zd_branch
        CHECK(std::stod(cell) == 0.0);
        std::getline(row, cell, ',');  // zd_boundary
        CHECK(std::stod(cell) == 0.0);
      }
    }
  }
  CHECK(saw_csv);
  CHECK(saw_plot);
  fs::remove_all(dir);
}

TEST_CASE("identity-suite contains the exact n = 1 case") {
  const auto dir = scratch("identity");
  auto loaded = parse_config(R"({"command": "identity-suite",
      "identity": {"lemma_n": [1], "region_n": [], "toeplitz_n": [2], "qmc_n": [],
                   "include_complex": false}})");
  REQUIRE(loaded.ok());
  auto cfg = *loaded.config;
  cfg.output_dir = dir.string();
  const auto res = run(cfg);
  REQUIRE(res.exit_code == 0);
  const auto report = json::parse(slurp(dir / "identity_report.json"));
  bool n1 = false;
  for (const auto& r : report["records"]) {
    CHECK(r["status"] == "pass");
    if (r["check"] == "lemma17" && r["n"] == 1) n1 = true;
  }
  CHECK(n1);
  CHECK(report.contains("provenance"));
  fs::remove_all(dir);
}

TEST_CASE("binary exit codes") {
  const auto dir = scratch("binary");
  const auto ok = write_config(dir, "ok.json", kCompareZero);
  CHECK(run_binary("zd-compare --config " + ok.string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out"));
  CHECK(run_binary("zd-compare --config " + ok.string() + " --check") == 0);
  CHECK(run_binary("zd-compare --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_binary("no-such-command --config " + ok.string()) == 2);
  CHECK(run_binary("zd-compare") == 2);
  CHECK(run_binary("zd-compare --config " + ok.string() + " --threads 0") == 2);

  const auto bad = write_config(dir, "bad.json", R"({"command": "pi-u",
      "initial_data": {"family": "gaussian"}, "t": [0.1], "z_points": [[0, -1]]})");
  CHECK(run_binary("pi-u --config " + bad.string()) == 2);

  const auto refuse = write_config(dir, "refuse.json", R"({"command": "zd-branch",
      "initial_data": {"family": "spike_train"}, "t": [0.5], "x_points": [0.0]})");
  CHECK(run_binary("zd-branch --config " + refuse.string() + " --out " + (dir / "r").string()) == 3);

  // xi_max far too small to resolve the transform: numerical failure.
  const auto crit = write_config(dir, "crit.json", R"({"command": "zd-op",
      "initial_data": {"family": "gaussian"}, "t": [0.3], "z_points": [[0, 1]],
      "numerics": {"m": 2048, "xi_max": 3}})");
  CHECK(run_binary("zd-op --config " + crit.string() + " --out " + (dir / "c").string()) == 4);
  fs::remove_all(dir);
}
