#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "stratipw/cohort.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = STRATIPW_CLI_BIN;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stratipw_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
}

std::size_t line_count(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

}  // namespace

TEST_CASE("simulate writes a deterministic cohort CSV") {
  const fs::path dir = fresh_dir("simulate");
  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);
  const std::string first = slurp(dir / "cohort.csv");
  CHECK(line_count(first) == 181);  // header + 180 rows
  CHECK(line_count(slurp(dir / "fig1_data.csv")) == 181);

  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);
  CHECK(slurp(dir / "cohort.csv") == first);

  REQUIRE(run("simulate --seed 77 --out-dir " + dir.string()) == 0);
  CHECK(slurp(dir / "cohort.csv") != first);
}

TEST_CASE("malformed config exits with code 2") {
  const fs::path dir = fresh_dir("badconfig");
  spit(dir / "bad.json", "{ not json");
  CHECK(run("simulate --config " + (dir / "bad.json").string()) == 2);
}

TEST_CASE("weigh emits an audit CSV whose weights satisfy the invariants") {
  const fs::path dir = fresh_dir("weigh");
  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);
  REQUIRE(run("weigh --input " + (dir / "cohort.csv").string() + " --out-dir " +
              dir.string()) == 0);

  const json fits = json::parse(slurp(dir / "fit_summary.json"));
  CHECK(fits.at("stratified").get<bool>());
  CHECK(fits.at("per_stratum_fits").size() == 2);
  CHECK(fits.at("per_stratum_fits").at("S1").at("converged").get<bool>());

  // Reload the weights column-wise and re-check the pipeline guarantees.
  const std::string csv = slurp(dir / "weights.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "id,stratum,Z,e_hat,w,w_prime,w_doubleprime");
  double sum_w = 0, sum_wpp = 0, s2_wpp = 0;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string id, stratum, z, e, w, wp, wpp;
    std::getline(fields, id, ',');
    std::getline(fields, stratum, ',');
    std::getline(fields, z, ',');
    std::getline(fields, e, ',');
    std::getline(fields, w, ',');
    std::getline(fields, wp, ',');
    std::getline(fields, wpp, ',');
    sum_w += std::stod(w);
    sum_wpp += std::stod(wpp);
    if (stratum == "S2") s2_wpp += std::stod(wpp);
    ++rows;
  }
  CHECK(rows == 180);
  CHECK(sum_wpp == doctest::Approx(sum_w).epsilon(1e-8));
  CHECK(s2_wpp / sum_wpp == doctest::Approx(100.0 / 180.0).epsilon(1e-10));
}

TEST_CASE("weigh refuses a stratum with an empty arm, exit 3") {
  const fs::path dir = fresh_dir("weigh_onearm");
  spit(dir / "cohort.csv",
       "id,stratum,Z,age\n"
       "1,A,0,50\n2,A,1,61\n3,A,0,52\n4,A,1,63\n"
       "5,B,1,70\n6,B,1,71\n");
  CHECK(run("weigh --input " + (dir / "cohort.csv").string() + " --out-dir " + dir.string()) ==
        3);
}

TEST_CASE("unknown design covariate exits with code 2") {
  const fs::path dir = fresh_dir("weigh_badcov");
  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);
  spit(dir / "config.json",
       R"({"design": {"main": ["bmi"]}})");
  CHECK(run("weigh --config " + (dir / "config.json").string() + " --input " +
            (dir / "cohort.csv").string() + " --out-dir " + dir.string()) == 2);
}

TEST_CASE("numerical failures exit with code 4") {
  const fs::path dir = fresh_dir("weigh_collinear");
  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);
  spit(dir / "config.json",
       R"({"design": {"main": ["age", "age"]}})");  // duplicated column
  CHECK(run("weigh --config " + (dir / "config.json").string() + " --input " +
            (dir / "cohort.csv").string() + " --out-dir " + dir.string()) == 4);
}

TEST_CASE("balance emits overall and per-stratum tables in both formats") {
  const fs::path dir = fresh_dir("balance");
  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);
  REQUIRE(run("balance --input " + (dir / "cohort.csv").string() + " --out-dir " +
              dir.string()) == 0);

  const json overall = json::parse(slurp(dir / "balance_overall.json"));
  CHECK(overall.at("scope") == "overall");
  CHECK(overall.at("n_unexposed") == 100);
  CHECK(overall.at("n_exposed") == 80);
  REQUIRE(overall.at("rows").size() == 3);  // age, stage_IV, stratum_S2
  CHECK(overall.at("rows").at(2).at("name") == "stratum_S2");
  CHECK(std::abs(overall.at("rows").at(2).at("adj_smd").get<double>()) <= 1e-10);

  const std::string md = slurp(dir / "balance_overall.md");
  CHECK(md.find("| Covariate | Unexposed | Exposed | SMD | Adj. Unexposed | Adj. Exposed "
                "| Adj. SMD |") != std::string::npos);
  CHECK(md.find("ESS=") != std::string::npos);

  const json by_stratum = json::parse(slurp(dir / "balance_by_stratum.json"));
  REQUIRE(by_stratum.size() == 2);
  CHECK(by_stratum.at("S1").at("n_unexposed") == 30);
  CHECK(by_stratum.at("S1").at("rows").size() == 2);  // stratum indicators excluded

  const json diag = json::parse(slurp(dir / "diagnostics.json"));
  CHECK(diag.contains("weights"));
  CHECK(diag.at("overlap_by_stratum").size() == 2);
}

TEST_CASE("estimate emits sandwich and bootstrap effects deterministically") {
  const fs::path dir = fresh_dir("estimate");
  spit(dir / "config.json", R"({
    "out_dir": ")" + dir.string() + R"(",
    "simulate": {"outcome_model": {"true_effects": [5, 5]}, "seed": 42},
    "se_method": "both",
    "bootstrap": {"n": 50, "seed": 7},
    "per_stratum_effects": true
  })");
  REQUIRE(run("simulate --config " + (dir / "config.json").string()) == 0);
  REQUIRE(run("estimate --config " + (dir / "config.json").string() + " --input " +
              (dir / "cohort.csv").string()) == 0);
  const std::string first = slurp(dir / "effects.json");

  const json effects = json::parse(first);
  REQUIRE(effects.at("effects").size() == 2);
  CHECK(effects.at("effects").at(0).at("method") == "sandwich");
  CHECK(effects.at("effects").at(1).at("method") == "bootstrap");
  CHECK(effects.at("effects").at(1).at("n_boot") == 50);
  CHECK(effects.at("stratum_effects").size() == 2);
  CHECK(effects.at("effects").at(0).at("estimand") == "ATE-marginal");

  REQUIRE(run("estimate --config " + (dir / "config.json").string() + " --input " +
              (dir / "cohort.csv").string()) == 0);
  CHECK(slurp(dir / "effects.json") == first);  // byte-identical re-run
}

TEST_CASE("estimate without outcomes exits with code 2") {
  const fs::path dir = fresh_dir("estimate_noy");
  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);  // no outcome model
  CHECK(run("estimate --input " + (dir / "cohort.csv").string() + " --out-dir " +
            dir.string()) == 2);
}

TEST_CASE("run chains the whole demonstration from one config") {
  const fs::path dir = fresh_dir("run");
  spit(dir / "config.json", R"({
    "out_dir": ")" + dir.string() + R"(",
    "simulate": {"outcome_model": {}},
    "se_method": "sandwich",
    "per_stratum_effects": true
  })");
  REQUIRE(run("run --config " + (dir / "config.json").string()) == 0);
  for (const char* name :
       {"cohort.csv", "fig1_data.csv", "weights.csv", "fit_summary.json",
        "balance_overall.json", "balance_overall.md", "balance_by_stratum.json",
        "balance_by_stratum.md", "diagnostics.json", "effects.json"})
    CHECK_MESSAGE(fs::exists(dir / name), name);

  const std::string effects = slurp(dir / "effects.json");
  REQUIRE(run("run --config " + (dir / "config.json").string()) == 0);
  CHECK(slurp(dir / "effects.json") == effects);
}

TEST_CASE("per-stratum designs are configurable") {
  const fs::path dir = fresh_dir("per_stratum_design");
  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);
  spit(dir / "config.json", R"({
    "design_by_stratum": {
      "S1": {"main": ["age"]},
      "S2": {"main": ["age", "stage_IV"]}
    }
  })");
  REQUIRE(run("weigh --config " + (dir / "config.json").string() + " --input " +
              (dir / "cohort.csv").string() + " --out-dir " + dir.string()) == 0);
  const json fits = json::parse(slurp(dir / "fit_summary.json"));
  CHECK(fits.at("per_stratum_fits").at("S1").at("coefficients").size() == 2);
  CHECK(fits.at("per_stratum_fits").at("S2").at("coefficients").size() == 3);
}

TEST_CASE("unstratified flag produces a single global fit") {
  const fs::path dir = fresh_dir("unstratified");
  REQUIRE(run("simulate --out-dir " + dir.string()) == 0);
  spit(dir / "config.json", R"({
    "design": {"main": ["age", "stage_IV", "stratum_S2"],
               "interactions": [["age", "stratum_S2"], ["stage_IV", "stratum_S2"]]}
  })");
  REQUIRE(run("weigh --no-stratify --config " + (dir / "config.json").string() + " --input " +
              (dir / "cohort.csv").string() + " --out-dir " + dir.string()) == 0);
  const json fits = json::parse(slurp(dir / "fit_summary.json"));
  CHECK_FALSE(fits.at("stratified").get<bool>());
  CHECK(fits.at("fit").at("coefficients").size() == 6);
}
