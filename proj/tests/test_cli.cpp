#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code{0};
  std::string output;  // stdout + stderr interleaved
};

std::string binary_path() {
  const char* env = std::getenv("MULTIARM_BIN");
  REQUIRE_MESSAGE(env != nullptr, "MULTIARM_BIN must point at the CLI binary");
  return env;
}

RunResult run_cli(const std::string& args) {
  const std::string command = binary_path() + " " + args + " 2>&1";
  std::array<char, 4096> buffer{};
  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) {
    result.output += buffer.data();
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("multiarm_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("boundary table format and values") {
  const auto dir = fresh_dir("boundary");
  const auto run = run_cli("boundary --out " + dir.string());
  CHECK(run.exit_code == 0);

  const auto lines = lines_of(slurp(dir / "boundary.csv"));
  REQUIRE(lines.size() == 79);  // header + n = 1..78
  CHECK(lines[0] ==
        "analysed,min_failures,p_stop_90,p_stop_95,p_stop_80,p_stop_70,"
        "p_stop_60");
  // n = 1 has no boundary and zero stop probabilities
  CHECK(lines[1].rfind("1,,0,0,0", 0) == 0);
  // n = 7 row: boundary 3, P(stop | cure 0.9) = 0.0257
  CHECK(lines[7].rfind("7,3,0.0256915,", 0) == 0);
}

TEST_CASE("boundary flags: --max-n and --prior") {
  const auto dir = fresh_dir("boundary_flags");
  CHECK(run_cli("boundary --max-n 10 --out " + dir.string()).exit_code == 0);
  CHECK(lines_of(slurp(dir / "boundary.csv")).size() == 11);

  const auto flat_dir = fresh_dir("boundary_flat");
  CHECK(run_cli("boundary --prior 1,1 --max-n 10 --out " + flat_dir.string())
            .exit_code == 0);
  const auto flat = lines_of(slurp(flat_dir / "boundary.csv"));
  // a flat prior already stops at one failure of one patient
  CHECK(flat[1].rfind("1,1,", 0) == 0);
  const auto strong = lines_of(slurp(dir / "boundary.csv"));
  CHECK(strong[1].rfind("1,,", 0) == 0);
  CHECK(flat[1] != strong[1]);
}

TEST_CASE("grouped boundary rows split at the full stratum") {
  const auto dir = fresh_dir("boundary_grouped");
  CHECK(run_cli("boundary --grouped --out " + dir.string()).exit_code == 0);
  const auto lines = lines_of(slurp(dir / "boundary_grouped.csv"));
  bool runs_34_39 = false;
  bool runs_40_41 = false;
  for (const auto& line : lines) {
    if (line.rfind("34-39,8,", 0) == 0) runs_34_39 = true;
    if (line.rfind("40-41,8,", 0) == 0) runs_40_41 = true;
  }
  CHECK(runs_34_39);
  CHECK(runs_40_41);
}

TEST_CASE("timing command reproduces the first-analysis row") {
  const auto dir = fresh_dir("timing");
  CHECK(run_cli("timing --out " + dir.string()).exit_code == 0);
  const auto lines = lines_of(slurp(dir / "timing.csv"));
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0] ==
        "analysis,month,total_recruited,total_at_eot12,n_peg-ifn,n_rgt,"
        "n_induction-maintenance,avg_stop_peg-ifn,avg_stop_rgt,"
        "avg_stop_induction-maintenance");
  CHECK(lines[1] == "early,7,205,48,5,3,2,0.12385,0.02125,0.07");
}

TEST_CASE("timing flags") {
  const auto dir = fresh_dir("timing_flags");
  CHECK(run_cli("timing --thresholds 0.5 --out " + dir.string()).exit_code == 0);
  const auto lines = lines_of(slurp(dir / "timing.csv"));
  REQUIRE(lines.size() == 3);  // header + early + one threshold
  CHECK(lines[2].rfind("threshold_0.5,12,", 0) == 0);

  const auto fast_dir = fresh_dir("timing_fast");
  CHECK(run_cli("timing --thresholds 0.5 --recruitment-multiplier 2 --out " +
                fast_dir.string())
            .exit_code == 0);
  const auto fast = lines_of(slurp(fast_dir / "timing.csv"));
  // faster accrual cannot delay an analysis
  const int base_month = std::stoi(lines_of(slurp(dir / "timing.csv"))[2]
                                       .substr(std::string("threshold_0.5,").size()));
  const int fast_month =
      std::stoi(fast[2].substr(std::string("threshold_0.5,").size()));
  CHECK(fast_month <= base_month);
}

TEST_CASE("plots are emitted on request") {
  const auto dir = fresh_dir("plots");
  CHECK(run_cli("timing --plots --out " + dir.string()).exit_code == 0);
  CHECK(fs::exists(dir / "recruitment_curve.csv"));
  CHECK(fs::exists(dir / "stop_prob_curves.csv"));
  const auto lines = lines_of(slurp(dir / "recruitment_curve.csv"));
  CHECK(lines[0] == "month,cumulative_randomized");
  // the published schedule: 205 randomised by month 7
  bool month7 = false;
  for (const auto& line : lines) month7 = month7 || line == "7,205";
  CHECK(month7);
}

TEST_CASE("projection command") {
  const auto dir = fresh_dir("project");
  CHECK(run_cli("project --month 18 --out " + dir.string()).exit_code == 0);
  const auto lines = lines_of(slurp(dir / "projection.csv"));
  REQUIRE(lines.size() == 2);
  CHECK(lines[1].rfind("18,777,530,", 0) == 0);

  const auto zero_dir = fresh_dir("project0");
  CHECK(run_cli("project --month 0 --out " + zero_dir.string()).exit_code == 0);
  const auto zero = lines_of(slurp(zero_dir / "projection.csv"));
  CHECK(zero[1].rfind("0,0,0,", 0) == 0);
}

TEST_CASE("identical config and seed give byte-identical outputs") {
  const auto dir_a = fresh_dir("repro_a");
  const auto dir_b = fresh_dir("repro_b");
  const std::string args = "simulate --replicates 400 --seed 11 --out ";
  CHECK(run_cli(args + dir_a.string()).exit_code == 0);
  CHECK(run_cli(args + dir_b.string()).exit_code == 0);
  for (const char* name :
       {"stop_report.csv", "cumulative_stop_curve.csv", "stop_report.json"}) {
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  }

  const auto dir_c = fresh_dir("repro_c");
  CHECK(run_cli("simulate --replicates 400 --seed 12 --out " + dir_c.string())
            .exit_code == 0);
  CHECK(slurp(dir_a / "stop_report.csv") != slurp(dir_c / "stop_report.csv"));
}

TEST_CASE("single-replicate simulation is a deterministic trajectory") {
  const auto dir = fresh_dir("single");
  CHECK(run_cli("simulate --replicates 1 --seed 5 --out " + dir.string())
            .exit_code == 0);
  const auto json_text = slurp(dir / "stop_report.json");
  CHECK(json_text.find("\"replicates\": 1") != std::string::npos);
  // with one replicate every probability is 0 or 1
  const auto lines = lines_of(slurp(dir / "cumulative_stop_curve.csv"));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto last_comma = lines[i].rfind(',');
    const std::string value = lines[i].substr(last_comma + 1);
    CHECK((value == "0" || value == "1"));
  }
}

TEST_CASE("elicit command recovers the monitoring prior") {
  const auto dir = fresh_dir("elicit");
  const auto run = run_cli(
      "elicit --mean 0.9 --threshold 0.9 --tail 0.34 --out " + dir.string());
  CHECK(run.exit_code == 0);
  const auto text = slurp(dir / "prior.json");
  CHECK(text.find("\"unit_ess\": [\n    4.5,\n    0.5\n  ]") != std::string::npos);
}

TEST_CASE("samplesize command emits the discrepancy report") {
  const auto dir = fresh_dir("samplesize");
  const auto run = run_cli("samplesize --out " + dir.string());
  CHECK(run.exit_code == 0);
  const auto text = slurp(dir / "samplesize.json");
  CHECK(text.find("\"matches_reference\": false") != std::string::npos);
  CHECK(text.find("\"discrepancy\"") != std::string::npos);
  CHECK(text.find("\"evaluable\": 33") != std::string::npos);
  CHECK(text.find("\"evaluable\": 39") != std::string::npos);
}

TEST_CASE("config files work and flags win") {
  const auto dir = fresh_dir("config");
  const auto config_path = dir / "run.json";
  {
    std::ofstream out(config_path);
    out << R"({"boundary": {"max_n": 20}, "rule": {"prior": [4.5, 0.5]}})";
  }
  CHECK(run_cli("boundary --config " + config_path.string() + " --out " +
                dir.string())
            .exit_code == 0);
  CHECK(lines_of(slurp(dir / "boundary.csv")).size() == 21);

  // explicit flag overrides the config value
  CHECK(run_cli("boundary --config " + config_path.string() +
                " --max-n 5 --out " + dir.string())
            .exit_code == 0);
  CHECK(lines_of(slurp(dir / "boundary.csv")).size() == 6);
}

TEST_CASE("validate-only and error channels") {
  const auto dir = fresh_dir("errors");
  const auto config_path = dir / "bad.json";
  {
    std::ofstream out(config_path);
    out << R"({"unknown_section": 1})";
  }
  const auto bad = run_cli("boundary --config " + config_path.string());
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("\"error\"") != std::string::npos);
  CHECK(bad.output.find("unknown_section") != std::string::npos);

  const auto good_path = dir / "good.json";
  {
    std::ofstream out(good_path);
    out << R"({"rule": {"prior": [4.5, 0.5]}})";
  }
  const auto ok = run_cli("boundary --validate-only --config " + good_path.string());
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("config ok") != std::string::npos);

  // numeric failures exit with 3 and a machine-parsable payload
  const auto numeric =
      run_cli("elicit --mean 0.9 --threshold 0.9 --tail 0.05 --out " +
              dir.string());
  CHECK(numeric.exit_code == 3);
  CHECK(numeric.output.find("\"error\"") != std::string::npos);
  CHECK(numeric.output.find("achievable") != std::string::npos);
}

TEST_CASE("dataset export and analyze import") {
  const auto dir = fresh_dir("dataset");
  CHECK(run_cli("dataset --scenario rbv-5pct-higher --seed 21 --out " +
                dir.string())
            .exit_code == 0);
  const auto lines = lines_of(slurp(dir / "dataset.csv"));
  REQUIRE(lines.size() == 1093);  // header + 1092 patients
  CHECK(lines[0] == "regimen,strategy,ribavirin,stratum,outcome");

  const auto run = run_cli("analyze --data " + (dir / "dataset.csv").string() +
                           " --out " + dir.string());
  CHECK(run.exit_code == 0);
  const auto text = slurp(dir / "analysis.json");
  CHECK(text.find("\"patients\": 1092") != std::string::npos);
  CHECK(text.find("regimen-noninferiority") != std::string::npos);
  CHECK(text.find("ribavirin-superiority") != std::string::npos);
  CHECK(text.find("\"sceptical\"") != std::string::npos);

  // export is deterministic for a fixed seed
  const auto dir_b = fresh_dir("dataset_b");
  CHECK(run_cli("dataset --scenario rbv-5pct-higher --seed 21 --out " +
                dir_b.string())
            .exit_code == 0);
  CHECK(slurp(dir / "dataset.csv") == slurp(dir_b / "dataset.csv"));
}

TEST_CASE("power emits the wide scenario-by-comparison table") {
  const auto dir = fresh_dir("power_wide");
  CHECK(run_cli("power --replicates 60 --seed 3 --out " + dir.string())
            .exit_code == 0);
  const auto lines = lines_of(slurp(dir / "power_wide.csv"));
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] == "row,rbv-5pct-higher,rbv-2.5pct-higher,rbv-equal");
  CHECK(lines[1] == "standard_cure,0.933,0.95,0.967");
  CHECK(lines[4].rfind("regimen_ni_power,", 0) == 0);
  CHECK(lines[5].rfind("strategy_ni_power,", 0) == 0);
  CHECK(lines[6].rfind("ribavirin_sup_power,", 0) == 0);
}

TEST_CASE("default output directory comes from the environment") {
  const auto dir = fresh_dir("envdir");
  const std::string command = "MULTIARM_OUT_DIR=" + dir.string() + " " +
                              binary_path() + " project --month 7 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 512> buffer{};
  std::string output;
  while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) {
    output += buffer.data();
  }
  CHECK(pclose(pipe) == 0);
  CHECK(fs::exists(dir / "projection.csv"));
}

TEST_CASE("full-precision mode changes serialization only") {
  const auto dir6 = fresh_dir("prec6");
  const auto dir17 = fresh_dir("prec17");
  CHECK(run_cli("project --month 18 --out " + dir6.string()).exit_code == 0);
  CHECK(run_cli("project --month 18 --full-precision --out " + dir17.string())
            .exit_code == 0);
  CHECK(slurp(dir6 / "projection.csv") == slurp(dir17 / "projection.csv"));

  const auto t6 = fresh_dir("tprec6");
  const auto t17 = fresh_dir("tprec17");
  CHECK(run_cli("timing --out " + t6.string()).exit_code == 0);
  CHECK(run_cli("timing --full-precision --out " + t17.string()).exit_code == 0);
  CHECK(slurp(t6 / "timing.csv") != slurp(t17 / "timing.csv"));
}
