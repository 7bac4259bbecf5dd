#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int exit_code = -1;
  std::string output;
};

// Temp workspace shared by the suite; fresh subdirectory per test case.
fs::path scratch_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("mmflow-cli-test-" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CliRun run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli_output.txt";
  const std::string cmd = std::string("\"") + MMFLOW_CLI_PATH + "\" " + args +
                          " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  CliRun r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help succeeds and a missing subcommand is a usage error") {
  const fs::path dir = fresh_dir("help");
  const CliRun help = run_cli("--help", dir);
  CHECK(help.exit_code == 0);
  CHECK(help.output.find("flow-finite") != std::string::npos);
  CHECK(help.output.find("birkhoff") != std::string::npos);

  CHECK(run_cli("", dir).exit_code == 1);
  CHECK(run_cli("no-such-subcommand", dir).exit_code == 1);
  CHECK(run_cli("strata --no-such-flag", dir).exit_code == 1);
}

TEST_CASE("strata writes a report and a manifest without timestamps") {
  const fs::path dir = fresh_dir("strata");
  const CliRun r = run_cli("strata -o \"" + (dir / "out").string() + "\"", dir);
  CHECK(r.exit_code == 0);

  const json report = load_json(dir / "out" / "strata.json");
  CHECK(report["g"] == 2);
  CHECK(report["betti"] == json::array({1, 0, 1, 4, 1, 0, 1}));
  CHECK(report["certificate"]["matches_closed_form"] == true);

  const json manifest = load_json(dir / "out" / "manifest.json");
  CHECK(manifest.size() == 3);  // command, version, config and nothing else
  CHECK(manifest["command"] == "strata");
  CHECK(manifest["version"] == "0.1.0");
  CHECK(manifest["config"]["g"] == 2);
}

TEST_CASE("exit codes separate usage errors from certificate failures") {
  const fs::path dir = fresh_dir("codes");
  CHECK(run_cli("strata -o \"" + (dir / "a").string() + "\" --set g=0", dir)
            .exit_code == 2);
  const CliRun bad =
      run_cli("strata -o \"" + (dir / "b").string() + "\" --set gg=3", dir);
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("unknown config key") != std::string::npos);
  CHECK(run_cli("strata -o \"" + (dir / "c").string() + "\" --set g=oops", dir)
            .exit_code == 1);
}

TEST_CASE("config files and overrides layer in order") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"g": 3, "truncation": 14})";
  }
  const CliRun r = run_cli("strata -o \"" + (dir / "out").string() +
                               "\" --config \"" + (dir / "cfg.json").string() +
                               "\" --set truncation=18 --set lambda_max=5",
                           dir);
  CHECK(r.exit_code == 0);
  const json manifest = load_json(dir / "out" / "manifest.json");
  CHECK(manifest["config"]["g"] == 3);              // from the file
  CHECK(manifest["config"]["truncation"] == 18);    // --set beats the file
  CHECK(manifest["config"]["lambda_max"] == 5);
  const json report = load_json(dir / "out" / "strata.json");
  CHECK(report["g"] == 3);
  CHECK(report["truncation"] == 18);
}

TEST_CASE("finite flow runs are byte-reproducible in the seed") {
  const fs::path dir = fresh_dir("repro");
  const std::string common = "flow-finite --set seed=5 --set t_max=20 -o ";
  CHECK(run_cli(common + "\"" + (dir / "a").string() + "\"", dir).exit_code == 0);
  CHECK(run_cli(common + "\"" + (dir / "b").string() + "\"", dir).exit_code == 0);

  for (const char* name : {"summary.json", "trajectory.jsonl", "manifest.json"})
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));

  const json summary = load_json(dir / "a" / "summary.json");
  CHECK(summary["converged"] == true);
  CHECK(summary["classification"].contains("class"));
  CHECK(summary["lojasiewicz"].contains("exponent"));
  CHECK(std::fabs(summary["f_final"].get<double>() - 0.5) <= 1e-7);

  const CliRun other = run_cli(
      "flow-finite --set seed=6 --set t_max=20 -o \"" + (dir / "c").string() + "\"",
      dir);
  CHECK(other.exit_code == 0);
  CHECK(slurp(dir / "a" / "trajectory.jsonl") != slurp(dir / "c" / "trajectory.jsonl"));
}

TEST_CASE("boundary flow reports the spectral data") {
  const fs::path dir = fresh_dir("boundary");
  const CliRun r = run_cli(
      "flow-boundary --set mode_cutoff=3 --set t_max=2 -o \"" +
          (dir / "out").string() + "\"",
      dir);
  CHECK(r.exit_code == 0);

  const json op = load_json(dir / "out" / "operator.json");
  REQUIRE(op.is_array());
  CHECK(op.size() == 21);  // 3 components for each of the 7 modes
  CHECK(op[0].contains("kappa"));
  CHECK(op[0]["D"].is_array());

  const json summary = load_json(dir / "out" / "summary.json");
  CHECK(summary["kernel_dimension"] == 3);
  CHECK(std::fabs(summary["smallest_positive_eigenvalue"].get<double>() -
                  0.9242343145200195) <= 1e-9);
  CHECK(summary["energy_final"].get<double>() <= summary["energy_initial"].get<double>());
  CHECK(summary["reality_defect_final"].get<double>() <= 1e-10);
}

TEST_CASE("birkhoff factorizes loops from files and rejects singular ones") {
  const fs::path dir = fresh_dir("birkhoff");
  {
    std::ofstream loop(dir / "loop.json");
    loop << R"({"rows": 2, "cols": 2, "terms": [
      {"degree": -1, "matrix": [[0, 0], [0, 1]]},
      {"degree":  0, "matrix": [[0, 0], [1, 0]]},
      {"degree":  1, "matrix": [[1, 0], [0, 0]]}]})";
  }
  const CliRun r = run_cli("birkhoff --set input=\"" + (dir / "loop.json").string() +
                               "\" -o \"" + (dir / "out").string() + "\"",
                           dir);
  CHECK(r.exit_code == 0);
  const json fact = load_json(dir / "out" / "factorization.json");
  CHECK(fact["indices"] == json::array({1, -1}));
  CHECK(fact["residual"].get<double>() <= 1e-8);

  {
    std::ofstream loop(dir / "singular.json");
    loop << R"({"rows": 2, "cols": 2, "terms": [
      {"degree": 0, "matrix": [[-1, 0], [0, 1]]},
      {"degree": 1, "matrix": [[1, 0], [0, 0]]}]})";
  }
  CHECK(run_cli("birkhoff --set input=\"" + (dir / "singular.json").string() +
                    "\" -o \"" + (dir / "bad").string() + "\"",
                dir)
            .exit_code == 2);
}

TEST_CASE("sweep derives distinct per-point seeds and aggregates exit codes") {
  const fs::path dir = fresh_dir("sweep");
  {
    std::ofstream cfg(dir / "sweep.json");
    cfg << R"({"command": "flow-finite", "base": {"t_max": 10},
               "grid": {"max_step": [0.1, 0.05]}, "workers": 1})";
  }
  const CliRun r = run_cli("sweep --config \"" + (dir / "sweep.json").string() +
                               "\" -o \"" + (dir / "out").string() + "\"",
                           dir);
  CHECK(r.exit_code == 0);

  const json index = load_json(dir / "out" / "sweep_index.json");
  REQUIRE(index["points"].size() == 2);
  for (const json& p : index["points"]) {
    CHECK(p["exit_code"] == 0);
    const fs::path pdir = dir / "out" / p["dir"].get<std::string>();
    CHECK(fs::exists(pdir / "summary.json"));
  }

  // master seed plus point index determine each point's stream
  const auto seed0 = load_json(dir / "out" / "point_0000" / "manifest.json")["config"]["seed"];
  const auto seed1 = load_json(dir / "out" / "point_0001" / "manifest.json")["config"]["seed"];
  CHECK(seed0 != seed1);

  // an explicit seed axis must be honored verbatim
  {
    std::ofstream cfg(dir / "sweep2.json");
    cfg << R"({"command": "flow-finite", "base": {"t_max": 5},
               "grid": {"seed": [3, 4]}, "workers": 1})";
  }
  CHECK(run_cli("sweep --config \"" + (dir / "sweep2.json").string() +
                    "\" -o \"" + (dir / "out2").string() + "\"",
                dir)
            .exit_code == 0);
  CHECK(load_json(dir / "out2" / "point_0000" / "manifest.json")["config"]["seed"] == 3);
  CHECK(load_json(dir / "out2" / "point_0001" / "manifest.json")["config"]["seed"] == 4);

  // grid keys are validated against the target subcommand
  {
    std::ofstream cfg(dir / "sweep3.json");
    cfg << R"({"command": "flow-finite", "grid": {"bogus": [1, 2]}})";
  }
  CHECK(run_cli("sweep --config \"" + (dir / "sweep3.json").string() +
                    "\" -o \"" + (dir / "out3").string() + "\"",
                dir)
            .exit_code == 1);
}

TEST_CASE("verify runs every built-in check") {
  const fs::path dir = fresh_dir("verify");
  const CliRun r = run_cli("verify", dir);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("FAIL") == std::string::npos);
  size_t passes = 0, pos = 0;
  while ((pos = r.output.find("PASS", pos)) != std::string::npos) {
    ++passes;
    pos += 4;
  }
  CHECK(passes == 6);
}

}  // TEST_SUITE
