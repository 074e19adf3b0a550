#include "ustab/errors.hpp"
#include "ustab/report.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ustab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ustab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Every CSV in a directory, keyed by file name.
std::map<std::string, std::string> csvs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".csv") out[e.path().filename().string()] = slurp(e.path());
  }
  return out;
}

const char* kDegenerate = R"({"experiment": "degenerate", "seed": 3, "paths": 400, "steps": 32,
  "degenerate": {"n": [2, "inf"], "budget": 4}})";

}  // namespace

TEST_CASE("number formatting and CSV quoting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(kInf) == "inf");
  CHECK(format_double(-kInf) == "-inf");
  CHECK(format_double(std::nan("")) == "nan");
  std::ostringstream os;
  CsvWriter(os).header({"a", "b"}).cell(1.5).cell(std::string("x,\"y\"")).end_row().cell(7LL).cell(
      std::string("z")).end_row();
  CHECK(os.str() == "a,b\n1.5,\"x,\"\"y\"\"\"\n7,z\n");
}

TEST_CASE("git blob hashes") {
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello world\n") == "3b18e512dba79e4c8300dd08aeb37f8e728b8dad");
}

TEST_CASE("configuration validation") {
  using nlohmann::json;
  CHECK(validate_config(json::parse(kDegenerate)).empty());
  const auto has = [](const std::vector<Violation>& v, const std::string& text) {
    for (const auto& x : v) {
      if (x.reason.find(text) != std::string::npos || x.field.find(text) != std::string::npos) return true;
    }
    return false;
  };
  const json bad_rho = json::parse(R"({"experiment": "sweep", "sweep": {"rho": [0.1, 1.0]}})");
  CHECK(has(validate_config(bad_rho), "rho must lie in (-1, 1)"));
  const json bad_paths = json::parse(R"({"experiment": "kw", "paths": -5})");
  CHECK(has(validate_config(bad_paths), "paths"));
  const json feller =
      json::parse(R"({"experiment": "kw", "market": {"kappa": 0.5, "theta": 0.1, "sigma": 1.0}})");
  CHECK(has(validate_config(feller), "Feller"));
  CHECK_THROWS_AS(parse_config(feller, {}), FellerViolation);
  const json unknown = json::parse(R"({"experiment": "kw", "colour": 1})");
  CHECK(!validate_config(unknown).empty());
  const json mismatch = json::parse(R"({"experiment": "kw", "sweep": {}})");
  CHECK(!validate_config(mismatch).empty());
  CHECK(!validate_config(json::parse(R"({"experiment": "nope"})")).empty());
  CHECK(!validate_config(json::parse(R"({"paths": 10})")).empty());
  const json overrides = json::parse(kDegenerate);
  const ExperimentConfig cfg = parse_config(overrides, Overrides{7, 10, 8});
  CHECK(cfg.seed == 7);
  CHECK(cfg.paths == 10);
  CHECK(cfg.steps == 8);
}

TEST_CASE("degenerate run writes its tables and manifest") {
  const fs::path dir = scratch("degenerate");
  const RunOutcome out = run_experiment(kDegenerate, ".", {}, dir.string());
  CHECK(out.exit_code == kExitOk);
  CHECK(fs::exists(dir / "degenerate.csv"));
  CHECK(fs::exists(dir / "degenerate_distance.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["experiment"] == "degenerate");
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["input_hash"] == git_blob_hash(kDegenerate));
  CHECK(manifest["outputs"].size() == 2);
  for (const auto& o : manifest["outputs"]) {
    CHECK(o["hash"] == git_blob_hash(slurp(dir / o["file"].get<std::string>())));
  }
  // Header plus one row per n.
  const std::string table = slurp(dir / "degenerate.csv");
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}

TEST_CASE("reruns are byte-identical across worker counts") {
  const char* sweep = R"({"experiment": "sweep", "seed": 5, "paths": 300, "steps": 16,
    "claim": {"type": "put_spread", "lo": -1, "hi": 1},
    "sweep": {"rho": [0.2], "x": [0.25], "y": [1, 2], "primal_budget": 4, "dual_budget": 4}})";
  const char* kw = R"({"experiment": "kw", "seed": 5, "paths": 300, "steps": 16,
    "kw": {"n": [1, 10], "family": "nondegenerate"}})";
  for (const char* text : {kDegenerate, sweep, kw}) {
    std::map<std::string, std::string> first;
    for (const char* workers : {"1", "3", "1"}) {
      setenv("USTAB_WORKERS", workers, 1);
      const fs::path dir = scratch("determinism");
      REQUIRE(run_experiment(text, ".", {}, dir.string()).exit_code == kExitOk);
      const auto files = csvs(dir);
      CHECK(!files.empty());
      if (first.empty()) {
        first = files;
      } else {
        CHECK(files == first);
      }
    }
    unsetenv("USTAB_WORKERS");
  }
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  const std::string cli = USTAB_CLI;
  const auto run = [&](const std::string& config, const std::string& sub, const std::string& extra = "") {
    std::ofstream(dir / "config.json") << config;
    const std::string cmd = cli + " " + sub + " --config " + (dir / "config.json").string() + " " + extra +
                            " > " + (dir / "stdout").string() + " 2> " + (dir / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run(kDegenerate, "run", "--paths 200 --out " + (dir / "out").string()) == kExitOk);
  CHECK(fs::exists(dir / "out" / "manifest.json"));
  CHECK(run(R"({"experiment": "kw", "market": {"kappa": 0.5, "theta": 0.1, "sigma": 1.0}})", "run",
            "--out " + (dir / "out2").string()) == kExitConfig);
  const auto err = nlohmann::json::parse(slurp(dir / "stderr"));
  CHECK(err["error"]["kind"] == "feller");
  CHECK(run(R"({"experiment": "sweep", "sweep": {"rho": [1.5]}})", "validate") == kExitConfig);
  CHECK(slurp(dir / "stdout").find("rho must lie in (-1, 1)") != std::string::npos);
  CHECK(run(kDegenerate, "validate") == kExitOk);
  CHECK(run("{not json", "validate") == kExitConfig);
  CHECK(run(R"({"experiment": "kw"})", "oracle-check", "--paths 2000 --steps 32 --out " + (dir / "oracle").string()) ==
        kExitOk);
  CHECK(fs::exists(dir / "oracle" / "oracle.csv"));
}
