#include "ustab/errors.hpp"
#include "ustab/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using ustab::error_record;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ustab::ConfigError("config", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dir_of(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

// Maps every failure to an exit code and a JSON error record on stderr.
template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ustab::FellerViolation& e) {
    std::cerr << error_record("feller", e.field(), e.reason()) << '\n';
    return ustab::kExitConfig;
  } catch (const ustab::ConfigError& e) {
    std::cerr << error_record("config", e.field(), e.reason()) << '\n';
    return ustab::kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << error_record("config", "", e.what()) << '\n';
    return ustab::kExitConfig;
  } catch (const ustab::MomentExplosion& e) {
    std::cerr << error_record("moment_explosion", "", e.what()) << '\n';
    return ustab::kExitNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << error_record("numerical", "", e.what()) << '\n';
    return ustab::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << error_record("failure", "", e.what()) << '\n';
    return ustab::kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Utility maximization stability experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  ustab::Overrides ov;
  std::uint64_t seed = 0;
  long long paths = 0, steps = 0;
  const auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--paths", paths, "Monte Carlo paths");
    cmd->add_option("--steps", steps, "time steps");
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run an experiment");
  run->add_option("--config", config_path, "configuration file")->required();
  add_overrides(run);

  CLI::App* validate = app.add_subcommand("validate", "list configuration violations");
  validate->add_option("--config", config_path, "configuration file")->required();

  CLI::App* oracle = app.add_subcommand("oracle-check", "compare simulators with closed forms");
  oracle->add_option("--config", config_path, "configuration file (market section is used)");
  add_overrides(oracle);

  CLI11_PARSE(app, argc, argv);

  const auto collect = [&](CLI::App* cmd) {
    if (cmd->count("--seed")) ov.seed = seed;
    if (cmd->count("--paths")) ov.paths = paths;
    if (cmd->count("--steps")) ov.steps = steps;
  };

  if (*validate) {
    return guarded([&] {
      const auto violations = ustab::validate_config(nlohmann::json::parse(read_text(config_path)));
      nlohmann::json report = nlohmann::json::array();
      for (const auto& v : violations) report.push_back({{"field", v.field}, {"reason", v.reason}});
      std::cout << nlohmann::json{{"violations", report}}.dump(2) << '\n';
      return violations.empty() ? ustab::kExitOk : ustab::kExitConfig;
    });
  }
  CLI::App* cmd = *run ? run : oracle;
  collect(cmd);
  return guarded([&] {
    std::string text, dir = ".";
    if (!config_path.empty()) {
      text = read_text(config_path);
      dir = dir_of(config_path);
    }
    if (*oracle) {
      nlohmann::json cfg = text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
      for (const char* k : {"sweep", "degenerate", "kw", "subreplication", "utility", "claim"}) cfg.erase(k);
      cfg["experiment"] = "oracle-check";
      if (!cfg.contains("schema_version")) cfg["schema_version"] = ustab::kConfigSchemaVersion;
      text = cfg.dump();
    }
    const ustab::RunOutcome outcome = ustab::run_experiment(text, dir, ov, out_dir);
    for (const auto& f : outcome.outputs) std::cout << (std::filesystem::path(out_dir) / f).string() << '\n';
    return outcome.exit_code;
  });
}
