#pragma once

#include "ustab/indifference.hpp"
#include "ustab/market.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ustab {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

struct Violation {
  std::string field;
  std::string reason;
};

enum class ExperimentKind { kSweep, kDegenerate, kKw, kSubreplication, kOracleCheck };

std::string to_string(ExperimentKind kind);

// Scalar overrides from the command line.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<long long> paths;
  std::optional<long long> steps;
};

// Every field has a default; see README for the schema.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kDegenerate;
  std::uint64_t seed = 1;
  long long paths = 20000;
  long long steps = 256;
  nlohmann::json market;   // mu kappa theta sigma v0 horizon
  nlohmann::json utility;  // {"type": ...}
  nlohmann::json claim;    // {"type": ...}
  nlohmann::json section;  // the experiment-specific block
  bool export_bundle = false;
  std::string config_dir;  // for relative claim-table paths
  nlohmann::json echo;     // effective configuration
};

// Lists every violation; never throws on bad content.
std::vector<Violation> validate_config(const nlohmann::json& config);

// Applies defaults and overrides; throws ConfigError on the first violation.
ExperimentConfig parse_config(const nlohmann::json& config, const Overrides& overrides,
                              const std::string& config_dir = ".");

HestonParams market_from(const ExperimentConfig& cfg, double rho);
UtilitySpec utility_from(const ExperimentConfig& cfg);
ClaimSpec claim_from(const ExperimentConfig& cfg);

}  // namespace ustab
