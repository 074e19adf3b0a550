#include "ustab/config.hpp"

#include "ustab/errors.hpp"

#include <cmath>
#include <filesystem>
#include <set>

namespace ustab {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSweep: return "sweep";
    case ExperimentKind::kDegenerate: return "degenerate";
    case ExperimentKind::kKw: return "kw";
    case ExperimentKind::kSubreplication: return "subreplication";
    case ExperimentKind::kOracleCheck: return "oracle-check";
  }
  return "unknown";
}

namespace {

const json kDefaultMarket = {{"mu", 0.5}, {"kappa", 2.0}, {"theta", 1.0},
                             {"sigma", 0.5}, {"v0", 1.0},  {"horizon", 1.0}};

std::optional<ExperimentKind> kind_from(const std::string& s) {
  for (auto k : {ExperimentKind::kSweep, ExperimentKind::kDegenerate, ExperimentKind::kKw,
                 ExperimentKind::kSubreplication, ExperimentKind::kOracleCheck}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

class Checker {
 public:
  std::vector<Violation> violations;

  void add(const std::string& field, const std::string& reason) { violations.push_back({field, reason}); }

  void keys(const json& obj, const std::string& prefix, const std::set<std::string>& allowed) {
    for (const auto& [k, v] : obj.items()) {
      if (!allowed.count(k)) add(prefix + k, "unknown field");
    }
  }

  // Optional finite number; returns whether it is present and valid.
  std::optional<double> number(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      add(field, "must be a finite number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  void positive(const json& obj, const std::string& key, const std::string& field) {
    if (auto v = number(obj, key, field); v && !(*v > 0.0)) add(field, "must be positive");
  }

  void positive_int(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      add(field, "must be an integer");
    } else if (v.get<long long>() <= 0) {
      add(field, field + " must be positive");
    }
  }

  std::vector<double> number_list(const json& obj, const std::string& key, const std::string& field,
                                  bool allow_inf = false) {
    std::vector<double> out;
    if (!obj.contains(key)) return out;
    const json& v = obj.at(key);
    if (!v.is_array() || v.empty()) {
      add(field, "must be a nonempty array");
      return out;
    }
    for (const auto& e : v) {
      if (e.is_number() && std::isfinite(e.get<double>())) {
        out.push_back(e.get<double>());
      } else if (allow_inf && e.is_string() && e.get<std::string>() == "inf") {
        out.push_back(kInf);
      } else {
        add(field, "entries must be finite numbers");
      }
    }
    return out;
  }

  void rho_list(const json& obj, const std::string& key, const std::string& field) {
    for (double r : number_list(obj, key, field)) {
      if (!(r > -1.0 && r < 1.0)) add(field, "rho must lie in (-1, 1)");
    }
  }
};

void check_market(Checker& c, const json& m) {
  if (!m.is_object()) {
    c.add("market", "must be an object");
    return;
  }
  c.keys(m, "market.", {"mu", "kappa", "theta", "sigma", "v0", "horizon"});
  c.number(m, "mu", "market.mu");
  for (const char* k : {"kappa", "theta", "sigma", "v0", "horizon"}) c.positive(m, k, std::string("market.") + k);
  const json full = [&] {
    json x = kDefaultMarket;
    for (const auto& [k, v] : m.items()) x[k] = v;
    return x;
  }();
  const auto get = [&](const char* k) { return full.at(k).is_number() ? full.at(k).get<double>() : kNaN; };
  const double kappa = get("kappa"), theta = get("theta"), sigma = get("sigma");
  if (kappa > 0 && theta > 0 && sigma > 0 && 2.0 * kappa * theta < sigma * sigma) {
    c.add("market.feller", "Feller condition 2*kappa*theta >= sigma^2 violated");
  }
}

void check_utility(Checker& c, const json& u) {
  if (!u.is_object() || !u.contains("type") || !u.at("type").is_string()) {
    c.add("utility.type", "must be one of power, log, exponential");
    return;
  }
  const std::string t = u.at("type").get<std::string>();
  if (t == "power") {
    c.keys(u, "utility.", {"type", "p"});
    if (!u.contains("p")) c.add("utility.p", "required for power utility");
    if (auto p = c.number(u, "p", "utility.p"); p && !(*p < 1.0)) c.add("utility.p", "must be < 1");
  } else if (t == "log") {
    c.keys(u, "utility.", {"type"});
  } else if (t == "exponential") {
    c.keys(u, "utility.", {"type", "alpha"});
    if (!u.contains("alpha")) c.add("utility.alpha", "required for exponential utility");
    c.positive(u, "alpha", "utility.alpha");
  } else {
    c.add("utility.type", "must be one of power, log, exponential");
  }
}

void check_claim(Checker& c, const json& cl) {
  if (!cl.is_object() || !cl.contains("type") || !cl.at("type").is_string()) {
    c.add("claim.type", "must be one of constant, indicator, call_spread, put_spread, logistic, table");
    return;
  }
  const std::string t = cl.at("type").get<std::string>();
  if (t == "constant") {
    c.keys(cl, "claim.", {"type", "value"});
    c.number(cl, "value", "claim.value");
  } else if (t == "indicator" || t == "logistic") {
    c.keys(cl, "claim.", {"type"});
  } else if (t == "call_spread" || t == "put_spread") {
    c.keys(cl, "claim.", {"type", "lo", "hi"});
    const auto lo = c.number(cl, "lo", "claim.lo");
    const auto hi = c.number(cl, "hi", "claim.hi");
    if (lo.value_or(-1.0) >= hi.value_or(1.0)) c.add("claim", "spreads need lo < hi");
  } else if (t == "table") {
    c.keys(cl, "claim.", {"type", "path"});
    if (!cl.contains("path") || !cl.at("path").is_string()) c.add("claim.path", "required string");
  } else {
    c.add("claim.type", "must be one of constant, indicator, call_spread, put_spread, logistic, table");
  }
}

void check_basis(Checker& c, const json& b, const std::string& prefix) {
  if (!b.is_object()) {
    c.add(prefix, "must be an object");
    return;
  }
  c.keys(b, prefix + ".", {"degree_b", "degree_v", "buckets"});
  for (const char* k : {"degree_b", "degree_v"}) {
    if (b.contains(k) && (!b.at(k).is_number_integer() || b.at(k).get<long long>() < 0)) {
      c.add(prefix + "." + k, "must be a nonnegative integer");
    }
  }
  c.positive_int(b, "buckets", prefix + ".buckets");
}

void check_section(Checker& c, ExperimentKind kind, const json& s) {
  if (!s.is_object()) {
    c.add(to_string(kind), "must be an object");
    return;
  }
  const std::string p = to_string(kind) + ".";
  switch (kind) {
    case ExperimentKind::kSweep:
      c.keys(s, p, {"rho", "x", "y", "primal_budget", "dual_budget", "dual_buckets", "dual_box",
                    "dual_cap", "strategy_box", "bisection_tolerance", "hedge_basis", "floor"});
      c.rho_list(s, "rho", p + "rho");
      c.number_list(s, "x", p + "x");
      for (double y : c.number_list(s, "y", p + "y")) {
        if (!(y > 0.0)) c.add(p + "y", "y values must be positive");
      }
      for (const char* k : {"primal_budget", "dual_budget", "dual_buckets"}) c.positive_int(s, k, p + k);
      for (const char* k : {"dual_box", "strategy_box", "bisection_tolerance", "floor"}) c.positive(s, k, p + k);
      if (auto cap = c.number(s, "dual_cap", p + "dual_cap"); cap && !(*cap > 1.0)) {
        c.add(p + "dual_cap", "must exceed 1");
      }
      if (s.contains("hedge_basis")) check_basis(c, s.at("hedge_basis"), p + "hedge_basis");
      break;
    case ExperimentKind::kDegenerate:
      c.keys(s, p, {"n", "alpha", "x", "budget", "basis"});
      for (double n : c.number_list(s, "n", p + "n", true)) {
        if (!(n > 0.0)) c.add(p + "n", "market indices must be positive");
      }
      c.positive(s, "alpha", p + "alpha");
      c.number(s, "x", p + "x");
      c.positive_int(s, "budget", p + "budget");
      if (s.contains("basis")) check_basis(c, s.at("basis"), p + "basis");
      break;
    case ExperimentKind::kKw:
      c.keys(s, p, {"n", "family"});
      for (double n : c.number_list(s, "n", p + "n")) {
        if (!(n > 0.0)) c.add(p + "n", "market indices must be positive");
      }
      if (s.contains("family") &&
          (!s.at("family").is_string() ||
           (s.at("family") != "nondegenerate" && s.at("family") != "degenerate"))) {
        c.add(p + "family", "must be nondegenerate or degenerate");
      }
      break;
    case ExperimentKind::kSubreplication:
      c.keys(s, p, {"rho", "x", "gap"});
      if (auto r = c.number(s, "rho", p + "rho")) {
        if (!(*r > -1.0 && *r < 1.0)) {
          c.add(p + "rho", "rho must lie in (-1, 1)");
        } else if (*r == 0.0) {
          c.add(p + "rho", "subreplication needs rho != 0");
        }
      }
      c.number_list(s, "x", p + "x");
      for (double g : c.number_list(s, "gap", p + "gap")) {
        if (!(g > 0.0)) c.add(p + "gap", "handoff gaps must be positive");
      }
      break;
    case ExperimentKind::kOracleCheck:
      c.keys(s, p, {});
      break;
  }
}

}  // namespace

std::vector<Violation> validate_config(const json& config) {
  Checker c;
  if (!config.is_object()) {
    c.add("", "configuration must be a JSON object");
    return c.violations;
  }
  c.keys(config, "", {"schema_version", "experiment", "seed", "paths", "steps", "market", "utility",
                      "claim", "sweep", "degenerate", "kw", "subreplication", "oracle-check",
                      "export_bundle"});
  if (config.contains("schema_version") &&
      (!config.at("schema_version").is_number_integer() ||
       config.at("schema_version").get<long long>() != kConfigSchemaVersion)) {
    c.add("schema_version", "must be " + std::to_string(kConfigSchemaVersion));
  }
  std::optional<ExperimentKind> kind;
  if (!config.contains("experiment") || !config.at("experiment").is_string() ||
      !(kind = kind_from(config.at("experiment").get<std::string>()))) {
    c.add("experiment", "must be one of sweep, degenerate, kw, subreplication, oracle-check");
  }
  if (config.contains("seed") &&
      (!config.at("seed").is_number_integer() ||
       (config.at("seed").is_number_integer() && !config.at("seed").is_number_unsigned() &&
        config.at("seed").get<long long>() < 0))) {
    c.add("seed", "must be a nonnegative integer");
  }
  c.positive_int(config, "paths", "paths");
  c.positive_int(config, "steps", "steps");
  if (config.contains("export_bundle") && !config.at("export_bundle").is_boolean()) {
    c.add("export_bundle", "must be a boolean");
  }
  if (config.contains("market")) check_market(c, config.at("market"));
  if (config.contains("utility")) check_utility(c, config.at("utility"));
  if (config.contains("claim")) check_claim(c, config.at("claim"));
  if (kind) {
    const std::string key = to_string(*kind);
    if (config.contains(key)) check_section(c, *kind, config.at(key));
  }
  for (auto k : {ExperimentKind::kSweep, ExperimentKind::kDegenerate, ExperimentKind::kKw,
                 ExperimentKind::kSubreplication, ExperimentKind::kOracleCheck}) {
    if (kind && k != *kind && config.contains(to_string(k))) {
      c.add(to_string(k), "section does not match the experiment kind");
    }
  }
  return c.violations;
}

ExperimentConfig parse_config(const json& config, const Overrides& overrides,
                              const std::string& config_dir) {
  const auto violations = validate_config(config);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    if (v.field == "market.feller") throw FellerViolation(v.reason);
    throw ConfigError(v.field, v.reason);
  }
  ExperimentConfig cfg;
  cfg.kind = *kind_from(config.at("experiment").get<std::string>());
  cfg.seed = config.value("seed", std::uint64_t{1});
  cfg.paths = config.value("paths", 20000LL);
  cfg.steps = config.value("steps", 256LL);
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.paths) cfg.paths = *overrides.paths;
  if (overrides.steps) cfg.steps = *overrides.steps;
  if (cfg.paths <= 0) throw ConfigError("paths", "paths must be positive");
  if (cfg.steps <= 0) throw ConfigError("steps", "steps must be positive");
  if (cfg.paths > 100000000LL) throw ConfigError("paths", "at most 1e8 paths");
  if (cfg.steps > 1000000LL) throw ConfigError("steps", "at most 1e6 steps");

  cfg.market = kDefaultMarket;
  if (config.contains("market")) {
    for (const auto& [k, v] : config.at("market").items()) cfg.market[k] = v;
  }
  const bool sweep_like = cfg.kind == ExperimentKind::kSweep;
  cfg.utility = config.value("utility", sweep_like ? json{{"type", "power"}, {"p", 0.5}}
                                                   : json{{"type", "exponential"}, {"alpha", 1.0}});
  json default_claim = json{{"type", "call_spread"}, {"lo", -1.0}, {"hi", 1.0}};
  if (cfg.kind == ExperimentKind::kSubreplication) default_claim = json{{"type", "logistic"}};
  if (cfg.kind == ExperimentKind::kDegenerate) default_claim = json{{"type", "indicator"}};
  cfg.claim = config.value("claim", default_claim);
  cfg.section = config.value(to_string(cfg.kind), json::object());
  cfg.export_bundle = config.value("export_bundle", false);
  cfg.config_dir = config_dir;

  cfg.echo = {{"schema_version", kConfigSchemaVersion},
              {"experiment", to_string(cfg.kind)},
              {"seed", cfg.seed},
              {"paths", cfg.paths},
              {"steps", cfg.steps},
              {"market", cfg.market},
              {"utility", cfg.utility},
              {"claim", cfg.claim},
              {to_string(cfg.kind), cfg.section},
              {"export_bundle", cfg.export_bundle}};
  // Construct once so domain errors (e.g. Feller) surface before any work.
  market_from(cfg, 0.0);
  utility_from(cfg);
  claim_from(cfg);
  return cfg;
}

HestonParams market_from(const ExperimentConfig& cfg, double rho) {
  const json& m = cfg.market;
  return HestonParams(m.at("mu").get<double>(), m.at("kappa").get<double>(), m.at("theta").get<double>(),
                      m.at("sigma").get<double>(), m.at("v0").get<double>(), rho,
                      m.at("horizon").get<double>());
}

UtilitySpec utility_from(const ExperimentConfig& cfg) {
  const std::string t = cfg.utility.at("type").get<std::string>();
  if (t == "power") return UtilitySpec::power(cfg.utility.at("p").get<double>());
  if (t == "log") return UtilitySpec::log();
  return UtilitySpec::exponential(cfg.utility.at("alpha").get<double>());
}

ClaimSpec claim_from(const ExperimentConfig& cfg) {
  const json& c = cfg.claim;
  const std::string t = c.at("type").get<std::string>();
  if (t == "constant") return ClaimSpec::constant(c.value("value", 0.0));
  if (t == "indicator") return ClaimSpec::indicator_nonnegative();
  if (t == "call_spread") return ClaimSpec::call_spread(c.value("lo", -1.0), c.value("hi", 1.0));
  if (t == "put_spread") return ClaimSpec::put_spread(c.value("lo", -1.0), c.value("hi", 1.0));
  if (t == "logistic") return ClaimSpec::logistic();
  std::filesystem::path path = c.at("path").get<std::string>();
  if (path.is_relative()) path = std::filesystem::path(cfg.config_dir) / path;
  return load_claim_table_file(path.string());
}

}  // namespace ustab
