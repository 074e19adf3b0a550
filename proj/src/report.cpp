#include "ustab/report.hpp"

#include "ustab/affine.hpp"
#include "ustab/bundle_io.hpp"
#include "ustab/errors.hpp"
#include "ustab/kw.hpp"
#include "ustab/oracles.hpp"
#include "ustab/parallel.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ustab {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvWriter::sep() {
  if (!first_) out_ << ',';
  first_ = false;
}

CsvWriter& CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) cell(n);
  return end_row();
}

CsvWriter& CsvWriter::cell(double v) {
  sep();
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
  sep();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  sep();
  if (v.find_first_of(",\"\n") == std::string::npos) {
    out_ << v;
  } else {
    out_ << '"';
    for (char c : v) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  }
  return *this;
}

CsvWriter& CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
  return *this;
}

std::string git_blob_hash(const std::string& content) {
  const std::string prefix = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("sha1: context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, prefix.data(), prefix.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha1: digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string error_record(const std::string& kind, const std::string& field, const std::string& reason) {
  return json{{"error", {{"kind", kind}, {"field", field}, {"reason", reason}}}}.dump();
}

namespace {

// Every row ends with the metadata needed to regenerate it.
const std::vector<std::string> kMetaColumns = {"seed", "paths", "steps"};

std::vector<std::string> with_meta(std::vector<std::string> cols) {
  cols.insert(cols.end(), kMetaColumns.begin(), kMetaColumns.end());
  return cols;
}

void meta(CsvWriter& w, const ExperimentConfig& cfg) {
  w.cell(static_cast<long long>(cfg.seed)).cell(cfg.paths).cell(cfg.steps).end_row();
}

std::vector<double> doubles(const json& section, const std::string& key, std::vector<double> fallback) {
  if (!section.contains(key)) return fallback;
  std::vector<double> out;
  for (const auto& e : section.at(key)) out.push_back(e.is_string() ? kInf : e.get<double>());
  return out;
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  // Opens a fresh file; the name is recorded in the manifest.
  std::ofstream open(const std::string& name) {
    names_.push_back(name);
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file " + (dir_ / name).string());
    return out;
  }
  void record(const std::string& name) { names_.push_back(name); }
  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

void maybe_export(const ExperimentConfig& cfg, Outputs& out, const PathBundle& bundle,
                  const std::string& stem) {
  if (!cfg.export_bundle) return;
  write_bundle_file((out.dir() / (stem + ".ustb")).string(), bundle);
  out.record(stem + ".ustb");
  std::ofstream csv = out.open(stem + "_terminals.csv");
  export_terminals_csv(csv, bundle);
}

void run_degenerate(const ExperimentConfig& cfg, Outputs& out) {
  const json& s = cfg.section;
  const std::vector<double> ns = doubles(s, "n", {1.0, 2.0, 4.0, 8.0, kInf});
  const double alpha = s.value("alpha", 1.0);
  const double x = s.value("x", 0.0);
  DegenerateSettings settings;
  settings.steps = static_cast<int>(cfg.steps);
  settings.paths = cfg.paths;
  settings.seed = cfg.seed;
  settings.budget = s.value("budget", settings.budget);
  if (s.contains("basis")) {
    const json& b = s.at("basis");
    settings.basis.degree_b = b.value("degree_b", settings.basis.degree_b);
    settings.basis.degree_v = b.value("degree_v", settings.basis.degree_v);
    settings.basis.buckets = b.value("buckets", settings.basis.buckets);
  }
  const auto rows = degenerate_example(ns, alpha, x, settings);
  {
    std::ofstream f = out.open("degenerate.csv");
    CsvWriter w(f);
    w.header(with_meta({"n", "alpha", "x", "hedged_mean", "hedged_se", "analytic_un", "analytic_uinf",
                        "mc_uinf_mean", "mc_uinf_se", "analytic_gap", "mc_gap", "mc_gap_se",
                        "hedge_residual_sd"}));
    for (const auto& r : rows) {
      w.cell(r.n).cell(alpha).cell(x).cell(r.hedged.mean).cell(r.hedged.se()).cell(r.analytic_un);
      w.cell(r.analytic_uinf).cell(r.mc_uinf.mean).cell(r.mc_uinf.se()).cell(r.analytic_gap);
      w.cell(r.hedged.mean - r.mc_uinf.mean).cell(combined_se(r.hedged, r.mc_uinf));
      w.cell(r.hedge_residual_sd);
      meta(w, cfg);
    }
  }
  // Distance of each market from the limit S = 0 under the probing rules.
  const TimeGrid grid(static_cast<int>(cfg.steps), 1.0);
  const RandomStream stream(cfg.seed);
  const GeneralMarketCoeffs family = scaled_brownian_family();
  const GeneralMarketPaths limit = simulate_general_market(family, kInf, grid, stream, cfg.paths);
  std::ofstream f = out.open("degenerate_distance.csv");
  CsvWriter w(f);
  w.header(with_meta({"n", "distance_mean", "distance_se", "argmax_rule"}));
  for (double n : ns) {
    const GeneralMarketPaths m = simulate_general_market(family, n, grid, stream, cfg.paths);
    const DistanceEstimate d = semimartingale_distance(m.S, limit.S, default_adversaries());
    w.cell(n).cell(d.best.mean).cell(d.best.se()).cell(to_string(d.argmax));
    meta(w, cfg);
  }
  if (cfg.export_bundle) {
    maybe_export(cfg, out, to_path_bundle(limit, cfg.seed), "bundle_limit");
  }
}

void run_sweep(const ExperimentConfig& cfg, Outputs& out) {
  const json& s = cfg.section;
  const SweepConfig defaults{market_from(cfg, 0.0), {}, {}, {}, claim_from(cfg), utility_from(cfg),
                             static_cast<int>(cfg.steps), cfg.paths, cfg.seed, 30, 20, 1, 1.0, 10.0, 2.0,
                             RegressionBasis{}, BisectionSettings{}, Admissibility{}};
  SweepConfig sc = defaults;
  sc.rhos = doubles(s, "rho", {0.4, 0.2, 0.1, 0.05});
  sc.xs = doubles(s, "x", {0.25});
  sc.ys = doubles(s, "y", {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0});
  sc.primal_budget = s.value("primal_budget", sc.primal_budget);
  sc.dual_budget = s.value("dual_budget", sc.dual_budget);
  sc.dual_buckets = s.value("dual_buckets", sc.dual_buckets);
  sc.dual_box = s.value("dual_box", sc.dual_box);
  sc.dual_cap = s.value("dual_cap", sc.dual_cap);
  sc.strategy_box = s.value("strategy_box", sc.strategy_box);
  sc.bisection.tolerance = s.value("bisection_tolerance", sc.bisection.tolerance);
  sc.admissibility.floor = s.value("floor", sc.admissibility.floor);
  if (s.contains("hedge_basis")) {
    const json& b = s.at("hedge_basis");
    sc.hedge_basis.degree_b = b.value("degree_b", sc.hedge_basis.degree_b);
    sc.hedge_basis.degree_v = b.value("degree_v", sc.hedge_basis.degree_v);
    sc.hedge_basis.buckets = b.value("buckets", sc.hedge_basis.buckets);
  }
  const SweepTable t = rho_sweep(sc);
  {
    std::ofstream f = out.open("sweep_primal.csv");
    CsvWriter w(f);
    w.header(with_meta({"x", "rho", "constrained", "strategy", "mean", "se", "nonfinite", "violations",
                        "stopped_fraction"}));
    for (const auto& r : t.primal) {
      w.cell(r.x).cell(r.rho).cell(static_cast<long long>(r.constrained)).cell(r.strategy_id);
      w.cell(r.estimate.mean).cell(r.estimate.se()).cell(static_cast<long long>(r.estimate.nonfinite));
      w.cell(static_cast<long long>(r.violations)).cell(r.stopped_fraction);
      meta(w, cfg);
    }
  }
  {
    std::ofstream f = out.open("sweep_dual.csv");
    CsvWriter w(f);
    w.header(with_meta({"y", "rho", "candidate", "mean", "se"}));
    for (const auto& r : t.dual) {
      w.cell(r.y).cell(r.rho).cell(r.candidate_id).cell(r.estimate.mean).cell(r.estimate.se());
      meta(w, cfg);
    }
  }
  {
    std::ofstream f = out.open("sweep_prices.csv");
    CsvWriter w(f);
    w.header(with_meta({"x", "rho", "price", "price_se", "bracket_width", "iterations", "noise_floor",
                        "within_noise", "u_mean", "u_se", "w_mean", "w_se", "diagnosis"}));
    for (const auto& r : t.prices) {
      const PriceResult& p = r.price;
      w.cell(r.x).cell(r.rho).cell(p.p).cell(r.se).cell(p.bracket_width);
      w.cell(static_cast<long long>(p.iterations)).cell(static_cast<long long>(p.noise_floor));
      w.cell(static_cast<long long>(p.within_noise)).cell(p.u.mean).cell(p.u.se()).cell(p.w.mean);
      w.cell(p.w.se()).cell(p.diagnosis);
      meta(w, cfg);
    }
  }
  {
    std::ofstream f = out.open("sweep_summary.csv");
    CsvWriter w(f);
    w.header(with_meta({"x", "rho", "u_hat", "u_hat_se", "u_c_hat_rho0", "u_c_hat_rho0_se", "cap",
                        "cap_se", "cap_y", "excess", "excess_se", "price_gap", "price_gap_se"}));
    for (const auto& r : t.summary) {
      w.cell(r.x).cell(r.rho).cell(r.u_hat.mean).cell(r.u_hat.se()).cell(r.u_c_hat.mean);
      w.cell(r.u_c_hat.se()).cell(r.cap.mean).cell(r.cap.se()).cell(r.cap_y).cell(r.excess);
      w.cell(r.excess_se).cell(r.price_gap).cell(r.price_gap_se);
      meta(w, cfg);
    }
  }
  {
    // gnuplot: one block per x, columns as in the header comment.
    std::ofstream f = out.open("sweep_rho.dat");
    f << "# rho u_hat u_hat_se cap cap_se price_gap price_gap_se\n";
    for (double x : sc.xs) {
      f << "# x = " << format_double(x) << '\n';
      for (const auto& r : t.summary) {
        if (r.x != x) continue;
        f << format_double(r.rho) << ' ' << format_double(r.u_hat.mean) << ' '
          << format_double(r.u_hat.se()) << ' ' << format_double(r.cap.mean) << ' '
          << format_double(r.cap.se()) << ' ' << format_double(r.price_gap) << ' '
          << format_double(r.price_gap_se) << '\n';
      }
      f << "\n\n";
    }
  }
  if (cfg.export_bundle) {
    const TimeGrid grid(sc.steps, sc.market.horizon());
    maybe_export(cfg, out, simulate_heston_market(sc.market, grid, RandomStream(cfg.seed), cfg.paths),
                 "bundle_rho0");
  }
}

void run_kw(const ExperimentConfig& cfg, Outputs& out) {
  const json& s = cfg.section;
  const std::string name = s.value("family", std::string("nondegenerate"));
  const std::vector<double> ns = doubles(s, "n", {1.0, 2.0, 4.0, 10.0, 32.0, 100.0});
  const KwFamily fam = kw_family(name);
  const TimeGrid grid(static_cast<int>(cfg.steps), cfg.market.at("horizon").get<double>());
  const auto points =
      kw_convergence_diag(fam.coeffs, fam.nu, grid, RandomStream(cfg.seed), cfg.paths, ns);
  std::ofstream f = out.open("kw.csv");
  CsvWriter w(f);
  w.header(with_meta({"family", "n", "energy_mean", "energy_se", "zero_cell_fraction"}));
  for (const auto& p : points) {
    w.cell(name).cell(p.n).cell(p.energy.mean).cell(p.energy.se()).cell(p.zero_cell_fraction);
    meta(w, cfg);
  }
}

void run_subreplication(const ExperimentConfig& cfg, Outputs& out) {
  const json& s = cfg.section;
  const double rho = s.value("rho", 0.5);
  const std::vector<double> xs = doubles(s, "x", {-8.0, -6.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0});
  const std::vector<double> gaps = doubles(s, "gap", {0.01});
  const HestonParams params = market_from(cfg, rho);
  const ClaimSpec claim = claim_from(cfg);
  const TimeGrid grid(static_cast<int>(cfg.steps), params.horizon());
  const PathBundle bundle = simulate_heston_market(params, grid, RandomStream(cfg.seed), cfg.paths);
  std::ofstream f = out.open("subreplication.csv");
  CsvWriter w(f);
  w.header(with_meta({"rho", "gap", "t_prime", "x", "mean", "se", "quadrature", "phi_min"}));
  for (double gap : gaps) {
    const double t_prime = params.horizon() - gap;
    if (!(t_prime > 0.0)) throw ConfigError("subreplication.gap", "gap must be smaller than the horizon");
    for (double x : xs) {
      const Estimate e = subreplication_estimate(params, claim, x, t_prime, bundle);
      const double q = gaussian_expectation([&](double b) { return claim(b); }, x, std::sqrt(gap), 64);
      w.cell(rho).cell(gap).cell(t_prime).cell(x).cell(e.mean).cell(e.se()).cell(q).cell(claim.phi_min());
      meta(w, cfg);
    }
  }
  maybe_export(cfg, out, bundle, "bundle");
}

struct OracleRow {
  std::string name;
  double value, reference, tolerance;
  bool pass() const { return std::abs(value - reference) <= tolerance; }
};

bool run_oracle_check(const ExperimentConfig& cfg, Outputs& out) {
  const HestonParams params = market_from(cfg, 0.0);
  const TimeGrid grid(static_cast<int>(cfg.steps), params.horizon());
  const RandomStream stream(cfg.seed);
  const HestonTerminals term = simulate_heston_terminals(params, grid, stream, cfg.paths);
  std::vector<OracleRow> rows;
  const auto mc_row = [&](const std::string& name, const VectorXd& samples, double reference) {
    const Estimate e = make_estimate(samples);
    rows.push_back({name, e.mean, reference, 3.0 * e.se()});
  };
  mc_row("cir_terminal_mean", term.V, params.mean_variance(params.horizon()));
  mc_row("density_mean", term.Z, 1.0);
  for (double u : {0.5, 1.0, 2.0}) {
    const double ref = cir_bond_price(params, u);
    rows.push_back({"riccati_vs_bond_u=" + format_double(u),
                    affine_exponential_moment(params, {0.0, -u}), ref, 1e-8 * std::max(1.0, ref)});
  }
  for (double a : {-1.0, -0.5, 0.0}) {
    for (double b : {-1.0, -0.5, 0.25}) {
      const VectorXd samples =
          (a * term.V + b * term.integrated_variance).array().exp().matrix();
      mc_row("riccati_vs_mc_a=" + format_double(a) + "_b=" + format_double(b), samples,
             affine_exponential_moment(params, {a, b}));
    }
  }
  // Power 1/2: V(y) = 1/y, so E[V(y Z)] = E[Z^-1] / y.
  const ConjugatePair pair(UtilitySpec::power(0.5));
  for (double y : {0.5, 1.0, 2.0}) {
    VectorXd samples(term.Z.size());
    for (Index i = 0; i < samples.size(); ++i) samples(i) = conjugate_eval(pair, y * term.Z(i));
    const Estimate e = make_estimate(samples);
    const double ref = mmm_density_moment(params, -1.0) / y;
    rows.push_back({"dual_anchor_y=" + format_double(y), e.mean, ref,
                    std::max(3.0 * e.se(), 0.01 * std::abs(ref))});
  }
  std::ofstream f = out.open("oracle.csv");
  CsvWriter w(f);
  w.header(with_meta({"check", "value", "reference", "tolerance", "abs_error", "pass"}));
  bool all = true;
  for (const auto& r : rows) {
    all = all && r.pass();
    w.cell(r.name).cell(r.value).cell(r.reference).cell(r.tolerance).cell(std::abs(r.value - r.reference));
    w.cell(static_cast<long long>(r.pass()));
    meta(w, cfg);
  }
  return all;
}

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunOutcome run_experiment(const std::string& config_text, const std::string& config_dir,
                          const Overrides& overrides, const std::string& out_dir) {
  const json raw = json::parse(config_text);
  const ExperimentConfig cfg = parse_config(raw, overrides, config_dir);
  fs::create_directories(out_dir);
  Outputs out{fs::path(out_dir)};
  const std::string started = iso_now();
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome outcome;
  switch (cfg.kind) {
    case ExperimentKind::kDegenerate: run_degenerate(cfg, out); break;
    case ExperimentKind::kSweep: run_sweep(cfg, out); break;
    case ExperimentKind::kKw: run_kw(cfg, out); break;
    case ExperimentKind::kSubreplication: run_subreplication(cfg, out); break;
    case ExperimentKind::kOracleCheck:
      if (!run_oracle_check(cfg, out)) outcome.exit_code = kExitOracleFailed;
      break;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json files = json::array();
  for (const auto& name : out.names()) {
    files.push_back({{"file", name}, {"hash", git_blob_hash(slurp(out.dir() / name))}});
  }
  const json manifest = {{"artifact_version", kArtifactVersion},
                         {"schema_version", kConfigSchemaVersion},
                         {"experiment", to_string(cfg.kind)},
                         {"seed", cfg.seed},
                         {"input_hash", git_blob_hash(config_text)},
                         {"config", cfg.echo},
                         {"outputs", files},
                         {"wall_clock", {{"started", started}, {"seconds", seconds}}},
                         {"workers", worker_count()},
                         {"exit_code", outcome.exit_code}};
  std::ofstream(out.dir() / "manifest.json", std::ios::binary | std::ios::trunc) << manifest.dump(2) << '\n';
  outcome.outputs = out.names();
  outcome.outputs.push_back("manifest.json");
  return outcome;
}

}  // namespace ustab
