#include "fbmint/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cli_internal.hpp"

namespace fbmint {

namespace {

using detail::json;

constexpr const char* version_stamp = "fbmint 1.0.0";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < 0) throw ConfigError("config key '" + key + "' must be nonnegative");
  return static_cast<std::size_t>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const unsigned long long x = std::stoull(v, &used);
      if (used == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': '" + v + "' is not an unsigned integer");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "' needs at least one value");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    auto dbl = [&m](const std::string& k, double ExperimentConfig::*field) {
      m[k] = [field](ExperimentConfig& c, const std::string& key, const std::string& v) {
        c.*field = to_double(key, v);
      };
    };
    auto cnt = [&m](const std::string& k, std::size_t ExperimentConfig::*field) {
      m[k] = [field](ExperimentConfig& c, const std::string& key, const std::string& v) {
        c.*field = to_count(key, v);
      };
    };
    auto integer = [&m](const std::string& k, int ExperimentConfig::*field) {
      m[k] = [field](ExperimentConfig& c, const std::string& key, const std::string& v) {
        c.*field = static_cast<int>(to_int(key, v));
      };
    };
    auto text = [&m](const std::string& k, std::string ExperimentConfig::*field) {
      m[k] = [field](ExperimentConfig& c, const std::string&, const std::string& v) { c.*field = v; };
    };
    auto list = [&m](const std::string& k, std::vector<double> ExperimentConfig::*field) {
      m[k] = [field](ExperimentConfig& c, const std::string& key, const std::string& v) {
        c.*field = to_list(key, v);
      };
    };
    dbl("hurst", &ExperimentConfig::hurst);
    cnt("grid_size", &ExperimentConfig::grid_size);
    m["master_seed"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      c.master_seed = to_u64(key, v);
    };
    cnt("n_paths", &ExperimentConfig::n_paths);
    dbl("alpha", &ExperimentConfig::alpha);
    dbl("gamma", &ExperimentConfig::gamma);
    dbl("beta", &ExperimentConfig::beta);
    integer("n_max", &ExperimentConfig::n_max);
    integer("points_per_block", &ExperimentConfig::points_per_block);
    dbl("scale", &ExperimentConfig::scale);
    dbl("s0", &ExperimentConfig::s0);
    dbl("mu", &ExperimentConfig::mu);
    dbl("sigma", &ExperimentConfig::sigma);
    text("rate_spec", &ExperimentConfig::rate_spec);
    dbl("r_max", &ExperimentConfig::r_max);
    text("claim_spec", &ExperimentConfig::claim_spec);
    text("improper_claim", &ExperimentConfig::improper_claim);
    text("weak_claim", &ExperimentConfig::weak_claim);
    text("target_distribution_spec", &ExperimentConfig::target_distribution_spec);
    text("output_dir", &ExperimentConfig::output_dir);
    dbl("arbitrage_c", &ExperimentConfig::arbitrage_c);
    list("weak_v0s", &ExperimentConfig::weak_v0s);
    list("holder_v0s", &ExperimentConfig::holder_v0s);
    dbl("holder_a", &ExperimentConfig::holder_a);
    integer("replication_n_max", &ExperimentConfig::replication_n_max);
    cnt("replication_base", &ExperimentConfig::replication_base);
    dbl("outer_gamma", &ExperimentConfig::outer_gamma);
    integer("outer_blocks", &ExperimentConfig::outer_blocks);
    cnt("outer_base", &ExperimentConfig::outer_base);
    integer("nested_k_max", &ExperimentConfig::nested_k_max);
    integer("nested_points", &ExperimentConfig::nested_points);
    cnt("ledger_paths", &ExperimentConfig::ledger_paths);
    cnt("verify_paths", &ExperimentConfig::verify_paths);
    cnt("ito_paths", &ExperimentConfig::ito_paths);
    return m;
  }();
  return table;
}

// rethrows argument errors of the library checkers as configuration errors
template <class F>
void as_config(F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

AlphaParam ExperimentConfig::alpha_param() const {
  return alpha > 0.0 ? AlphaParam(alpha) : default_alpha(HurstParam(hurst));
}

void ExperimentConfig::validate() const {
  as_config([&] {
    const HurstParam h(hurst);
    if (grid_size < 16 || grid_size % 4 != 0) throw ConfigError("grid_size must be a multiple of 4 and >= 16");
    if (n_paths == 0) throw ConfigError("n_paths must be positive");
    if (verify_paths < 100) throw ConfigError("verify_paths must be >= 100");
    if (ito_paths < 2) throw ConfigError("ito_paths must be >= 2");
    if (n_max < 0) throw ConfigError("n_max must be nonnegative (0 picks it from the grid)");
    if (points_per_block < 2) throw ConfigError("points_per_block must be >= 2");
    if (!(scale > 0.0)) throw ConfigError("scale must be positive");
    if (!(arbitrage_c > 0.0)) throw ConfigError("arbitrage_c must be positive");
    if (!(outer_gamma > 1.0)) throw ConfigError("outer_gamma outside (1, inf)");
    if (outer_blocks < 2) throw ConfigError("outer_blocks must be >= 2");
    if (replication_n_max < 3) throw ConfigError("replication_n_max must be >= 3");
    if (nested_k_max < 1 || nested_points < 2) throw ConfigError("nested_k_max >= 1 and nested_points >= 2 required");
    if (outer_base < 16 || replication_base < 16) throw ConfigError("outer_base and replication_base must be >= 16");
    if (holder_a < 0.0 || (holder_a > 0.0 && holder_a >= hurst)) throw ConfigError("holder_a outside (0, H)");

    MarketParams mp;
    mp.s0 = s0;
    mp.mu = mu;
    mp.sigma = sigma;
    mp.rate = RateSpec::parse(rate_spec);
    mp.r_max = r_max;
    mp.validate();
    const StockModel stock = mp.stock();
    ClaimSpec::parse(claim_spec, stock);
    ClaimSpec::parse(improper_claim, stock);
    ClaimSpec::parse(weak_claim, stock);
    TargetDistribution::parse(target_distribution_spec);

    if (hurst > 0.5) {
      alpha_param().require_window(h);
      const DivergentParams dp(gamma, beta, std::max(n_max, 1), points_per_block, scale);
      dp.validate(h);
      const ClaimSpec claim = ClaimSpec::parse(claim_spec, stock);
      const double a = holder_a > 0.0 ? holder_a : claim.holder_exponent(h);
      choose_replication_params(h, a).validate(h);
      NestedDivergent{NestedSpec{1.2, nested_k_max, nested_points}, beta, scale}.validate(h);
    }
  });
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  json j;
  j["hurst"] = hurst;
  j["grid_size"] = grid_size;
  j["master_seed"] = master_seed;
  j["n_paths"] = n_paths;
  j["alpha"] = alpha_param().alpha;
  j["gamma"] = gamma;
  j["beta"] = beta;
  j["n_max"] = n_max;
  j["points_per_block"] = points_per_block;
  j["scale"] = scale;
  j["s0"] = s0;
  j["mu"] = mu;
  j["sigma"] = sigma;
  j["rate_spec"] = rate_spec;
  j["r_max"] = r_max;
  j["claim_spec"] = claim_spec;
  j["improper_claim"] = improper_claim;
  j["weak_claim"] = weak_claim;
  j["target_distribution_spec"] = target_distribution_spec;
  j["arbitrage_c"] = arbitrage_c;
  j["weak_v0s"] = weak_v0s;
  j["holder_v0s"] = holder_v0s;
  j["holder_a"] = holder_a;
  j["replication_n_max"] = replication_n_max;
  j["replication_base"] = replication_base;
  j["outer_gamma"] = outer_gamma;
  j["outer_blocks"] = outer_blocks;
  j["outer_base"] = outer_base;
  j["nested_k_max"] = nested_k_max;
  j["nested_points"] = nested_points;
  j["ledger_paths"] = ledger_paths;
  j["verify_paths"] = verify_paths;
  j["ito_paths"] = ito_paths;
  return j;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{
      "generate",   "ito-check", "diverge",    "represent-distribution", "represent-improper", "replicate",
      "arbitrage",  "hedge-weak", "hedge-holder", "verify-small-ball",   "verify-sign-lemma",  "verify-all"};
  return names;
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

}  // namespace

ExperimentReport run_experiment(const std::string& subcommand, const ExperimentConfig& cfg, bool write_files) {
  using namespace detail;
  static const std::map<std::string, void (*)(Run&)> table{
      {"generate", run_generate},
      {"ito-check", run_ito_check},
      {"diverge", run_diverge},
      {"represent-distribution", run_represent_distribution},
      {"represent-improper", run_represent_improper},
      {"replicate", run_replicate},
      {"arbitrage", run_arbitrage},
      {"hedge-weak", run_hedge_weak},
      {"hedge-holder", run_hedge_holder},
      {"verify-small-ball", run_verify_small_ball},
      {"verify-sign-lemma", run_verify_sign_lemma},
      {"verify-all", run_verify_all},
  };
  const auto it = table.find(subcommand);
  if (it == table.end()) throw ConfigError("unknown subcommand '" + subcommand + "'");
  cfg.validate();

  const auto start = std::chrono::steady_clock::now();
  Run run(cfg);
  it->second(run);
  if (run.path_based) {
    run.aggregates["path_errors"] = run.path_errors;
    run.verdicts.push_back(make_verdict("paths finished without runtime errors", double(run.path_errors), 0.0,
                                        run.path_errors == 0, cfg.n_paths, "", cfg.master_seed));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ExperimentReport out;
  out.verdicts = run.verdicts;
  out.seconds = seconds;
  for (const auto& v : run.verdicts) out.passed = out.passed && v.passed;
  json verdicts = json::array();
  for (const auto& v : run.verdicts) verdicts.push_back(to_json(v));
  json& r = out.report;
  r["version"] = version_stamp;
  r["subcommand"] = subcommand;
  r["config"] = cfg.to_json();
  r["paths"] = std::move(run.paths);
  r["aggregates"] = std::move(run.aggregates);
  r["verdicts"] = verdicts;
  r["passed"] = out.passed;

  if (write_files) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", out.report.dump(2) + "\n");
    write_text(dir / "verdicts.json", verdicts.dump(2) + "\n");
    json timing;
    timing["subcommand"] = subcommand;
    timing["seconds"] = seconds;
    write_text(dir / "timing.json", timing.dump(2) + "\n");
    if (run.path_rows > 0) write_text(dir / "paths.csv", run.paths_csv.str());
    if (run.ledger_rows > 0) write_text(dir / "ledger.csv", run.ledger_csv.str());
    if (run.terminal_rows > 0) write_text(dir / "terminals.csv", run.terminals_csv.str());
  }
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Pathwise integral representations under fractional Brownian motion"};
  std::string subcommand;
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  std::size_t grid = 0;
  std::string out_dir;
  bool quiet = false;
  app.add_option("subcommand", subcommand, "experiment to run")->required()->check(CLI::IsMember(subcommands()));
  app.add_option("--config", config_path, "flat key = value configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  auto* paths_opt = app.add_option("--paths", paths, "number of paths");
  auto* grid_opt = app.add_option("--grid", grid, "base grid size");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--quiet", quiet, "print nothing on success");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ExperimentReport report;
  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (const char* env = std::getenv("FBMINT_SEED")) set_config_value(cfg, "master_seed", env);
    if (const char* env = std::getenv("FBMINT_OUTPUT_DIR")) cfg.output_dir = env;
    if (*seed_opt) cfg.master_seed = seed;
    if (*paths_opt) cfg.n_paths = paths;
    if (*grid_opt) cfg.grid_size = grid;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.validate();
    report = run_experiment(subcommand, cfg, true);
    if (!quiet) {
      for (const auto& v : report.verdicts) {
        std::printf("%s  %s  statistic=%.6g threshold=%.6g\n", v.passed ? "PASS" : "FAIL", v.name.c_str(),
                    v.statistic, v.threshold);
      }
      std::printf("%s: %s (%.1f s), outputs in %s\n", subcommand.c_str(), report.passed ? "passed" : "failed",
                  report.seconds, cfg.output_dir.c_str());
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 1;
  }
  return report.passed ? 0 : 3;
}

}  // namespace fbmint
