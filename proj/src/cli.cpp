#include "adasplit/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adasplit/config.hpp"
#include "adasplit/errors.hpp"
#include "adasplit/metrics.hpp"
#include "adasplit/protocol.hpp"
#include "adasplit/report.hpp"

namespace adasplit {
namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::vector<std::string> settings;  // key=value
  std::uint64_t seed = 0;
  bool has_seed = false;
  int seeds = 0;
  double mask_threshold = 0.0;
};

ExperimentConfig load_with_overrides(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg = load_config(path);
  for (const auto& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    try {
      apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("--set " + s + ": " + e.detail());
    }
  }
  if (o.has_seed) cfg.seed = o.seed;
  if (o.seeds > 0) cfg.seeds = o.seeds;
  if (o.mask_threshold > 0) cfg.mask_threshold = o.mask_threshold;
  cfg.data.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--set", o.settings, "Override a config key (key=value), repeatable");
  cmd->add_option("--seed", o.seed, "First seed")->each([&o](const std::string&) { o.has_seed = true; });
  cmd->add_option("--seeds", o.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  cmd->add_option("--mask-threshold", o.mask_threshold, "Mask binarization threshold")->check(CLI::PositiveNumber);
}

void write_run_artifacts(const fs::path& dir, const RunResult& run) {
  fs::create_directories(dir);
  std::ostringstream metrics;
  write_metrics_csv(metrics, run.rounds);
  write_text_file(dir / "metrics.csv", metrics.str());
  std::ostringstream events;
  write_events_log(events, run.messages);
  write_text_file(dir / "events.log", events.str());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

BudgetSpec budget_for(const std::vector<TableLine>& lines, double b_max, double c_max, double t_scale) {
  BudgetSpec b;
  b.t_scale = t_scale;
  for (const auto& l : lines) {
    b.b_max = std::max(b.b_max, l.stats.bytes);
    b.c_max = std::max(b.c_max, l.stats.client_flops);
  }
  if (b_max > 0) b.b_max = b_max;
  if (c_max > 0) b.c_max = c_max;
  // A table where nobody communicated (or computed) has no scale; any positive budget gives exp(0).
  if (!(b.b_max > 0)) b.b_max = 1.0;
  if (!(b.c_max > 0)) b.c_max = 1.0;
  return b;
}

int cmd_run(const std::string& config, const Overrides& o, const std::string& out_dir, std::ostream& out) {
  const auto cfg = load_with_overrides(config, o);
  const auto start = std::chrono::steady_clock::now();
  const auto runs = run_seeds(cfg);
  const double elapsed = seconds_since(start);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const auto budget = configured_budget(cfg);
  write_text_file(dir / "result.json", dump_json(result_json(runs, budget)));
  for (std::size_t k = 0; k < runs.size(); ++k) {
    write_run_artifacts(k == 0 ? dir : dir / fmt::format("seed_{}", runs[k].config.seed), runs[k]);
  }
  write_text_file(dir / "timing.txt", fmt::format("wall_seconds {:.3f}\n", elapsed));

  const auto agg = aggregate(runs);
  out << fmt::format("{} ({}): accuracy {:.2f} +- {:.2f} over {} seed(s), C2 {} bytes, C1 client {} total {}\n",
                     cfg.name, to_string(cfg.protocol), agg.accuracy.mean, agg.accuracy.std, runs.size(),
                     format_double(agg.bytes), format_double(agg.client_flops), format_double(agg.total_flops));
  out << fmt::format("wall time {:.3f} s; artifacts in {}\n", elapsed, dir.string());
  return kExitOk;
}

int cmd_sweep(const std::string& config, const Overrides& o, const std::string& param,
              const std::vector<std::string>& values, const std::string& out_dir, std::ostream& out) {
  static const std::vector<std::string> allowed = {"kappa", "eta", "mu", "beta", "lambda"};
  if (std::find(allowed.begin(), allowed.end(), param) == allowed.end()) {
    throw ConfigError("--param must be one of kappa, eta, mu, beta, lambda");
  }
  if (values.empty()) throw ConfigError("--values needs at least one value");
  const auto base = load_with_overrides(config, o);
  std::vector<TableLine> lines;
  for (const auto& v : values) {
    ExperimentConfig cfg = base;
    try {
      apply_setting(cfg, param, v);
      cfg.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{} = {}: {}", param, v, e.detail()));
    }
    const auto runs = run_seeds(cfg);
    lines.push_back({v, to_string(cfg.protocol), aggregate(runs), 0.0});
  }
  score_lines(lines, budget_for(lines, base.b_max, base.c_max, base.t_scale));
  std::ostringstream csv;
  write_sweep_csv(csv, lines);
  fs::create_directories(out_dir);
  write_text_file(fs::path(out_dir) / "table.csv", csv.str());
  out << csv.str();
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& configs, const std::string& rows_file, const Overrides& o,
                double b_max, double c_max, double t_scale, const std::string& out_dir, std::ostream& out) {
  if (t_scale <= 0) throw ConfigError("--t-scale must be positive");
  std::ostringstream csv;
  if (!rows_file.empty()) {
    const auto rows = read_table_rows(rows_file);
    if (rows.empty()) throw ConfigError(rows_file + ": no rows");
    BudgetSpec budget = budget_from_maxima(rows, t_scale);
    if (b_max > 0) budget.b_max = b_max;
    if (c_max > 0) budget.c_max = c_max;
    write_rows_csv(csv, rows, budget);
  } else {
    if (configs.empty()) throw ConfigError("compare needs --configs or --rows");
    std::vector<TableLine> lines;
    for (const auto& path : configs) {
      const auto cfg = load_with_overrides(path, o);
      const auto runs = run_seeds(cfg);
      lines.push_back({cfg.name, to_string(cfg.protocol), aggregate(runs), 0.0});
    }
    score_lines(lines, budget_for(lines, b_max, c_max, t_scale));
    write_compare_csv(csv, lines);
  }
  fs::create_directories(out_dir);
  write_text_file(fs::path(out_dir) / "table.csv", csv.str());
  out << csv.str();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Split-learning protocol simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = "out";
  Overrides run_o, sweep_o, cmp_o;

  auto* run = app.add_subcommand("run", "Run one configuration (all seeds)");
  run->add_option("--config", config, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory");
  add_overrides(run, run_o);

  std::string param;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter");
  sweep->add_option("--config", config, "Config file")->required();
  sweep->add_option("--param", param, "kappa | eta | mu | beta | lambda")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--out", out_dir, "Output directory");
  add_overrides(sweep, sweep_o);

  std::vector<std::string> configs;
  std::string rows_file;
  double b_max = 0.0, c_max = 0.0, t_scale = 8.0;
  auto* compare = app.add_subcommand("compare", "Rank configurations (or injected table rows) by C3-Score");
  compare->add_option("--configs", configs, "Comma-separated config files")->delimiter(',');
  compare->add_option("--rows", rows_file, "CSV of name,accuracy,bandwidth_gb,client_tflops[,reported_c3]");
  compare->add_option("--b-max", b_max, "Bandwidth budget in bytes (default: largest observed)");
  compare->add_option("--c-max", c_max, "Client compute budget in FLOPs (default: largest observed)");
  compare->add_option("--t-scale", t_scale, "C3 temperature");
  compare->add_option("--out", out_dir, "Output directory");
  add_overrides(compare, cmp_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, run_o, out_dir, out);
    if (*sweep) return cmd_sweep(config, sweep_o, param, values, out_dir, out);
    return cmd_compare(configs, rows_file, cmp_o, b_max, c_max, t_scale, out_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvariantError& e) {
    err << "invariant breach: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace adasplit
