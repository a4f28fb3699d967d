#include "adasplit/config.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "adasplit/errors.hpp"
#include "adasplit/orchestrator.hpp"

namespace adasplit {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) { return int(to_integer(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(key, trim(item)));
  if (out.empty()) throw ConfigError("'" + key + "' expects a comma-separated list");
  return out;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::string to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kAdaSplit: return "adasplit";
    case ProtocolKind::kSlBasic: return "sl_basic";
    case ProtocolKind::kSplitFed: return "splitfed";
    case ProtocolKind::kFedAvg: return "fedavg";
  }
  return "?";
}

ProtocolKind parse_protocol(const std::string& s) {
  if (s == "adasplit") return ProtocolKind::kAdaSplit;
  if (s == "sl_basic") return ProtocolKind::kSlBasic;
  if (s == "splitfed") return ProtocolKind::kSplitFed;
  if (s == "fedavg") return ProtocolKind::kFedAvg;
  throw ConfigError("unknown protocol '" + s + "' (expected adasplit, sl_basic, splitfed or fedavg)");
}

int ExperimentConfig::client_layers() const { return ceil_fraction(mu * double(total_layers())); }

int ExperimentConfig::local_rounds() const { return ceil_fraction(kappa * double(rounds)); }

void ExperimentConfig::validate() const {
  if (n_clients <= 0) throw ConfigError("n_clients must be positive");
  if (rounds <= 0) throw ConfigError("rounds must be positive");
  if (iters_per_round < 0) throw ConfigError("iters_per_round must be positive (or 0 for one epoch)");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (seeds <= 0) throw ConfigError("seeds must be positive");
  if (!(kappa >= 0 && kappa <= 1)) throw ConfigError("kappa must lie in [0, 1]");
  if (!(eta > 0 && eta <= 1)) throw ConfigError("eta must lie in (0, 1]");
  if (!(gamma >= 0 && gamma <= 1)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(mu > 0 && mu < 1)) throw ConfigError("mu must lie in (0, 1)");
  if (!(lambda >= 0)) throw ConfigError("lambda must be nonnegative");
  if (!(beta >= 0)) throw ConfigError("beta must be nonnegative");
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (!(mask_lr > 0)) throw ConfigError("mask_lr must be positive");
  if (!(mask_threshold > 0)) throw ConfigError("mask_threshold must be positive");
  if (!(sparse_encode_threshold >= 0)) throw ConfigError("sparse_encode_threshold must be nonnegative");
  if (!(b_max >= 0)) throw ConfigError("b_max must be nonnegative");
  if (!(c_max >= 0)) throw ConfigError("c_max must be nonnegative");
  if (!(t_scale > 0)) throw ConfigError("t_scale must be positive");
  if (projector_dim <= 0) throw ConfigError("projector_dim must be positive");
  for (int h : hidden)
    if (h <= 0) throw ConfigError("hidden layer sizes must be positive");
  const int k = client_layers();
  if (k < 1 || k > total_layers() - 1) {
    throw ConfigError(fmt::format("mu = {} puts {} of {} layers on the client; the server needs at least one", mu,
                                  k, total_layers()));
  }
  if (data_csv.empty()) {
    if (data.n_classes < 2 || data.dim < 1 || data.samples_per_class < 1) {
      throw ConfigError("dataset sizes must be positive (n_classes >= 2)");
    }
    if (!(data.cluster_separation > 0)) throw ConfigError("separation must be positive");
    if (data.mode == PartitionMode::kDisjointSubsets && data.n_classes % n_clients != 0) {
      throw ConfigError(fmt::format("disjoint_subsets needs n_classes ({}) divisible by n_clients ({})",
                                    data.n_classes, n_clients));
    }
  }
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "name") cfg.name = v;
  else if (key == "protocol") cfg.protocol = parse_protocol(v);
  else if (key == "n_clients") cfg.n_clients = to_int(key, v);
  else if (key == "rounds") cfg.rounds = to_int(key, v);
  else if (key == "iters_per_round") cfg.iters_per_round = to_int(key, v);
  else if (key == "batch_size") cfg.batch_size = to_int(key, v);
  else if (key == "seed") {
    const long long s = to_integer(key, v);
    if (s < 0) throw ConfigError("'seed' must be nonnegative");
    cfg.seed = std::uint64_t(s);
  }
  else if (key == "seeds") cfg.seeds = to_int(key, v);
  else if (key == "kappa") cfg.kappa = to_double(key, v);
  else if (key == "eta") cfg.eta = to_double(key, v);
  else if (key == "gamma") cfg.gamma = to_double(key, v);
  else if (key == "lambda") cfg.lambda = to_double(key, v);
  else if (key == "tau") cfg.tau = to_double(key, v);
  else if (key == "mu") cfg.mu = to_double(key, v);
  else if (key == "beta") cfg.beta = to_double(key, v);
  else if (key == "lr") cfg.lr = to_double(key, v);
  else if (key == "mask_lr") cfg.mask_lr = to_double(key, v);
  else if (key == "freeze_masks") cfg.freeze_masks = to_bool(key, v);
  else if (key == "clip_masks") cfg.clip_masks = to_bool(key, v);
  else if (key == "mask_threshold") cfg.mask_threshold = to_double(key, v);
  else if (key == "sparse_encode_threshold") cfg.sparse_encode_threshold = to_double(key, v);
  else if (key == "b_max") cfg.b_max = to_double(key, v);
  else if (key == "c_max") cfg.c_max = to_double(key, v);
  else if (key == "t_scale") cfg.t_scale = to_double(key, v);
  else if (key == "hidden") cfg.hidden = to_int_list(key, v);
  else if (key == "projector_dim") cfg.projector_dim = to_int(key, v);
  else if (key == "n_classes") cfg.data.n_classes = to_int(key, v);
  else if (key == "dim") cfg.data.dim = to_int(key, v);
  else if (key == "samples_per_class") cfg.data.samples_per_class = to_int(key, v);
  else if (key == "mode") cfg.data.mode = parse_partition_mode(v);
  else if (key == "separation") cfg.data.cluster_separation = to_double(key, v);
  else if (key == "data_csv") cfg.data_csv = v;
  else throw ConfigError("unknown key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream in(text);
  std::string raw;
  int line_no = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "missing key before '='");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(line_no, fmt::format("duplicate key '{}' (first set on line {})", key, it->second));
    }
    seen[key] = line_no;
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(line_no, e.detail());
    }
  }
  // Range checks name their key first; point at the line that set it.
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const std::string& msg = e.detail();
    int where = 0;
    for (const auto& [key, line] : seen) {
      if (msg.rfind(key + " ", 0) == 0) where = line;
    }
    throw ConfigError(where, msg);
  }
  cfg.data.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(e.line(), e.detail(), path.string());
  }
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> m;
  m["name"] = cfg.name;
  m["protocol"] = to_string(cfg.protocol);
  m["n_clients"] = std::to_string(cfg.n_clients);
  m["rounds"] = std::to_string(cfg.rounds);
  m["iters_per_round"] = std::to_string(cfg.iters_per_round);
  m["batch_size"] = std::to_string(cfg.batch_size);
  m["seed"] = std::to_string(cfg.seed);
  m["seeds"] = std::to_string(cfg.seeds);
  m["kappa"] = fmt_double(cfg.kappa);
  m["eta"] = fmt_double(cfg.eta);
  m["gamma"] = fmt_double(cfg.gamma);
  m["lambda"] = fmt_double(cfg.lambda);
  m["tau"] = fmt_double(cfg.tau);
  m["mu"] = fmt_double(cfg.mu);
  m["beta"] = fmt_double(cfg.beta);
  m["lr"] = fmt_double(cfg.lr);
  m["mask_lr"] = fmt_double(cfg.mask_lr);
  m["freeze_masks"] = cfg.freeze_masks ? "true" : "false";
  m["clip_masks"] = cfg.clip_masks ? "true" : "false";
  m["mask_threshold"] = fmt_double(cfg.mask_threshold);
  m["sparse_encode_threshold"] = fmt_double(cfg.sparse_encode_threshold);
  m["b_max"] = fmt_double(cfg.b_max);
  m["c_max"] = fmt_double(cfg.c_max);
  m["t_scale"] = fmt_double(cfg.t_scale);
  std::string hidden;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(cfg.hidden[i]);
  m["hidden"] = hidden;
  m["projector_dim"] = std::to_string(cfg.projector_dim);
  m["n_classes"] = std::to_string(cfg.data.n_classes);
  m["dim"] = std::to_string(cfg.data.dim);
  m["samples_per_class"] = std::to_string(cfg.data.samples_per_class);
  m["mode"] = to_string(cfg.data.mode);
  m["separation"] = fmt_double(cfg.data.cluster_separation);
  if (!cfg.data_csv.empty()) m["data_csv"] = cfg.data_csv;
  return m;
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace adasplit
