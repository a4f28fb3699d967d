#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "adasplit/datagen.hpp"

namespace adasplit {

enum class ProtocolKind { kAdaSplit, kSlBasic, kSplitFed, kFedAvg };

std::string to_string(ProtocolKind kind);
ProtocolKind parse_protocol(const std::string& s);

/// Everything needed to reproduce one experiment.
///
/// Config files are flat `key = value` lines; `#` starts a comment. Keys are
/// the field names below (data fields without the `data.` prefix).
struct ExperimentConfig {
  std::string name = "experiment";
  ProtocolKind protocol = ProtocolKind::kAdaSplit;

  int n_clients = 5;
  int rounds = 20;
  int iters_per_round = 0;  // 0: one epoch of the largest train shard
  int batch_size = 16;
  std::uint64_t seed = 1;
  int seeds = 5;

  double kappa = 0.6;
  double eta = 0.6;
  double gamma = 0.87;
  double lambda = 1e-3;
  double tau = 0.07;
  double mu = 0.2;
  double beta = 0.0;

  double lr = 1e-3;
  double mask_lr = 0.05;
  bool freeze_masks = false;
  bool clip_masks = true;
  double mask_threshold = 0.5;
  double sparse_encode_threshold = 0.0;

  std::vector<int> hidden = {64, 64, 64, 64};
  int projector_dim = 64;

  /// C3 budgets in bytes and client FLOPs; 0 leaves C3 unreported for single runs.
  double b_max = 0.0;
  double c_max = 0.0;
  double t_scale = 8.0;

  SyntheticMixedSpec data;
  std::string data_csv;  // optional shard import, overrides the generator

  /// Layers in the full model (hidden layers + output layer).
  int total_layers() const { return int(hidden.size()) + 1; }
  /// ceil(mu * L) leading layers live on the client.
  int client_layers() const;
  /// ceil(kappa * R) rounds of local phase.
  int local_rounds() const;

  /// Throws ConfigError on any invariant violation.
  void validate() const;
};

/// Sets one key; throws ConfigError (line 0) on unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical key/value listing, parseable by parse_config.
std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg);
std::string to_config_text(const ExperimentConfig& cfg);

}  // namespace adasplit
