#pragma once

#include <vector>

#include "adasplit/config.hpp"
#include "adasplit/cost_ledger.hpp"
#include "adasplit/datagen.hpp"
#include "adasplit/metrics.hpp"
#include "adasplit/nn.hpp"

namespace adasplit {

/// RNG stream purposes; streams are keyed by (seed, client id, purpose).
enum StreamPurpose : std::uint64_t {
  kClientInitStream = 1,
  kProjectorInitStream = 2,
  kBatchStream = 3,
  kServerInitStream = 4,
  kGlobalInitStream = 5,
};

/// Generates (or imports) the benchmark and checks every feature is finite.
FederatedData make_data(const ExperimentConfig& cfg);

/// cfg.iters_per_round, or one epoch of the largest train shard when 0.
int iterations_per_round(const ExperimentConfig& cfg, const FederatedData& data);

/// in -> hidden... -> n_classes; relu hidden layers, identity output.
DenseModel<double> make_full_model(const ExperimentConfig& cfg, int input_dim, int n_classes,
                                   std::mt19937_64& rng);
/// First client_layers() layers of a full model drawn from the client's init stream.
DenseModel<double> make_client_model(const ExperimentConfig& cfg, int client_id, int input_dim, int n_classes);
/// Remaining layers of a full model drawn from the server init stream.
DenseModel<double> make_server_model(const ExperimentConfig& cfg, int input_dim, int n_classes);
/// Single identity layer to projector_dim.
DenseModel<double> make_projector(const ExperimentConfig& cfg, int client_id, int input_dim);

/// Parameter-wise sum_i weights[i] * models[i], accumulated from zero.
DenseModel<double> average_models(const std::vector<DenseModel<double>>& models, const std::vector<double>& weights);

struct RoundMetrics {
  int round = 0;
  double mean_client_loss = 0.0;  // NaN when the protocol has no client-side loss
  double server_loss = 0.0;       // NaN when no server step ran this round
  ByteCount bytes_cum = 0;
  FlopCount client_flops_cum = 0;
  FlopCount server_flops_cum = 0;
};

struct RunResult {
  ExperimentConfig config;
  int iters_per_round = 0;
  AccuracyReport accuracy;
  CostLedger ledger;
  std::vector<MessageEvent> messages;
  std::vector<RoundMetrics> rounds;
  TrainedModels models;
  /// Mean |M^c_i(x)| over every client's train shard after training.
  double mean_abs_activation = 0.0;
  int skipped_steps = 0;
};

RunResult run_adasplit(const ExperimentConfig& cfg, const FederatedData& data);
RunResult run_sl_basic(const ExperimentConfig& cfg, const FederatedData& data);
RunResult run_splitfed(const ExperimentConfig& cfg, const FederatedData& data);
RunResult run_fedavg(const ExperimentConfig& cfg, const FederatedData& data);

/// Validates, builds the data and dispatches on cfg.protocol.
RunResult run_protocol(const ExperimentConfig& cfg);

/// cfg.seeds runs with seeds cfg.seed, cfg.seed + 1, ... (data regenerated per seed).
std::vector<RunResult> run_seeds(const ExperimentConfig& cfg);

/// cfg with both the training and the data seed set to `seed`.
ExperimentConfig with_seed(ExperimentConfig cfg, std::uint64_t seed);

}  // namespace adasplit
