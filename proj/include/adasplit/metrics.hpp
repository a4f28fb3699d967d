#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adasplit/cost_ledger.hpp"
#include "adasplit/datagen.hpp"
#include "adasplit/nn.hpp"

namespace adasplit {

inline constexpr double kBytesPerGB = 1e9;
inline constexpr double kFlopsPerTFlop = 1e12;

struct C1Report {
  FlopCount total = 0;
  FlopCount client = 0;
  FlopCount server = 0;
};

C1Report compute_c1(const CostLedger& ledger);

/// Bytes in both directions over all clients.
ByteCount compute_c2(const CostLedger& ledger);

/// Per-client totals rebuilt from the event logs alone.
std::vector<ClientCosts> replay_costs(int n_clients, const std::vector<ComputeEvent>& compute,
                                      const std::vector<MessageEvent>& messages);

/// Throws InvariantError when the ledger disagrees with its logs.
void check_ledger(const CostLedger& ledger, const std::vector<MessageEvent>& messages);

struct BudgetSpec {
  double b_max = 0.0;  // bytes
  double c_max = 0.0;  // client FLOPs
  double a_max = 100.0;
  double t_scale = 8.0;
};

/// (A / a_max) * exp(-(B / b_max + C / c_max) / t_scale).
double c3_score(double accuracy_pct, double bytes, double client_flops, const BudgetSpec& budget);

/// One line of a results table, in bytes and FLOPs.
struct TableRow {
  std::string name;
  double accuracy = 0.0;
  double bytes = 0.0;
  double client_flops = 0.0;
  std::optional<double> reported_c3;
};

/// Reads name,accuracy,bandwidth_gb,client_tflops[,reported_c3] rows.
std::vector<TableRow> read_table_rows(const std::filesystem::path& path);

/// b_max and c_max set to the largest bandwidth and client compute in `rows`.
BudgetSpec budget_from_maxima(const std::vector<TableRow>& rows, double t_scale = 8.0);

struct TScaleFit {
  double t_scale = 0.0;
  double sse = 0.0;
  double max_residual = 0.0;
};

/// One table: its rows and the budget they are scored against.
struct ScoredTable {
  std::vector<TableRow> rows;
  BudgetSpec budget;
};

/// Least-squares t_scale against every row's reported_c3 (golden-section on [lo, hi]).
TScaleFit fit_t_scale(const std::vector<ScoredTable>& tables, double lo = 1.0, double hi = 50.0);

/// Residuals for a fixed t_scale.
TScaleFit score_residuals(const std::vector<ScoredTable>& tables, double t_scale);

/// Percentage of rows whose argmax matches the label.
double accuracy_pct(const Mat& logits, const Labels& labels);

enum class ModelKind { kSplitMasked, kSplit, kGlobal };

/// Whatever a protocol leaves behind for inference.
struct TrainedModels {
  ModelKind kind = ModelKind::kSplit;
  std::vector<DenseModel<double>> client_models;
  DenseModel<double> server;                // shared server model (split kinds)
  std::vector<std::vector<Mat>> masks;      // real-valued, kSplitMasked only
  DenseModel<double> global;                // kGlobal only
};

struct AccuracyReport {
  std::vector<double> per_client;
  double mean = 0.0;
  /// kSplitMasked: client i through every other client's binary mask, averaged over j.
  std::vector<double> cross_mask;
  double cross_mask_mean = 0.0;
  std::vector<double> mask_sparsity;
  double mean_mask_sparsity = 0.0;
};

AccuracyReport evaluate_accuracy(const TrainedModels& models, const std::vector<Shard>& test,
                                 double mask_threshold);

}  // namespace adasplit
