#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adasplit/metrics.hpp"
#include "adasplit/protocol.hpp"

namespace adasplit {

using Json = nlohmann::ordered_json;

/// %.17g; "nan"/"inf" spelled out.
std::string format_double(double v);

/// Pretty JSON with every float printed to 17 significant digits (NaN/inf as null).
std::string dump_json(const Json& j);

/// Mean and sample standard deviation (n - 1; 0 for a single value).
struct Summary {
  double mean = 0.0;
  double std = 0.0;
};
Summary summarize(const std::vector<double>& values);

/// Multi-seed aggregate of one configuration.
struct Aggregate {
  Summary accuracy;
  double bytes = 0.0;         // C2, mean over seeds
  double client_flops = 0.0;  // C1 client part, mean over seeds
  double total_flops = 0.0;   // C1, mean over seeds
  double mask_sparsity = 0.0;
  double cross_mask_accuracy = 0.0;
  double mean_abs_activation = 0.0;
};
Aggregate aggregate(const std::vector<RunResult>& runs);

/// The budget configured on cfg, if both b_max and c_max are set.
std::optional<BudgetSpec> configured_budget(const ExperimentConfig& cfg);

Json run_to_json(const RunResult& run, const std::optional<BudgetSpec>& budget);
Json result_json(const std::vector<RunResult>& runs, const std::optional<BudgetSpec>& budget);

/// round,mean_client_loss,server_loss,bytes_cum,client_flops_cum,server_flops_cum
void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds);
/// round,iter,direction,client,bytes
void write_events_log(std::ostream& out, const std::vector<MessageEvent>& messages);

/// One row of a sweep or comparison table.
struct TableLine {
  std::string label;
  std::string protocol;
  Aggregate stats;
  double c3 = 0.0;
};

/// Scores every line against `budget`.
void score_lines(std::vector<TableLine>& lines, const BudgetSpec& budget);

/// value,accuracy_mean,accuracy_std,bandwidth,client_flops,total_flops,c3_score,mask_sparsity,mean_abs_activation
void write_sweep_csv(std::ostream& out, const std::vector<TableLine>& lines);

/// Sorted by c3 descending (ties by input order):
/// rank,name,protocol,accuracy_mean,accuracy_std,bandwidth,client_flops,total_flops,c3_score
void write_compare_csv(std::ostream& out, std::vector<TableLine> lines);

/// rank,name,accuracy,bandwidth_gb,client_tflops,c3_score,reported_c3
void write_rows_csv(std::ostream& out, const std::vector<TableRow>& rows, const BudgetSpec& budget);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace adasplit
