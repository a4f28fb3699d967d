#include "adasplit/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "adasplit/server.hpp"

namespace adasplit {
namespace {

DenseModel<double> with_mask(const DenseModel<double>& shared, const std::vector<Mat>& weight_masks) {
  DenseModel<double> eff = shared;
  for (std::size_t i = 0; i < eff.num_layers(); ++i) {
    auto& l = eff.mutable_layer(i);
    l.weights = l.weights.cwiseProduct(weight_masks.at(i));
  }
  return eff;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

}  // namespace

C1Report compute_c1(const CostLedger& ledger) {
  C1Report r;
  r.client = ledger.total_client_flops();
  r.server = ledger.total_server_flops();
  r.total = r.client + r.server;
  return r;
}

ByteCount compute_c2(const CostLedger& ledger) { return ledger.total_bytes_up() + ledger.total_bytes_down(); }

std::vector<ClientCosts> replay_costs(int n_clients, const std::vector<ComputeEvent>& compute,
                                      const std::vector<MessageEvent>& messages) {
  std::vector<ClientCosts> out(std::size_t(std::max(n_clients, 0)));
  for (const auto& e : compute) {
    auto& c = out.at(std::size_t(e.client_id));
    (e.party == Party::kClient ? c.client_flops : c.server_flops) += e.flops;
  }
  for (const auto& m : messages) {
    auto& c = out.at(std::size_t(m.client_id));
    (m.direction == Direction::kClientToServer ? c.bytes_up : c.bytes_down) += m.bytes;
  }
  return out;
}

void check_ledger(const CostLedger& ledger, const std::vector<MessageEvent>& messages) {
  const auto replay = replay_costs(ledger.n_clients(), ledger.compute_log(), messages);
  for (int i = 0; i < ledger.n_clients(); ++i) {
    const auto& a = ledger.client(i);
    const auto& b = replay[std::size_t(i)];
    if (a.client_flops != b.client_flops || a.server_flops != b.server_flops || a.bytes_up != b.bytes_up ||
        a.bytes_down != b.bytes_down) {
      throw InvariantError(fmt::format("ledger for client {} disagrees with the event log", i));
    }
  }
}

double c3_score(double accuracy_pct, double bytes, double client_flops, const BudgetSpec& budget) {
  if (!(budget.b_max > 0) || !(budget.c_max > 0) || !(budget.a_max > 0) || !(budget.t_scale > 0)) {
    throw InputError("c3_score: budgets and t_scale must be positive");
  }
  if (bytes < 0 || client_flops < 0) throw InputError("c3_score: costs must be nonnegative");
  const double a = accuracy_pct / budget.a_max;
  return a * std::exp(-(bytes / budget.b_max + client_flops / budget.c_max) / budget.t_scale);
}

std::vector<TableRow> read_table_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::string line;
  std::vector<TableRow> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line_no == 1 && !cells.empty() && cells[0] == "name") continue;
    if (cells.size() != 4 && cells.size() != 5) {
      throw InputError(fmt::format("{}:{}: expected 4 or 5 columns", path.string(), line_no));
    }
    TableRow r;
    r.name = cells[0];
    try {
      r.accuracy = std::stod(cells[1]);
      r.bytes = std::stod(cells[2]) * kBytesPerGB;
      r.client_flops = std::stod(cells[3]) * kFlopsPerTFlop;
      if (cells.size() == 5 && !cells[4].empty()) r.reported_c3 = std::stod(cells[4]);
    } catch (const std::logic_error&) {
      throw InputError(fmt::format("{}:{}: malformed number", path.string(), line_no));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

BudgetSpec budget_from_maxima(const std::vector<TableRow>& rows, double t_scale) {
  BudgetSpec b;
  b.t_scale = t_scale;
  for (const auto& r : rows) {
    b.b_max = std::max(b.b_max, r.bytes);
    b.c_max = std::max(b.c_max, r.client_flops);
  }
  return b;
}

TScaleFit score_residuals(const std::vector<ScoredTable>& tables, double t_scale) {
  TScaleFit fit;
  fit.t_scale = t_scale;
  for (const auto& table : tables) {
    BudgetSpec b = table.budget;
    b.t_scale = t_scale;
    for (const auto& r : table.rows) {
      if (!r.reported_c3) continue;
      const double res = c3_score(r.accuracy, r.bytes, r.client_flops, b) - *r.reported_c3;
      fit.sse += res * res;
      fit.max_residual = std::max(fit.max_residual, std::abs(res));
    }
  }
  return fit;
}

TScaleFit fit_t_scale(const std::vector<ScoredTable>& tables, double lo, double hi) {
  if (!(lo > 0) || !(hi > lo)) throw InputError("fit_t_scale: need 0 < lo < hi");
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = score_residuals(tables, c).sse, fd = score_residuals(tables, d).sse;
  while (b - a > 1e-10) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = score_residuals(tables, c).sse;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = score_residuals(tables, d).sse;
    }
  }
  return score_residuals(tables, 0.5 * (a + b));
}

double accuracy_pct(const Mat& logits, const Labels& labels) {
  if (logits.rows() == 0) throw InputError("accuracy: empty test shard");
  if (std::size_t(logits.rows()) != labels.size()) throw DimensionError("accuracy: label count mismatch");
  int correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    if (int(arg) == labels[std::size_t(r)]) ++correct;
  }
  return 100.0 * double(correct) / double(logits.rows());
}

AccuracyReport evaluate_accuracy(const TrainedModels& models, const std::vector<Shard>& test,
                                 double mask_threshold) {
  AccuracyReport report;
  const std::size_t n = test.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (test[i].size() == 0) throw InputError(fmt::format("client {} has an empty test shard", i));
  }

  if (models.kind == ModelKind::kGlobal) {
    for (const auto& shard : test) {
      report.per_client.push_back(accuracy_pct(forward(models.global, shard.features).output, shard.labels));
    }
    report.mean = mean_of(report.per_client);
    return report;
  }

  if (models.client_models.size() != n) throw DimensionError("evaluate: client model count != test shard count");
  std::vector<Mat> acts;
  for (std::size_t i = 0; i < n; ++i) acts.push_back(forward(models.client_models[i], test[i].features).output);

  if (models.kind == ModelKind::kSplit) {
    for (std::size_t i = 0; i < n; ++i) {
      report.per_client.push_back(accuracy_pct(forward(models.server, acts[i]).output, test[i].labels));
    }
    report.mean = mean_of(report.per_client);
    return report;
  }

  if (models.masks.size() != n) throw DimensionError("evaluate: mask count != test shard count");
  std::vector<DenseModel<double>> eff;
  for (const auto& m : models.masks) {
    const auto binary = binarize(m, mask_threshold);
    report.mask_sparsity.push_back(binary.sparsity);
    eff.push_back(with_mask(models.server, binary.weights));
  }
  for (std::size_t i = 0; i < n; ++i) {
    report.per_client.push_back(accuracy_pct(forward(eff[i], acts[i]).output, test[i].labels));
    std::vector<double> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(accuracy_pct(forward(eff[j], acts[i]).output, test[i].labels));
    }
    report.cross_mask.push_back(others.empty() ? report.per_client.back() : mean_of(others));
  }
  report.mean = mean_of(report.per_client);
  report.cross_mask_mean = mean_of(report.cross_mask);
  report.mean_mask_sparsity = mean_of(report.mask_sparsity);
  return report;
}

}  // namespace adasplit
