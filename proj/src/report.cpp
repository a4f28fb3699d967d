#include "adasplit/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace adasplit {
namespace {

void dump(const Json& j, int indent, std::string& out) {
  const std::string pad(std::size_t(indent) * 2, ' ');
  const std::string inner(std::size_t(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(it.key()).dump() + ": ";
        dump(it.value(), indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      bool scalars = std::all_of(j.begin(), j.end(), [](const Json& v) { return v.is_primitive(); });
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += scalars ? ", " : ",";
        first = false;
        if (!scalars) out += "\n" + inner;
        dump(v, indent + 1, out);
      }
      out += scalars ? "]" : "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

std::string dump_json(const Json& j) {
  std::string out;
  dump(j, 0, out);
  out += "\n";
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / double(values.size() - 1));
  }
  return s;
}

Aggregate aggregate(const std::vector<RunResult>& runs) {
  Aggregate a;
  if (runs.empty()) return a;
  std::vector<double> acc;
  const double n = double(runs.size());
  for (const auto& r : runs) {
    acc.push_back(r.accuracy.mean);
    const auto c1 = compute_c1(r.ledger);
    a.bytes += double(compute_c2(r.ledger)) / n;
    a.client_flops += double(c1.client) / n;
    a.total_flops += double(c1.total) / n;
    a.mask_sparsity += r.accuracy.mean_mask_sparsity / n;
    a.cross_mask_accuracy += r.accuracy.cross_mask_mean / n;
    a.mean_abs_activation += r.mean_abs_activation / n;
  }
  a.accuracy = summarize(acc);
  return a;
}

std::optional<BudgetSpec> configured_budget(const ExperimentConfig& cfg) {
  if (!(cfg.b_max > 0) || !(cfg.c_max > 0)) return std::nullopt;
  BudgetSpec b;
  b.b_max = cfg.b_max;
  b.c_max = cfg.c_max;
  b.t_scale = cfg.t_scale;
  return b;
}

Json run_to_json(const RunResult& run, const std::optional<BudgetSpec>& budget) {
  Json j;
  j["seed"] = run.config.seed;
  j["protocol"] = to_string(run.config.protocol);
  j["iters_per_round"] = run.iters_per_round;
  j["accuracy"] = {{"mean", run.accuracy.mean}, {"per_client", run.accuracy.per_client}};
  if (!run.accuracy.mask_sparsity.empty()) {
    j["accuracy"]["cross_mask_mean"] = run.accuracy.cross_mask_mean;
    j["accuracy"]["cross_mask_per_client"] = run.accuracy.cross_mask;
    j["mask_sparsity"] = {{"mean", run.accuracy.mean_mask_sparsity},
                          {"per_client", run.accuracy.mask_sparsity},
                          {"threshold", run.config.mask_threshold}};
  }
  const auto c1 = compute_c1(run.ledger);
  const auto c2 = compute_c2(run.ledger);
  j["c1"] = {{"total", c1.total}, {"client", c1.client}, {"server", c1.server}};
  j["c2"] = {{"total", c2}, {"up", run.ledger.total_bytes_up()}, {"down", run.ledger.total_bytes_down()}};
  Json per_client = Json::array();
  for (int i = 0; i < run.ledger.n_clients(); ++i) {
    const auto& c = run.ledger.client(i);
    per_client.push_back({{"client", i},
                          {"client_flops", c.client_flops},
                          {"server_flops", c.server_flops},
                          {"bytes_up", c.bytes_up},
                          {"bytes_down", c.bytes_down}});
  }
  j["per_client_costs"] = per_client;
  j["messages"] = run.messages.size();
  j["c3_score"] = budget ? Json(c3_score(run.accuracy.mean, double(c2), double(c1.client), *budget)) : Json(nullptr);
  j["mean_abs_activation"] = run.mean_abs_activation;
  j["skipped_steps"] = run.skipped_steps;
  Json rounds = Json::array();
  for (const auto& r : run.rounds) {
    rounds.push_back({{"round", r.round},
                      {"mean_client_loss", nullable(r.mean_client_loss)},
                      {"server_loss", nullable(r.server_loss)}});
  }
  j["rounds"] = rounds;
  return j;
}

Json result_json(const std::vector<RunResult>& runs, const std::optional<BudgetSpec>& budget) {
  Json j;
  if (runs.empty()) return j;
  Json cfg;
  for (const auto& [k, v] : config_entries(runs.front().config)) cfg[k] = v;
  j["config"] = cfg;
  const auto agg = aggregate(runs);
  Json summary;
  summary["seeds"] = runs.size();
  summary["accuracy_mean"] = agg.accuracy.mean;
  summary["accuracy_std"] = agg.accuracy.std;
  summary["bandwidth"] = agg.bytes;
  summary["client_flops"] = agg.client_flops;
  summary["total_flops"] = agg.total_flops;
  summary["mask_sparsity"] = agg.mask_sparsity;
  summary["mean_abs_activation"] = agg.mean_abs_activation;
  summary["c3_score"] =
      budget ? Json(c3_score(agg.accuracy.mean, agg.bytes, agg.client_flops, *budget)) : Json(nullptr);
  j["summary"] = summary;
  Json all = Json::array();
  for (const auto& r : runs) all.push_back(run_to_json(r, budget));
  j["runs"] = all;
  return j;
}

void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds) {
  out << "round,mean_client_loss,server_loss,bytes_cum,client_flops_cum,server_flops_cum\n";
  for (const auto& r : rounds) {
    out << r.round << ',' << format_double(r.mean_client_loss) << ',' << format_double(r.server_loss) << ','
        << r.bytes_cum << ',' << r.client_flops_cum << ',' << r.server_flops_cum << '\n';
  }
}

void write_events_log(std::ostream& out, const std::vector<MessageEvent>& messages) {
  out << "round,iter,direction,client,bytes\n";
  for (const auto& m : messages) {
    out << m.round << ',' << m.iter << ',' << to_string(m.direction) << ',' << m.client_id << ',' << m.bytes << '\n';
  }
}

void score_lines(std::vector<TableLine>& lines, const BudgetSpec& budget) {
  for (auto& l : lines) l.c3 = c3_score(l.stats.accuracy.mean, l.stats.bytes, l.stats.client_flops, budget);
}

void write_sweep_csv(std::ostream& out, const std::vector<TableLine>& lines) {
  out << "value,accuracy_mean,accuracy_std,bandwidth,client_flops,total_flops,c3_score,mask_sparsity,"
         "mean_abs_activation\n";
  for (const auto& l : lines) {
    const auto& s = l.stats;
    out << l.label << ',' << format_double(s.accuracy.mean) << ',' << format_double(s.accuracy.std) << ','
        << format_double(s.bytes) << ',' << format_double(s.client_flops) << ',' << format_double(s.total_flops)
        << ',' << format_double(l.c3) << ',' << format_double(s.mask_sparsity) << ','
        << format_double(s.mean_abs_activation) << '\n';
  }
}

void write_compare_csv(std::ostream& out, std::vector<TableLine> lines) {
  std::stable_sort(lines.begin(), lines.end(), [](const TableLine& a, const TableLine& b) { return a.c3 > b.c3; });
  out << "rank,name,protocol,accuracy_mean,accuracy_std,bandwidth,client_flops,total_flops,c3_score\n";
  int rank = 1;
  for (const auto& l : lines) {
    const auto& s = l.stats;
    out << rank++ << ',' << l.label << ',' << l.protocol << ',' << format_double(s.accuracy.mean) << ','
        << format_double(s.accuracy.std) << ',' << format_double(s.bytes) << ',' << format_double(s.client_flops)
        << ',' << format_double(s.total_flops) << ',' << format_double(l.c3) << '\n';
  }
}

void write_rows_csv(std::ostream& out, const std::vector<TableRow>& rows, const BudgetSpec& budget) {
  std::vector<std::pair<double, const TableRow*>> scored;
  for (const auto& r : rows) scored.emplace_back(c3_score(r.accuracy, r.bytes, r.client_flops, budget), &r);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  out << "rank,name,accuracy,bandwidth_gb,client_tflops,c3_score,reported_c3\n";
  int rank = 1;
  for (const auto& [c3, r] : scored) {
    out << rank++ << ',' << r->name << ',' << format_double(r->accuracy) << ','
        << format_double(r->bytes / kBytesPerGB) << ',' << format_double(r->client_flops / kFlopsPerTFlop) << ','
        << format_double(c3) << ',' << (r->reported_c3 ? format_double(*r->reported_c3) : "") << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace adasplit
