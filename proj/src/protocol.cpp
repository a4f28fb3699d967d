#include "adasplit/protocol.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "adasplit/client.hpp"
#include "adasplit/losses.hpp"
#include "adasplit/orchestrator.hpp"
#include "adasplit/server.hpp"

namespace adasplit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Client state for the protocols that train with cross-entropy only.
struct PlainClient {
  DenseModel<double> model;
  AdamState<double> opt;
  BatchSampler sampler;
};

std::vector<PlainClient> make_plain_clients(const ExperimentConfig& cfg, const FederatedData& data,
                                            const std::vector<DenseModel<double>>& models) {
  std::vector<PlainClient> out;
  for (int i = 0; i < cfg.n_clients; ++i) {
    const auto& shard = data.train[std::size_t(i)];
    out.push_back({models[std::size_t(i)], AdamState<double>(cfg.lr),
                   BatchSampler(shard, make_stream(cfg.seed, std::uint64_t(i), kBatchStream))});
  }
  return out;
}

class RoundAccumulator {
 public:
  void client_loss(double v) { client_.push_back(v); }
  void server_loss(double v) { server_.push_back(v); }

  RoundMetrics close(int round, const CostLedger& ledger) {
    RoundMetrics m;
    m.round = round;
    m.mean_client_loss = mean(client_);
    m.server_loss = mean(server_);
    m.bytes_cum = ledger.total_bytes_up() + ledger.total_bytes_down();
    m.client_flops_cum = ledger.total_client_flops();
    m.server_flops_cum = ledger.total_server_flops();
    client_.clear();
    server_.clear();
    return m;
  }

 private:
  static double mean(const std::vector<double>& v) {
    if (v.empty()) return kNaN;
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
  }
  std::vector<double> client_;
  std::vector<double> server_;
};

ByteCount model_bytes(const DenseModel<double>& m) { return ByteCount(8) * ByteCount(m.param_count()); }

double mean_abs_activation(const std::vector<DenseModel<double>>& client_models, const FederatedData& data) {
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < client_models.size(); ++i) {
    if (data.train[i].size() == 0) continue;
    const Mat a = forward(client_models[i], data.train[i].features).output;
    sum += a.cwiseAbs().sum();
    count += double(a.size());
  }
  return count == 0 ? 0.0 : sum / count;
}

void check_shard_count(const ExperimentConfig& cfg, const FederatedData& data) {
  if (int(data.train.size()) != cfg.n_clients || int(data.test.size()) != cfg.n_clients) {
    throw ConfigError(fmt::format("n_clients is {} but the data has {} client shards", cfg.n_clients,
                                  data.train.size()));
  }
}

void finish(RunResult& result, const FederatedData& data, const SimNetwork& net) {
  result.messages = net.log();
  check_ledger(result.ledger, result.messages);
  result.accuracy = evaluate_accuracy(result.models, data.test, result.config.mask_threshold);
  if (result.models.kind != ModelKind::kGlobal) {
    result.mean_abs_activation = mean_abs_activation(result.models.client_models, data);
  }
}

/// SL-basic and SplitFed share everything except the end-of-round averaging.
RunResult run_split(const ExperimentConfig& cfg, const FederatedData& data, bool average_clients) {
  check_shard_count(cfg, data);
  RunResult result;
  result.config = cfg;
  result.iters_per_round = iterations_per_round(cfg, data);
  result.ledger = CostLedger(cfg.n_clients);
  SimNetwork net(result.ledger);

  std::vector<DenseModel<double>> init;
  for (int i = 0; i < cfg.n_clients; ++i) init.push_back(make_client_model(cfg, i, data.dim, data.n_classes));
  auto clients = make_plain_clients(cfg, data, init);
  DenseModel<double> server = make_server_model(cfg, data.dim, data.n_classes);
  AdamState<double> server_opt(cfg.lr);

  const int T = result.iters_per_round;
  for (int r = 0; r < cfg.rounds; ++r) {
    RoundAccumulator acc;
    for (int i = 0; i < cfg.n_clients; ++i) {
      auto& c = clients[std::size_t(i)];
      for (int t = 0; t < T; ++t) {
        result.ledger.set_clock(r, t);
        const Batch batch = c.sampler.next(data.train[std::size_t(i)], cfg.batch_size);
        FlopCount client_flops = 0;
        FlopCount server_flops = 0;
        auto client_fwd = forward(c.model, batch.x, &client_flops);
        const Mat& a = client_fwd.output;
        net.send(Direction::kClientToServer, i, dense_payload_bytes(a.rows(), a.cols()));

        auto server_fwd = forward(server, a, &server_flops);
        auto ce = cross_entropy(server_fwd.output, batch.y);
        Mat act_grad = backward(server, server_fwd.cache, ce.grad, &server_flops);
        optimizer_step(server, server_opt);
        net.send(Direction::kServerToClient, i, ByteCount(8) * ByteCount(act_grad.size()));

        backward(c.model, client_fwd.cache, act_grad, &client_flops);
        optimizer_step(c.model, c.opt);

        result.ledger.charge_compute(Party::kClient, i, client_flops);
        result.ledger.charge_compute(Party::kServer, i, server_flops);
        if (!std::isfinite(ce.loss)) throw InvariantError("split training: non-finite loss");
        acc.server_loss(ce.loss);
      }
    }
    if (average_clients) {
      result.ledger.set_clock(r, T - 1);
      std::vector<DenseModel<double>> models;
      for (auto& c : clients) models.push_back(c.model);
      const std::vector<double> weights(clients.size(), 1.0 / double(clients.size()));
      const auto avg = average_models(models, weights);
      const ByteCount bytes = model_bytes(avg);
      for (int i = 0; i < cfg.n_clients; ++i) net.send(Direction::kClientToServer, i, bytes);
      for (int i = 0; i < cfg.n_clients; ++i) {
        net.send(Direction::kServerToClient, i, bytes);
        clients[std::size_t(i)].model = avg;
      }
    }
    result.rounds.push_back(acc.close(r, result.ledger));
  }

  result.models.kind = ModelKind::kSplit;
  for (auto& c : clients) result.models.client_models.push_back(c.model);
  result.models.server = server;
  finish(result, data, net);
  return result;
}

}  // namespace

FederatedData make_data(const ExperimentConfig& cfg) {
  FederatedData data = cfg.data_csv.empty() ? generate_mixed(cfg.data, cfg.n_clients) : import_csv(cfg.data_csv);
  for (const auto* split : {&data.train, &data.test}) {
    for (std::size_t i = 0; i < split->size(); ++i) {
      if (!(*split)[i].features.allFinite()) {
        throw InvariantError(fmt::format("client {} data contains a non-finite feature", i));
      }
    }
  }
  return data;
}

int iterations_per_round(const ExperimentConfig& cfg, const FederatedData& data) {
  if (cfg.iters_per_round > 0) return cfg.iters_per_round;
  Eigen::Index largest = 0;
  for (const auto& s : data.train) largest = std::max(largest, s.size());
  const auto b = Eigen::Index(cfg.batch_size);
  return std::max(1, int((largest + b - 1) / b));
}

DenseModel<double> make_full_model(const ExperimentConfig& cfg, int input_dim, int n_classes,
                                   std::mt19937_64& rng) {
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(n_classes);
  return DenseModel<double>::random(sizes, Activation::kRelu, Activation::kIdentity, rng);
}

DenseModel<double> make_client_model(const ExperimentConfig& cfg, int client_id, int input_dim, int n_classes) {
  auto rng = make_stream(cfg.seed, std::uint64_t(client_id), kClientInitStream);
  return make_full_model(cfg, input_dim, n_classes, rng).slice(0, std::size_t(cfg.client_layers()));
}

DenseModel<double> make_server_model(const ExperimentConfig& cfg, int input_dim, int n_classes) {
  auto rng = make_stream(cfg.seed, 0, kServerInitStream);
  return make_full_model(cfg, input_dim, n_classes, rng)
      .slice(std::size_t(cfg.client_layers()), std::size_t(cfg.total_layers()));
}

DenseModel<double> make_projector(const ExperimentConfig& cfg, int client_id, int input_dim) {
  auto rng = make_stream(cfg.seed, std::uint64_t(client_id), kProjectorInitStream);
  const int sizes[] = {input_dim, cfg.projector_dim};
  return DenseModel<double>::random(sizes, Activation::kIdentity, Activation::kIdentity, rng);
}

DenseModel<double> average_models(const std::vector<DenseModel<double>>& models, const std::vector<double>& weights) {
  if (models.empty() || models.size() != weights.size()) {
    throw DimensionError("average_models: need one weight per model");
  }
  DenseModel<double> out = models.front();
  for (std::size_t l = 0; l < out.num_layers(); ++l) {
    auto& layer = out.mutable_layer(l);
    layer.weights.setZero();
    layer.bias.setZero();
  }
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& m = models[k];
    if (m.num_layers() != out.num_layers()) throw DimensionError("average_models: layer count mismatch");
    for (std::size_t l = 0; l < out.num_layers(); ++l) {
      const auto& src = m.layer(l);
      auto& dst = out.mutable_layer(l);
      if (src.in() != dst.in() || src.out() != dst.out()) {
        throw DimensionError(fmt::format("average_models: layer {} shape mismatch", l));
      }
      dst.weights += weights[k] * src.weights;
      dst.bias += weights[k] * src.bias;
    }
  }
  out.zero_grad();
  return out;
}

RunResult run_adasplit(const ExperimentConfig& cfg, const FederatedData& data) {
  check_shard_count(cfg, data);
  RunResult result;
  result.config = cfg;
  result.iters_per_round = iterations_per_round(cfg, data);
  result.ledger = CostLedger(cfg.n_clients);
  SimNetwork net(result.ledger);

  ClientOptions copts;
  copts.lr = cfg.lr;
  copts.beta = cfg.beta;
  copts.nt_xent.tau = cfg.tau;
  copts.sparse_encode_threshold = cfg.sparse_encode_threshold;
  std::vector<Client> clients;
  std::vector<int> ids;
  for (int i = 0; i < cfg.n_clients; ++i) {
    auto model = make_client_model(cfg, i, data.dim, data.n_classes);
    auto projector = make_projector(cfg, i, int(model.output_dim()));
    clients.emplace_back(i, data.train[std::size_t(i)], std::move(model), std::move(projector), copts,
                         make_stream(cfg.seed, std::uint64_t(i), kBatchStream));
    ids.push_back(i);
  }
  ServerOptions sopts;
  sopts.lr = cfg.lr;
  sopts.mask_lr = cfg.mask_lr;
  sopts.lambda = cfg.lambda;
  sopts.freeze_masks = cfg.freeze_masks;
  sopts.clip_masks = cfg.clip_masks;
  Server server(make_server_model(cfg, data.dim, data.n_classes), ids, sopts);
  BanditState bandit(cfg.n_clients, cfg.gamma, cfg.eta);

  const int T = result.iters_per_round;
  const int local_rounds = cfg.local_rounds();
  std::vector<Batch> batches(clients.size());
  for (int r = 0; r < cfg.rounds; ++r) {
    RoundAccumulator acc;
    const bool global = r >= local_rounds;
    if (global) {
      for (auto& c : clients) c.set_phase(Phase::kGlobal);
    }
    for (int t = 0; t < T; ++t) {
      result.ledger.set_clock(r, t);
      for (std::size_t i = 0; i < clients.size(); ++i) {
        batches[i] = clients[i].draw_batch(cfg.batch_size);
        const auto step = clients[i].local_step(batches[i], result.ledger);
        if (!step.skipped) acc.client_loss(step.loss);
      }
      if (!global) continue;
      const auto selected = bandit.select_clients(cfg.n_clients);
      std::map<int, double> observed;
      for (int id : selected) {
        const auto& c = clients[std::size_t(id)];
        const auto packet = c.emit_activations(batches[std::size_t(id)], result.ledger);
        net.send(Direction::kClientToServer, id, packet.byte_size);
        const double loss = server.global_step(packet, result.ledger);
        observed[id] = loss;
        acc.server_loss(loss);
      }
      bandit.record_iteration(selected, observed);
    }
    result.rounds.push_back(acc.close(r, result.ledger));
  }

  result.models.kind = ModelKind::kSplitMasked;
  for (const auto& c : clients) {
    result.models.client_models.push_back(c.model());
    result.models.masks.push_back(server.mask(c.id()));
    result.skipped_steps += c.skipped_steps();
  }
  result.models.server = server.shared();
  finish(result, data, net);
  return result;
}

RunResult run_sl_basic(const ExperimentConfig& cfg, const FederatedData& data) { return run_split(cfg, data, false); }

RunResult run_splitfed(const ExperimentConfig& cfg, const FederatedData& data) { return run_split(cfg, data, true); }

RunResult run_fedavg(const ExperimentConfig& cfg, const FederatedData& data) {
  check_shard_count(cfg, data);
  RunResult result;
  result.config = cfg;
  result.iters_per_round = iterations_per_round(cfg, data);
  result.ledger = CostLedger(cfg.n_clients);
  SimNetwork net(result.ledger);

  auto rng = make_stream(cfg.seed, 0, kGlobalInitStream);
  DenseModel<double> global = make_full_model(cfg, data.dim, data.n_classes, rng);
  auto clients = make_plain_clients(cfg, data, std::vector<DenseModel<double>>(std::size_t(cfg.n_clients), global));

  double total = 0.0;
  for (const auto& s : data.train) total += double(s.size());
  if (!(total > 0)) throw InvariantError("fedavg: all train shards are empty");
  std::vector<double> p;
  for (const auto& s : data.train) p.push_back(double(s.size()) / total);

  const int T = result.iters_per_round;
  const ByteCount bytes = model_bytes(global);
  for (int r = 0; r < cfg.rounds; ++r) {
    RoundAccumulator acc;
    for (int i = 0; i < cfg.n_clients; ++i) {
      auto& c = clients[std::size_t(i)];
      c.model = global;
      for (int t = 0; t < T; ++t) {
        result.ledger.set_clock(r, t);
        const Batch batch = c.sampler.next(data.train[std::size_t(i)], cfg.batch_size);
        FlopCount flops = 0;
        auto fwd = forward(c.model, batch.x, &flops);
        auto ce = cross_entropy(fwd.output, batch.y);
        backward(c.model, fwd.cache, ce.grad, &flops);
        optimizer_step(c.model, c.opt);
        result.ledger.charge_compute(Party::kClient, i, flops);
        if (!std::isfinite(ce.loss)) throw InvariantError("fedavg: non-finite loss");
        acc.client_loss(ce.loss);
      }
    }
    result.ledger.set_clock(r, T - 1);
    std::vector<DenseModel<double>> models;
    for (int i = 0; i < cfg.n_clients; ++i) {
      net.send(Direction::kClientToServer, i, bytes);
      models.push_back(clients[std::size_t(i)].model);
    }
    global = average_models(models, p);
    for (int i = 0; i < cfg.n_clients; ++i) net.send(Direction::kServerToClient, i, bytes);
    result.rounds.push_back(acc.close(r, result.ledger));
  }

  result.models.kind = ModelKind::kGlobal;
  result.models.global = global;
  finish(result, data, net);
  return result;
}

RunResult run_protocol(const ExperimentConfig& cfg) {
  cfg.validate();
  const FederatedData data = make_data(cfg);
  switch (cfg.protocol) {
    case ProtocolKind::kAdaSplit:
      return run_adasplit(cfg, data);
    case ProtocolKind::kSlBasic:
      return run_sl_basic(cfg, data);
    case ProtocolKind::kSplitFed:
      return run_splitfed(cfg, data);
    case ProtocolKind::kFedAvg:
      return run_fedavg(cfg, data);
  }
  throw ConfigError("unknown protocol");
}

ExperimentConfig with_seed(ExperimentConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.data.seed = seed;
  return cfg;
}

std::vector<RunResult> run_seeds(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunResult> out;
  for (int k = 0; k < cfg.seeds; ++k) out.push_back(run_protocol(with_seed(cfg, cfg.seed + std::uint64_t(k))));
  return out;
}

}  // namespace adasplit
