#pragma once

#include <random>
#include <vector>

#include "adasplit/cost_ledger.hpp"
#include "adasplit/datagen.hpp"
#include "adasplit/losses.hpp"
#include "adasplit/nn.hpp"

namespace adasplit {

enum class Phase { kLocal, kGlobal };

/// Split activations plus labels on their way to the server.
struct ActivationPacket {
  int client_id = 0;
  Mat activations;  // b x d
  Labels labels;
  ByteCount byte_size = 0;
};

/// 8 bytes per float64 activation and per int64 label.
ByteCount dense_payload_bytes(Eigen::Index rows, Eigen::Index cols);

/// Zero-run encoding: 8 bytes per kept value, 4 per run of zeros, 8 per label.
ByteCount sparse_payload_bytes(const Mat& activations);

struct LocalStepResult {
  double loss = 0.0;
  bool skipped = false;
};

struct ClientOptions {
  double lr = 1e-3;
  double beta = 0.0;  // L1 weight on split activations
  NtXentConfig nt_xent;
  /// Activations with |a| below this are dropped and packets are zero-run
  /// encoded. 0 keeps packets dense.
  double sparse_encode_threshold = 0.0;
};

/// One AdaSplit client: client model M^c, projector H and their optimizers.
/// Trains only on local tensors; nothing here accepts a server gradient.
class Client {
 public:
  Client(int id, Shard shard, DenseModel<double> model, DenseModel<double> projector, ClientOptions options,
         std::mt19937_64 rng);

  int id() const { return id_; }
  Phase phase() const { return phase_; }
  void set_phase(Phase phase) { phase_ = phase; }

  const Shard& shard() const { return shard_; }
  const DenseModel<double>& model() const { return model_; }
  const DenseModel<double>& projector() const { return projector_; }
  const ClientOptions& options() const { return options_; }
  int skipped_steps() const { return skipped_steps_; }

  /// Next mini-batch from this client's own shuffled stream.
  Batch draw_batch(int batch_size) { return sampler_.next(shard_, batch_size); }

  /// L_client step: supervised NT-Xent on H(M^c(x)) plus beta * |M^c(x)|_1.
  LocalStepResult local_step(const Batch& batch, CostLedger& ledger);

  /// Forward through M^c only. Requires the global phase; never updates the model.
  ActivationPacket emit_activations(const Batch& batch, CostLedger& ledger) const;

 private:
  int id_;
  Shard shard_;
  DenseModel<double> model_;
  DenseModel<double> projector_;
  AdamState<double> model_opt_;
  AdamState<double> projector_opt_;
  ClientOptions options_;
  BatchSampler sampler_;
  Phase phase_ = Phase::kLocal;
  int skipped_steps_ = 0;
};

}  // namespace adasplit
