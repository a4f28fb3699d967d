#include "adasplit/client.hpp"

#include <cmath>

namespace adasplit {

ByteCount dense_payload_bytes(Eigen::Index rows, Eigen::Index cols) {
  return ByteCount(8) * ByteCount(rows * cols + rows);
}

ByteCount sparse_payload_bytes(const Mat& activations) {
  ByteCount bytes = 8 * ByteCount(activations.rows());
  bool in_zero_run = false;
  for (Eigen::Index i = 0; i < activations.size(); ++i) {
    const double v = activations.data()[i];
    if (v == 0.0) {
      if (!in_zero_run) bytes += 4;
      in_zero_run = true;
    } else {
      bytes += 8;
      in_zero_run = false;
    }
  }
  return bytes;
}

Client::Client(int id, Shard shard, DenseModel<double> model, DenseModel<double> projector,
               ClientOptions options, std::mt19937_64 rng)
    : id_(id),
      shard_(std::move(shard)),
      model_(std::move(model)),
      projector_(std::move(projector)),
      model_opt_(options.lr),
      projector_opt_(options.lr),
      options_(options),
      sampler_(shard_, std::move(rng)) {
  if (projector_.input_dim() != model_.output_dim()) {
    throw DimensionError("client " + std::to_string(id) + ": projector input " +
                         std::to_string(projector_.input_dim()) + " != model output " +
                         std::to_string(model_.output_dim()));
  }
  if (options_.beta < 0) throw ConfigError("beta must be nonnegative");
}

LocalStepResult Client::local_step(const Batch& batch, CostLedger& ledger) {
  if (batch.x.rows() < 2) {
    ++skipped_steps_;
    return {0.0, true};
  }
  FlopCount flops = 0;
  auto client_fwd = forward(model_, batch.x, &flops);
  auto proj_fwd = forward(projector_, client_fwd.output, &flops);

  auto contrastive = nt_xent_supervised(proj_fwd.output, batch.y, options_.nt_xent);
  auto sparsity = l1_penalty(client_fwd.output, options_.beta);

  Mat act_grad = backward(projector_, proj_fwd.cache, contrastive.grad, &flops);
  act_grad += sparsity.grad;
  backward(model_, client_fwd.cache, act_grad, &flops);

  optimizer_step(projector_, projector_opt_);
  optimizer_step(model_, model_opt_);
  ledger.charge_compute(Party::kClient, id_, flops);

  const double loss = contrastive.loss + sparsity.loss;
  if (!std::isfinite(loss)) throw InvariantError("client " + std::to_string(id_) + ": non-finite local loss");
  return {loss, false};
}

ActivationPacket Client::emit_activations(const Batch& batch, CostLedger& ledger) const {
  if (phase_ != Phase::kGlobal) {
    throw ProtocolError("client " + std::to_string(id_) + ": cannot emit activations in the local phase");
  }
  FlopCount flops = 0;
  ActivationPacket packet;
  packet.client_id = id_;
  packet.activations = forward(model_, batch.x, &flops).output;
  packet.labels = batch.y;
  if (options_.sparse_encode_threshold > 0) {
    const double t = options_.sparse_encode_threshold;
    packet.activations = packet.activations.unaryExpr([t](double v) { return std::abs(v) < t ? 0.0 : v; });
    packet.byte_size = sparse_payload_bytes(packet.activations);
  } else {
    packet.byte_size = dense_payload_bytes(packet.activations.rows(), packet.activations.cols());
  }
  ledger.charge_compute(Party::kClient, id_, flops);
  return packet;
}

}  // namespace adasplit
