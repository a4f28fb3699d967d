#include "adasplit/server.hpp"

#include "adasplit/losses.hpp"

namespace adasplit {

Server::Server(DenseModel<double> shared, const std::vector<int>& client_ids, ServerOptions options)
    : shared_(std::move(shared)), shared_opt_(options.lr), options_(options) {
  if (options_.lambda < 0) throw ConfigError("lambda must be nonnegative");
  for (int id : client_ids) {
    std::vector<Mat> m;
    for (const auto& l : shared_.layers()) m.push_back(Mat::Ones(l.in(), l.out()));
    masks_.emplace(id, std::move(m));
    mask_opts_.emplace(id, AdamState<double>(options_.mask_lr));
  }
}

const std::vector<Mat>& Server::checked_mask(int client_id) const {
  auto it = masks_.find(client_id);
  if (it == masks_.end()) throw RegistryError("server: unknown client " + std::to_string(client_id));
  return it->second;
}

const std::vector<Mat>& Server::mask(int client_id) const { return checked_mask(client_id); }

void Server::set_mask(int client_id, std::vector<Mat> weights) {
  const auto& old = checked_mask(client_id);
  if (weights.size() != old.size()) throw DimensionError("server: mask layer count mismatch");
  for (std::size_t i = 0; i < old.size(); ++i) {
    if (weights[i].rows() != old[i].rows() || weights[i].cols() != old[i].cols()) {
      throw DimensionError("server: mask shape mismatch at layer " + std::to_string(i));
    }
  }
  masks_[client_id] = std::move(weights);
}

DenseModel<double> Server::effective_model(const std::vector<Mat>& weight_masks) const {
  DenseModel<double> eff = shared_;
  for (std::size_t i = 0; i < eff.num_layers(); ++i) {
    auto& l = eff.mutable_layer(i);
    l.weights = l.weights.cwiseProduct(weight_masks.at(i));
  }
  return eff;
}

Mat Server::masked_forward(int client_id, const Mat& acts, CostLedger* ledger) const {
  const auto eff = effective_model(checked_mask(client_id));
  FlopCount flops = 0;
  Mat out = forward(eff, acts, &flops).output;
  if (ledger) ledger->charge_compute(Party::kServer, client_id, flops);
  return out;
}

MaskedGradients Server::compute_gradients(int client_id, const Mat& acts, const Labels& labels) const {
  const auto& m = checked_mask(client_id);
  auto eff = effective_model(m);
  auto fwd = forward(eff, acts);
  auto ce = cross_entropy(fwd.output, labels);
  MaskedGradients out;
  out.input_grad = backward(eff, fwd.cache, ce.grad);
  out.ce_loss = ce.loss;
  double l1 = 0.0;
  for (std::size_t i = 0; i < eff.num_layers(); ++i) {
    const auto& g_eff = eff.layer(i).weight_grad;
    const auto& theta = shared_.layer(i).weights;
    out.weight_grads.push_back(m[i].cwiseProduct(g_eff));
    out.bias_grads.push_back(eff.layer(i).bias_grad);
    auto penalty = l1_penalty(m[i], options_.lambda);
    l1 += penalty.loss;
    out.mask_grads.push_back(theta.cwiseProduct(g_eff) + penalty.grad);
  }
  out.total_loss = out.ce_loss + l1;
  return out;
}

double Server::global_step(const ActivationPacket& packet, CostLedger& ledger) {
  const auto& m = checked_mask(packet.client_id);
  if (packet.activations.cols() != shared_.input_dim()) {
    throw DimensionError("server: packet from client " + std::to_string(packet.client_id) + " has " +
                         std::to_string(packet.activations.cols()) + " columns, expected " +
                         std::to_string(shared_.input_dim()));
  }
  FlopCount flops = 0;
  auto eff = effective_model(m);
  auto fwd = forward(eff, packet.activations, &flops);
  auto ce = cross_entropy(fwd.output, packet.labels);
  backward(eff, fwd.cache, ce.grad, &flops);

  // theta update: the effective-weight gradient is masked by m inside Adam,
  // which is exactly d(CE)/d(theta) = m (.) g_eff.
  std::vector<const Mat*> grads;
  std::vector<const Mat*> update_masks;
  std::vector<Mat> bias_ones;
  bias_ones.reserve(shared_.num_layers());
  for (std::size_t i = 0; i < shared_.num_layers(); ++i) bias_ones.push_back(Mat::Ones(1, shared_.layer(i).out()));
  for (std::size_t i = 0; i < eff.num_layers(); ++i) {
    grads.push_back(&eff.layer(i).weight_grad);
    grads.push_back(&eff.layer(i).bias_grad);
    update_masks.push_back(&m[i]);
    update_masks.push_back(&bias_ones[i]);
  }

  std::vector<Mat> mask_grads;
  if (!options_.freeze_masks) {
    for (std::size_t i = 0; i < eff.num_layers(); ++i) {
      mask_grads.push_back(shared_.layer(i).weights.cwiseProduct(eff.layer(i).weight_grad) +
                           l1_penalty(m[i], options_.lambda).grad);
    }
  }

  adam_update<double>(shared_.parameters(), grads, shared_opt_, update_masks);

  if (!options_.freeze_masks) {
    auto& mask = masks_[packet.client_id];
    std::vector<Mat*> params;
    std::vector<const Mat*> g;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      params.push_back(&mask[i]);
      g.push_back(&mask_grads[i]);
    }
    adam_update<double>(params, g, mask_opts_.at(packet.client_id));
    if (options_.clip_masks) {
      for (auto& m_l : mask) m_l = m_l.cwiseMax(0.0).cwiseMin(1.0);
    }
  }

  ledger.charge_compute(Party::kServer, packet.client_id, flops);
  if (!std::isfinite(ce.loss)) throw InvariantError("server: non-finite loss");
  return ce.loss;
}

BinaryMask binarize(const std::vector<Mat>& weight_masks, double threshold) {
  if (!(threshold > 0)) throw InputError("binarize_mask: threshold must be positive");
  BinaryMask out;
  out.threshold = threshold;
  std::size_t zeros = 0, total = 0;
  for (const auto& m : weight_masks) {
    Mat b = m.unaryExpr([threshold](double v) { return std::abs(v) >= threshold ? 1.0 : 0.0; });
    zeros += std::size_t((b.array() == 0.0).count());
    total += std::size_t(b.size());
    out.weights.push_back(std::move(b));
  }
  out.sparsity = total == 0 ? 0.0 : double(zeros) / double(total);
  return out;
}

BinaryMask Server::binarize_mask(int client_id, double threshold) const {
  return binarize(checked_mask(client_id), threshold);
}

Mat Server::predict(const BinaryMask& mask, const Mat& acts) const {
  return forward(effective_model(mask.weights), acts).output;
}

}  // namespace adasplit
