#pragma once

#include <map>
#include <vector>

#include "adasplit/client.hpp"
#include "adasplit/cost_ledger.hpp"
#include "adasplit/nn.hpp"

namespace adasplit {

/// Thresholded per-client mask used at inference.
struct BinaryMask {
  std::vector<Mat> weights;  // entries in {0, 1}
  double threshold = 0.0;
  double sparsity = 0.0;     // fraction of zeros over all weight entries
};

/// Entry = 1 iff |m| >= threshold.
BinaryMask binarize(const std::vector<Mat>& weight_masks, double threshold);

struct ServerOptions {
  double lr = 1e-3;
  double mask_lr = 0.05;
  double lambda = 1e-3;
  bool freeze_masks = false;
  /// Project masks onto [0, 1] after every update.
  bool clip_masks = true;
};

/// Gradients of L_server = CE + lambda * sum|m| w.r.t. shared weights,
/// biases and the client's mask, evaluated without touching any state.
struct MaskedGradients {
  double ce_loss = 0.0;
  double total_loss = 0.0;
  std::vector<Mat> weight_grads;  // m (.) g_eff
  std::vector<Mat> bias_grads;
  std::vector<Mat> mask_grads;    // theta (.) g_eff + lambda * sign(m)
  Mat input_grad;
};

/// Shared server model theta plus one real-valued multiplicative mask per
/// client over the weight matrices (biases are never masked). Each global
/// step touches theta and the sending client's mask only.
class Server {
 public:
  Server(DenseModel<double> shared, const std::vector<int>& client_ids, ServerOptions options);

  const DenseModel<double>& shared() const { return shared_; }
  const ServerOptions& options() const { return options_; }
  bool has_client(int client_id) const { return masks_.count(client_id) != 0; }

  const std::vector<Mat>& mask(int client_id) const;
  void set_mask(int client_id, std::vector<Mat> weights);

  /// Forward through theta (.) m_client.
  Mat masked_forward(int client_id, const Mat& acts, CostLedger* ledger = nullptr) const;

  MaskedGradients compute_gradients(int client_id, const Mat& acts, const Labels& labels) const;

  /// One Adam step on theta and on m_client; returns the cross-entropy term.
  double global_step(const ActivationPacket& packet, CostLedger& ledger);

  BinaryMask binarize_mask(int client_id, double threshold) const;

  /// Logits through theta (.) binary mask.
  Mat predict(const BinaryMask& mask, const Mat& acts) const;

  /// theta with its weight matrices multiplied by `weight_masks`.
  DenseModel<double> effective_model(const std::vector<Mat>& weight_masks) const;

 private:
  const std::vector<Mat>& checked_mask(int client_id) const;

  DenseModel<double> shared_;
  AdamState<double> shared_opt_;
  std::map<int, std::vector<Mat>> masks_;
  std::map<int, AdamState<double>> mask_opts_;
  ServerOptions options_;
};

}  // namespace adasplit
