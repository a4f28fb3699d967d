#pragma once

// Minimal dense feed-forward engine: layers, forward/backward, Adam and FLOP
// accounting. Everything is templated on the scalar type; the protocol code
// instantiates it with double.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adasplit/errors.hpp"

namespace adasplit {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mat = Matrix<double>;
using Labels = std::vector<int>;
using FlopCount = std::uint64_t;

enum class Activation { kRelu, kIdentity };

enum class Pass { kForward, kForwardBackward };

/// FLOP conventions used by every cost figure in the project.
///
/// A dense layer costs 2*in*out per row forward and twice that backward
/// (weight gradient plus input gradient). Relu costs one FLOP per element in
/// each direction; identity is free. Bias adds are not counted.
struct FlopPolicy {
  static constexpr FlopCount kDenseFactor = 2;
  static constexpr FlopCount kBackwardMultiplier = 2;
  static constexpr FlopCount kActivationPerElement = 1;

  static constexpr FlopCount dense_forward(FlopCount in, FlopCount out, FlopCount rows) {
    return kDenseFactor * in * out * rows;
  }
  static constexpr FlopCount dense_backward(FlopCount in, FlopCount out, FlopCount rows) {
    return kBackwardMultiplier * dense_forward(in, out, rows);
  }
  static constexpr FlopCount activation(Activation act, FlopCount elements) {
    return act == Activation::kRelu ? kActivationPerElement * elements : 0;
  }
};

template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weights;  // in x out
  Matrix<Scalar> bias;     // 1 x out
  Activation activation = Activation::kIdentity;
  Matrix<Scalar> weight_grad;
  Matrix<Scalar> bias_grad;

  Eigen::Index in() const { return weights.rows(); }
  Eigen::Index out() const { return weights.cols(); }
};

template <typename Scalar>
bool all_finite(const Matrix<Scalar>& m) {
  return m.allFinite();
}

template <typename Scalar>
class DenseModel;
template <typename Scalar>
struct ForwardCache;

template <typename Scalar>
Matrix<Scalar> backward(DenseModel<Scalar>& model, const ForwardCache<Scalar>& cache,
                        const Matrix<Scalar>& output_grad, FlopCount* flops = nullptr);

template <typename Scalar>
class DenseModel {
 public:
  using Layer = DenseLayer<Scalar>;

  DenseModel() = default;

  explicit DenseModel(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& l = layers_[i];
      if (l.bias.rows() != 1 || l.bias.cols() != l.out()) {
        throw DimensionError("layer " + std::to_string(i) + ": bias must be 1 x " +
                             std::to_string(l.out()));
      }
      if (i > 0 && layers_[i - 1].out() != l.in()) {
        throw DimensionError("layer " + std::to_string(i) + ": input size " +
                             std::to_string(l.in()) + " does not match previous output " +
                             std::to_string(layers_[i - 1].out()));
      }
      l.weight_grad = Matrix<Scalar>::Zero(l.in(), l.out());
      l.bias_grad = Matrix<Scalar>::Zero(1, l.out());
    }
  }

  /// He-uniform weights, zero biases. `sizes` lists in, hidden..., out.
  static DenseModel random(std::span<const int> sizes, Activation hidden, Activation last,
                           std::mt19937_64& rng) {
    if (sizes.size() < 2) throw DimensionError("a model needs at least an input and output size");
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const int in = sizes[i];
      const int out = sizes[i + 1];
      if (in <= 0 || out <= 0) throw DimensionError("layer sizes must be positive");
      const Scalar bound = std::sqrt(Scalar(6) / Scalar(in));
      std::uniform_real_distribution<double> dist(-double(bound), double(bound));
      Layer l;
      l.weights.resize(in, out);
      for (Eigen::Index r = 0; r < in; ++r)
        for (Eigen::Index c = 0; c < out; ++c) l.weights(r, c) = Scalar(dist(rng));
      l.bias = Matrix<Scalar>::Zero(1, out);
      l.activation = (i + 2 == sizes.size()) ? last : hidden;
      layers.push_back(std::move(l));
    }
    return DenseModel(std::move(layers));
  }

  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }

  /// Mutable access invalidates outstanding forward caches.
  Layer& mutable_layer(std::size_t i) {
    ++version_;
    return layers_.at(i);
  }

  Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().in(); }
  Eigen::Index output_dim() const { return layers_.empty() ? 0 : layers_.back().out(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += std::size_t(l.weights.size() + l.bias.size());
    return n;
  }

  bool has_grads() const { return grads_ready_; }
  std::uint64_t version() const { return version_; }

  void zero_grad() {
    for (auto& l : layers_) {
      l.weight_grad.setZero();
      l.bias_grad.setZero();
    }
    grads_ready_ = false;
  }

  /// Parameter blocks in canonical order: W0, b0, W1, b1, ...
  std::vector<Matrix<Scalar>*> parameters() {
    ++version_;
    std::vector<Matrix<Scalar>*> out;
    for (auto& l : layers_) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const Matrix<Scalar>*> parameters() const {
    std::vector<const Matrix<Scalar>*> out;
    for (const auto& l : layers_) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const Matrix<Scalar>*> gradients() const {
    std::vector<const Matrix<Scalar>*> out;
    for (const auto& l : layers_) {
      out.push_back(&l.weight_grad);
      out.push_back(&l.bias_grad);
    }
    return out;
  }

  /// Layers [first, last) as a standalone model (grads reset).
  DenseModel slice(std::size_t first, std::size_t last) const {
    std::vector<Layer> sub(layers_.begin() + long(first), layers_.begin() + long(last));
    return DenseModel(std::move(sub));
  }

  /// Appends `tail`'s layers after this model's layers.
  static DenseModel stack(const DenseModel& head, const DenseModel& tail) {
    std::vector<Layer> all = head.layers_;
    all.insert(all.end(), tail.layers_.begin(), tail.layers_.end());
    return DenseModel(std::move(all));
  }

 private:
  friend Matrix<Scalar> backward<Scalar>(DenseModel<Scalar>&, const ForwardCache<Scalar>&,
                                         const Matrix<Scalar>&, FlopCount*);

  std::vector<Layer> layers_;
  std::uint64_t version_ = 0;
  bool grads_ready_ = false;
};

/// Everything backward needs from a forward pass.
template <typename Scalar>
struct ForwardCache {
  const void* owner = nullptr;
  std::uint64_t version = 0;
  std::vector<Matrix<Scalar>> inputs;       // per layer input
  std::vector<Matrix<Scalar>> pre_activations;
};

template <typename Scalar>
struct ForwardResult {
  Matrix<Scalar> output;
  ForwardCache<Scalar> cache;
};

template <typename Scalar>
Matrix<Scalar> apply_activation(Activation act, const Matrix<Scalar>& z) {
  if (act == Activation::kRelu) return z.cwiseMax(Scalar(0));
  return z;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const DenseModel<Scalar>& model, const Matrix<Scalar>& batch,
                              FlopCount* flops = nullptr) {
  ForwardResult<Scalar> result;
  result.cache.owner = &model;
  result.cache.version = model.version();
  Matrix<Scalar> x = batch;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const auto& l = model.layer(i);
    if (x.cols() != l.in()) {
      throw DimensionError("layer " + std::to_string(i) + ": expected " + std::to_string(l.in()) +
                           " input columns, got " + std::to_string(x.cols()));
    }
    Matrix<Scalar> z = x * l.weights;
    z.rowwise() += l.bias.row(0);
    if (flops) {
      *flops += FlopPolicy::dense_forward(FlopCount(l.in()), FlopCount(l.out()), FlopCount(x.rows())) +
                FlopPolicy::activation(l.activation, FlopCount(z.size()));
    }
    result.cache.inputs.push_back(std::move(x));
    x = apply_activation(l.activation, z);
    result.cache.pre_activations.push_back(std::move(z));
  }
  result.output = std::move(x);
  return result;
}

/// Populates parameter gradients (overwriting) and returns d(loss)/d(batch).
template <typename Scalar>
Matrix<Scalar> backward(DenseModel<Scalar>& model, const ForwardCache<Scalar>& cache,
                        const Matrix<Scalar>& output_grad, FlopCount* flops) {
  if (cache.owner != &model || cache.version != model.version() ||
      cache.inputs.size() != model.num_layers()) {
    throw ContractError("backward: forward cache does not belong to this model state");
  }
  if (model.num_layers() == 0) return output_grad;
  const auto& last = cache.pre_activations.back();
  if (output_grad.rows() != last.rows() || output_grad.cols() != last.cols()) {
    throw DimensionError("backward: output gradient is " + std::to_string(output_grad.rows()) + "x" +
                         std::to_string(output_grad.cols()) + ", forward output was " +
                         std::to_string(last.rows()) + "x" + std::to_string(last.cols()));
  }
  Matrix<Scalar> g = output_grad;
  for (std::size_t k = model.num_layers(); k-- > 0;) {
    auto& l = model.layers_[k];
    const auto& z = cache.pre_activations[k];
    if (l.activation == Activation::kRelu) {
      g = g.cwiseProduct((z.array() > Scalar(0)).template cast<Scalar>().matrix());
    }
    l.weight_grad.noalias() = cache.inputs[k].transpose() * g;
    l.bias_grad = g.colwise().sum();
    Matrix<Scalar> next = g * l.weights.transpose();
    if (flops) {
      *flops += FlopPolicy::dense_backward(FlopCount(l.in()), FlopCount(l.out()), FlopCount(g.rows())) +
                FlopPolicy::activation(l.activation, FlopCount(g.size()));
    }
    g = std::move(next);
  }
  model.grads_ready_ = true;
  return g;
}

template <typename Scalar>
FlopCount count_flops(const DenseModel<Scalar>& model, FlopCount batch_rows, Pass pass) {
  FlopCount total = 0;
  for (const auto& l : model.layers()) {
    const FlopCount in = FlopCount(l.in()), out = FlopCount(l.out());
    const FlopCount act = FlopPolicy::activation(l.activation, out * batch_rows);
    total += FlopPolicy::dense_forward(in, out, batch_rows) + act;
    if (pass == Pass::kForwardBackward) total += FlopPolicy::dense_backward(in, out, batch_rows) + act;
  }
  return total;
}

/// Adam hyper-parameters plus per-block moment accumulators.
template <typename Scalar>
struct AdamState {
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  std::vector<Matrix<Scalar>> first_moment;
  std::vector<Matrix<Scalar>> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(Scalar learning_rate) : lr(learning_rate) {}
};

/// One Adam update over explicit parameter blocks. `masks`, when non-empty,
/// multiplies each gradient elementwise before the moment updates.
template <typename Scalar>
void adam_update(std::span<Matrix<Scalar>* const> params, std::span<const Matrix<Scalar>* const> grads,
                 AdamState<Scalar>& opt, std::span<const Matrix<Scalar>* const> masks = {}) {
  if (params.size() != grads.size() || (!masks.empty() && masks.size() != params.size())) {
    throw DimensionError("adam: parameter, gradient and mask block counts differ");
  }
  if (opt.first_moment.empty()) {
    for (const auto* p : params) {
      opt.first_moment.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
      opt.second_moment.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
    }
  }
  if (opt.first_moment.size() != params.size()) {
    throw ContractError("adam: optimizer state was built for a different parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (grads[i]->rows() != p.rows() || grads[i]->cols() != p.cols() ||
        opt.first_moment[i].rows() != p.rows() || opt.first_moment[i].cols() != p.cols() ||
        (!masks.empty() && (masks[i]->rows() != p.rows() || masks[i]->cols() != p.cols()))) {
      throw DimensionError("adam: block " + std::to_string(i) + " shape mismatch");
    }
  }
  ++opt.step;
  const Scalar bc1 = Scalar(1) - std::pow(opt.beta1, Scalar(opt.step));
  const Scalar bc2 = Scalar(1) - std::pow(opt.beta2, Scalar(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix<Scalar> g = masks.empty() ? *grads[i] : Matrix<Scalar>(grads[i]->cwiseProduct(*masks[i]));
    auto& m = opt.first_moment[i];
    auto& v = opt.second_moment[i];
    m = opt.beta1 * m + (Scalar(1) - opt.beta1) * g;
    v = opt.beta2 * v + (Scalar(1) - opt.beta2) * g.cwiseAbs2();
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    params[i]->array() -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
  }
}

/// Per-parameter multiplicative mask, same block order as DenseModel::parameters().
template <typename Scalar>
using ParamMask = std::vector<Matrix<Scalar>>;

template <typename Scalar>
ParamMask<Scalar> ones_like(const DenseModel<Scalar>& model) {
  ParamMask<Scalar> mask;
  for (const auto* p : model.parameters()) mask.push_back(Matrix<Scalar>::Ones(p->rows(), p->cols()));
  return mask;
}

template <typename Scalar>
void optimizer_step(DenseModel<Scalar>& model, AdamState<Scalar>& opt,
                    const ParamMask<Scalar>* mask = nullptr) {
  if (!model.has_grads()) throw ContractError("optimizer_step: gradients were not populated");
  auto grads = model.gradients();
  auto params = model.parameters();
  std::vector<const Matrix<Scalar>*> mask_ptrs;
  if (mask) {
    if (mask->size() != params.size()) throw DimensionError("optimizer_step: mask block count mismatch");
    for (const auto& m : *mask) mask_ptrs.push_back(&m);
  }
  adam_update<Scalar>(params, grads, opt, mask_ptrs);
}

}  // namespace adasplit
