#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "adasplit/nn.hpp"

namespace adasplit {

template <typename Scalar>
struct LossResult {
  Scalar loss = Scalar(0);
  Matrix<Scalar> grad;
};

struct NtXentConfig {
  double tau = 0.07;
  bool normalize_embeddings = true;
};

namespace detail {

template <typename Scalar>
void require_finite(const Matrix<Scalar>& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite input");
}

template <typename Scalar>
void require_label_count(const Matrix<Scalar>& m, const Labels& labels, const char* what) {
  if (Eigen::Index(labels.size()) != m.rows()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m.rows()) + " rows");
  }
}

}  // namespace detail

/// Supervised NT-Xent summed over anchors and their same-label positives:
///
///   sum_i sum_{p in P(i)} -log( exp(z_i.z_p / tau) / sum_{j != i} exp(z_i.z_j / tau) )
///
/// z are the L2-normalized rows when cfg.normalize_embeddings is set; the
/// returned gradient is with respect to the raw (pre-normalization) rows.
/// Anchors without positives contribute nothing.
template <typename Scalar>
LossResult<Scalar> nt_xent_supervised(const Matrix<Scalar>& embeddings, const Labels& labels,
                                      const NtXentConfig& cfg = {}) {
  const Eigen::Index b = embeddings.rows();
  if (b < 2) throw DegenerateBatchError("nt_xent: batch needs at least 2 rows, got " + std::to_string(b));
  if (!(cfg.tau > 0)) throw InputError("nt_xent: tau must be positive");
  detail::require_label_count(embeddings, labels, "nt_xent");
  detail::require_finite(embeddings, "nt_xent");

  const Scalar tau = Scalar(cfg.tau);
  Matrix<Scalar> z = embeddings;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norms = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Ones(b);
  if (cfg.normalize_embeddings) {
    norms = embeddings.rowwise().norm().cwiseMax(Scalar(1e-12));
    for (Eigen::Index i = 0; i < b; ++i) z.row(i) /= norms(i);
  }

  const Matrix<Scalar> logits = (z * z.transpose()) / tau;

  // d loss / d sim(i, j), where sim = z_i . z_j
  Matrix<Scalar> dsim = Matrix<Scalar>::Zero(b, b);
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    int positives = 0;
    for (Eigen::Index j = 0; j < b; ++j)
      if (j != i && labels[std::size_t(j)] == labels[std::size_t(i)]) ++positives;
    if (positives == 0) continue;

    Scalar row_max = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < b; ++j)
      if (j != i) row_max = std::max(row_max, logits(i, j));
    Scalar denom = 0;
    for (Eigen::Index j = 0; j < b; ++j)
      if (j != i) denom += std::exp(logits(i, j) - row_max);
    const Scalar log_denom = row_max + std::log(denom);

    for (Eigen::Index j = 0; j < b; ++j) {
      if (j == i) continue;
      const Scalar softmax = std::exp(logits(i, j) - log_denom);
      const bool positive = labels[std::size_t(j)] == labels[std::size_t(i)];
      if (positive) loss += log_denom - logits(i, j);
      dsim(i, j) = (Scalar(positives) * softmax - (positive ? Scalar(1) : Scalar(0))) / tau;
    }
  }

  Matrix<Scalar> dz = dsim * z + dsim.transpose() * z;
  LossResult<Scalar> result;
  result.loss = loss;
  if (cfg.normalize_embeddings) {
    result.grad.resize(b, embeddings.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
      const Scalar radial = z.row(i).dot(dz.row(i));
      result.grad.row(i) = (dz.row(i) - radial * z.row(i)) / norms(i);
    }
  } else {
    result.grad = std::move(dz);
  }
  return result;
}

/// Mean softmax cross-entropy of the true class.
template <typename Scalar>
LossResult<Scalar> cross_entropy(const Matrix<Scalar>& logits, const Labels& labels) {
  detail::require_label_count(logits, labels, "cross_entropy");
  detail::require_finite(logits, "cross_entropy");
  const Eigen::Index b = logits.rows();
  const Eigen::Index k = logits.cols();
  if (b == 0) throw DegenerateBatchError("cross_entropy: empty batch");
  LossResult<Scalar> result;
  result.grad.resize(b, k);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int y = labels[std::size_t(i)];
    if (y < 0 || y >= k) {
      throw InputError("cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    }
    const Scalar row_max = logits.row(i).maxCoeff();
    const Scalar lse = row_max + std::log((logits.row(i).array() - row_max).exp().sum());
    total += lse - logits(i, y);
    result.grad.row(i) = (logits.row(i).array() - lse).exp().matrix();
    result.grad(i, y) -= Scalar(1);
  }
  result.loss = total / Scalar(b);
  result.grad /= Scalar(b);
  return result;
}

/// coeff * sum |v| with subgradient coeff * sign(v), sign(0) = 0.
template <typename Scalar>
LossResult<Scalar> l1_penalty(const Matrix<Scalar>& values, double coeff) {
  if (coeff < 0) throw InputError("l1_penalty: coefficient must be nonnegative");
  LossResult<Scalar> result;
  result.loss = Scalar(coeff) * values.cwiseAbs().sum();
  result.grad = Scalar(coeff) * values.unaryExpr([](Scalar v) {
    return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
  });
  return result;
}

}  // namespace adasplit
