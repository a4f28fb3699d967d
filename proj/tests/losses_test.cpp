#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "adasplit/losses.hpp"
#include "test_util.hpp"

namespace adasplit {
namespace {

using testing::numeric_gradient;
using testing::random_matrix;
using testing::relative_error;

// Direct double loop over anchors and positives; no shared code with the library.
double nt_xent_oracle(const Mat& e, const Labels& y, double tau, bool normalize) {
  Mat z = e;
  if (normalize)
    for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) /= z.row(i).norm();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double denom = 0.0;
    for (Eigen::Index j = 0; j < z.rows(); ++j)
      if (j != i) denom += std::exp(z.row(i).dot(z.row(j)) / tau);
    for (Eigen::Index p = 0; p < z.rows(); ++p) {
      if (p == i || y[std::size_t(p)] != y[std::size_t(i)]) continue;
      loss -= std::log(std::exp(z.row(i).dot(z.row(p)) / tau) / denom);
    }
  }
  return loss;
}

Labels random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, classes - 1);
  Labels y(n);
  for (auto& v : y) v = pick(rng);
  return y;
}

TEST(NtXent, TwoIdenticalPositivesHaveZeroLoss) {
  // With one other row the softmax over j != i is a single term.
  Mat e(2, 3);
  e << 1, 0, 0, 2, 0, 0;
  const auto r = nt_xent_supervised(e, {0, 0});
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  EXPECT_LT(r.grad.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NtXent, IdenticalSameClassPairHasZeroLoss) {
  const Mat e = Mat::Constant(2, 4, 0.3);
  EXPECT_NEAR(nt_xent_supervised(e, {1, 1}).loss, 0.0, 1e-12);
}

TEST(NtXent, NoPositivesMeansNoLoss) {
  Mat e(3, 2);
  e << 1, 0, 0, 1, -1, 0;
  const auto r = nt_xent_supervised(e, {0, 1, 2});
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_TRUE(r.grad.isZero(0));
}

TEST(NtXent, ThreeRowHandExample) {
  // Rows 0 and 1 share a label; z0.z1 = 0, z0.z2 = -1, z1.z2 = 0, tau = 1.
  Mat e(3, 2);
  e << 1, 0, 0, 1, -1, 0;
  NtXentConfig cfg;
  cfg.tau = 1.0;
  const auto r = nt_xent_supervised(e, {0, 0, 1}, cfg);
  const double anchor0 = std::log(1.0 + std::exp(-1.0));  // -log(e^0 / (e^0 + e^-1))
  const double anchor1 = std::log(2.0);                   // -log(e^0 / (e^0 + e^0))
  EXPECT_NEAR(r.loss, anchor0 + anchor1, 1e-12);
}

TEST(NtXent, MatchesDoubleLoopOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index b = 2 + Eigen::Index(seed % 9);
    const Mat e = random_matrix(b, 4, rng);
    const auto y = random_labels(std::size_t(b), 3, rng);
    for (bool normalize : {true, false}) {
      NtXentConfig cfg;
      cfg.tau = normalize ? 0.07 : 2.0;
      cfg.normalize_embeddings = normalize;
      const double want = nt_xent_oracle(e, y, cfg.tau, normalize);
      EXPECT_NEAR(nt_xent_supervised(e, y, cfg).loss, want, 1e-9 * std::max(1.0, std::abs(want)))
          << "seed " << seed;
    }
  }
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  int cases = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    std::mt19937_64 rng(5000 + seed);
    const Eigen::Index b = 2 + Eigen::Index(seed % 7);
    Mat e = random_matrix(b, 1 + Eigen::Index(seed % 5), rng);
    const auto y = random_labels(std::size_t(b), 2, rng);
    NtXentConfig cfg;
    cfg.tau = seed % 2 ? 0.5 : 1.0;
    cfg.normalize_embeddings = seed % 3 != 0;
    const auto r = nt_xent_supervised(e, y, cfg);
    const Mat fd = numeric_gradient([&] { return nt_xent_supervised(e, y, cfg).loss; }, e);
    EXPECT_LT(relative_error(r.grad, fd), 1e-4) << "seed " << seed;
    ++cases;
  }
  EXPECT_GE(cases, 100);
}

TEST(NtXent, InvariantUnderRowPermutation) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed + 900);
    const Eigen::Index b = 6;
    const Mat e = random_matrix(b, 3, rng);
    const auto y = random_labels(std::size_t(b), 2, rng);
    std::vector<int> perm(static_cast<std::size_t>(b));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mat pe(b, 3);
    Labels py(static_cast<std::size_t>(b));
    for (Eigen::Index i = 0; i < b; ++i) {
      pe.row(i) = e.row(perm[std::size_t(i)]);
      py[std::size_t(i)] = y[std::size_t(perm[std::size_t(i)])];
    }
    EXPECT_NEAR(nt_xent_supervised(e, y).loss, nt_xent_supervised(pe, py).loss, 1e-9);
  }
}

TEST(NtXent, NormalizedLossIgnoresRowScale) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed + 1200);
    const Mat e = random_matrix(5, 3, rng);
    const auto y = random_labels(5, 2, rng);
    Mat scaled = e;
    std::uniform_real_distribution<double> s(0.1, 10.0);
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= s(rng);
    EXPECT_NEAR(nt_xent_supervised(e, y).loss, nt_xent_supervised(scaled, y).loss, 1e-8);
  }
}

TEST(NtXent, RejectsBadInput) {
  EXPECT_THROW(nt_xent_supervised(Mat(Mat::Ones(1, 3)), {0}), DegenerateBatchError);
  EXPECT_THROW(nt_xent_supervised(Mat(Mat::Ones(3, 3)), {0, 1}), DimensionError);
  Mat bad = Mat::Ones(3, 2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(nt_xent_supervised(bad, {0, 0, 1}), InputError);
  NtXentConfig cfg;
  cfg.tau = 0.0;
  EXPECT_THROW(nt_xent_supervised(Mat(Mat::Ones(2, 2)), {0, 0}, cfg), InputError);
}

TEST(CrossEntropy, UniformTwoClassIsLn2) {
  const auto r = cross_entropy(Mat(Mat::Zero(1, 2)), {0});
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(r.grad(0, 0), -0.5, 1e-15);
  EXPECT_NEAR(r.grad(0, 1), 0.5, 1e-15);
}

TEST(CrossEntropy, DecreasesAsTrueLogitGrows) {
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20; ++k) {
    Mat z = Mat::Zero(1, 4);
    z(0, 2) = 0.5 * k;
    const double loss = cross_entropy(z, {2}).loss;
    EXPECT_LT(loss, prev);
    prev = loss;
  }
}

TEST(CrossEntropy, MatchesLogSumExpOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 300);
    const Mat z = random_matrix(6, 5, rng, 3.0);
    const auto y = random_labels(6, 5, rng);
    double want = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < z.cols(); ++c) s += std::exp(z(i, c));
      want += std::log(s) - z(i, y[std::size_t(i)]);
    }
    want /= double(z.rows());
    EXPECT_NEAR(cross_entropy(z, y).loss, want, 1e-12);
  }
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 7000);
    Mat z = random_matrix(1 + Eigen::Index(seed % 6), 2 + Eigen::Index(seed % 4), rng);
    const auto y = random_labels(std::size_t(z.rows()), int(z.cols()), rng);
    const auto r = cross_entropy(z, y);
    EXPECT_LT(relative_error(r.grad, numeric_gradient([&] { return cross_entropy(z, y).loss; }, z)), 1e-6);
  }
}

TEST(CrossEntropy, StableForHugeLogits) {
  Mat z(1, 2);
  z << 1000, 0;
  EXPECT_NEAR(cross_entropy(z, {0}).loss, 0.0, 1e-12);
  EXPECT_NEAR(cross_entropy(z, {1}).loss, 1000.0, 1e-9);
}

TEST(CrossEntropy, RejectsBadInput) {
  EXPECT_THROW(cross_entropy(Mat(Mat::Zero(1, 3)), {3}), InputError);
  EXPECT_THROW(cross_entropy(Mat(Mat::Zero(1, 3)), {-1}), InputError);
  EXPECT_THROW(cross_entropy(Mat(Mat::Zero(2, 3)), {0}), DimensionError);
  EXPECT_THROW(cross_entropy(Mat(Mat::Zero(0, 3)), {}), DegenerateBatchError);
}

TEST(L1, ZeroCoefficient) {
  Mat v(1, 2);
  v << 1, -2;
  const auto r = l1_penalty(v, 0.0);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_TRUE(r.grad.isZero(0));
}

TEST(L1, ValueAndSubgradient) {
  Mat v(1, 2);
  v << 1, -2;
  const auto r = l1_penalty(v, 0.5);
  EXPECT_DOUBLE_EQ(r.loss, 1.5);
  Mat want(1, 2);
  want << 0.5, -0.5;
  EXPECT_EQ(r.grad, want);
  Mat zero = Mat::Zero(1, 1);
  EXPECT_EQ(l1_penalty(zero, 2.0).grad(0, 0), 0.0);
  EXPECT_THROW(l1_penalty(v, -1.0), InputError);
}

TEST(L1, GradientMatchesFiniteDifferencesAwayFromZero) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 11000);
    Mat v = random_matrix(3, 4, rng);
    v = v.unaryExpr([](double x) { return std::abs(x) < 1e-3 ? 0.5 : x; });
    const auto r = l1_penalty(v, 0.3);
    EXPECT_LT(relative_error(r.grad, numeric_gradient([&] { return l1_penalty(v, 0.3).loss; }, v)), 1e-8);
  }
}

}  // namespace
}  // namespace adasplit
