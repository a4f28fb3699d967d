#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "adasplit/datagen.hpp"
#include "adasplit/losses.hpp"

namespace adasplit {
namespace {

std::set<int> label_set(const Shard& s) { return {s.labels.begin(), s.labels.end()}; }

bool same_data(const FederatedData& a, const FederatedData& b) {
  if (a.train.size() != b.train.size() || a.test.size() != b.test.size()) return false;
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    if (a.train[i].features != b.train[i].features || a.train[i].labels != b.train[i].labels) return false;
    if (a.test[i].features != b.test[i].features || a.test[i].labels != b.test[i].labels) return false;
  }
  return true;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("adasplit_datagen_" + name);
}

TEST(Disjoint, EachClientHoldsTwoPrivateClasses) {
  SyntheticMixedSpec spec;
  const auto data = generate_mixed(spec, 5);
  ASSERT_EQ(data.train.size(), 5u);
  std::set<int> all;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto train = label_set(data.train[i]);
    EXPECT_EQ(train.size(), 2u);
    EXPECT_EQ(label_set(data.test[i]), train);
    for (int y : train) EXPECT_TRUE(all.insert(y).second) << "class " << y << " shared";
  }
  EXPECT_EQ(all.size(), 10u);
}

TEST(Disjoint, EightyTwentySplitPerClass) {
  SyntheticMixedSpec spec;
  const auto data = generate_mixed(spec, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(data.train[i].size(), 2 * 160);
    EXPECT_EQ(data.test[i].size(), 2 * 40);
  }
}

TEST(Disjoint, DivisibilityIsEnforced) {
  SyntheticMixedSpec spec;
  EXPECT_THROW(generate_mixed(spec, 3), ConfigError);
}

TEST(Generation, SameSeedSameShards) {
  SyntheticMixedSpec spec;
  spec.seed = 42;
  EXPECT_TRUE(same_data(generate_mixed(spec, 5), generate_mixed(spec, 5)));
  auto other = spec;
  other.seed = 43;
  EXPECT_FALSE(same_data(generate_mixed(spec, 5), generate_mixed(other, 5)));
}

TEST(Generation, TrainAndTestAreDisjointIndexSets) {
  for (auto mode : {PartitionMode::kDisjointSubsets, PartitionMode::kDistinctDistributions}) {
    SyntheticMixedSpec spec;
    spec.mode = mode;
    const auto data = generate_mixed(spec, 5);
    std::set<int> train_ids, test_ids;
    for (const auto& s : data.train) train_ids.insert(s.sample_ids.begin(), s.sample_ids.end());
    for (const auto& s : data.test) test_ids.insert(s.sample_ids.begin(), s.sample_ids.end());
    for (int id : test_ids) EXPECT_EQ(train_ids.count(id), 0u);
  }
}

TEST(Generation, RejectsBadSpecs) {
  SyntheticMixedSpec spec;
  spec.cluster_separation = 0.0;
  EXPECT_THROW(generate_mixed(spec, 5), ConfigError);
  spec = {};
  EXPECT_THROW(generate_mixed(spec, 0), ConfigError);
  spec.train_fraction = 1.0;
  EXPECT_THROW(generate_mixed(spec, 5), ConfigError);
}

TEST(Distinct, EveryClientSeesEveryClass) {
  SyntheticMixedSpec spec;
  spec.mode = PartitionMode::kDistinctDistributions;
  const auto data = generate_mixed(spec, 5);
  for (const auto& s : data.train) EXPECT_EQ(label_set(s).size(), 10u);
}

TEST(Distinct, ClientsDifferInDistribution) {
  SyntheticMixedSpec spec;
  spec.mode = PartitionMode::kDistinctDistributions;
  const auto data = generate_mixed(spec, 5);
  const Eigen::RowVectorXd m0 = data.train[0].features.colwise().mean();
  const Eigen::RowVectorXd m4 = data.train[4].features.colwise().mean();
  EXPECT_GT((m0 - m4).norm(), 0.5);
}

// Softmax regression on the pooled train split, scored on the pooled test split.
TEST(Separability, LinearClassifierReachesNinetyFivePercentAtSixSigma) {
  SyntheticMixedSpec spec;
  spec.cluster_separation = 6.0;
  const auto data = generate_mixed(spec, 5);
  const Shard train = pool(data.train);
  const Shard test = pool(data.test);
  std::mt19937_64 rng(1);
  const int sizes[] = {data.dim, data.n_classes};
  auto model = DenseModel<double>::random(sizes, Activation::kIdentity, Activation::kIdentity, rng);
  AdamState<double> opt(0.05);
  for (int step = 0; step < 300; ++step) {
    auto fwd = forward(model, train.features);
    auto ce = cross_entropy(fwd.output, train.labels);
    backward(model, fwd.cache, ce.grad);
    optimizer_step(model, opt);
  }
  const Mat logits = forward(model, test.features).output;
  int correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg;
    logits.row(r).maxCoeff(&arg);
    correct += int(arg) == test.labels[std::size_t(r)];
  }
  EXPECT_GE(100.0 * correct / double(logits.rows()), 95.0);
}

TEST(Csv, RoundTripIsExact) {
  for (auto mode : {PartitionMode::kDisjointSubsets, PartitionMode::kDistinctDistributions}) {
    SyntheticMixedSpec spec;
    spec.mode = mode;
    spec.samples_per_class = 20;
    spec.dim = 4;
    const auto data = generate_mixed(spec, 5);
    const auto path = temp_file("roundtrip.csv");
    export_csv(data, path);
    const auto back = import_csv(path);
    EXPECT_TRUE(same_data(data, back));
    EXPECT_EQ(back.dim, 4);
    EXPECT_EQ(back.n_classes, 10);
    std::filesystem::remove(path);
  }
}

TEST(Csv, MalformedRowsNameTheLine) {
  const auto path = temp_file("bad.csv");
  {
    std::ofstream out(path);
    out << "client_id,split,label,f0,f1\n0,train,1,0.5,0.5\n0,validation,1,0.5,0.5\n";
  }
  try {
    import_csv(path);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  {
    std::ofstream out(path);
    out << "client_id,split,label,f0,f1\n0,train,1,0.5\n";
  }
  EXPECT_THROW(import_csv(path), InputError);
  std::filesystem::remove(path);
  EXPECT_THROW(import_csv(path), InputError);
}

TEST(Sampler, EpochCoversShardWithoutRepeats) {
  SyntheticMixedSpec spec;
  const auto data = generate_mixed(spec, 5);
  const auto& shard = data.train[0];
  BatchSampler sampler(shard, make_stream(1, 0, 3));
  std::multiset<double> seen;
  for (int k = 0; k < 20; ++k) {
    const auto b = sampler.next(shard, 16);
    ASSERT_EQ(b.x.rows(), 16);
    for (Eigen::Index r = 0; r < b.x.rows(); ++r) seen.insert(b.x(r, 0));
  }
  std::multiset<double> all;
  for (Eigen::Index r = 0; r < shard.size(); ++r) all.insert(shard.features(r, 0));
  EXPECT_EQ(seen, all);
}

TEST(Streams, DistinctKeysGiveDistinctStreams) {
  auto a = make_stream(1, 0, 1);
  auto b = make_stream(1, 1, 1);
  auto c = make_stream(1, 0, 2);
  auto d = make_stream(2, 0, 1);
  auto a2 = make_stream(1, 0, 1);
  const auto x = a();
  EXPECT_EQ(x, a2());
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

}  // namespace
}  // namespace adasplit
