#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "adasplit/nn.hpp"

namespace adasplit {

struct Shard {
  Mat features;  // rows = samples
  Labels labels;
  std::vector<int> sample_ids;  // global ids, used to check train/test disjointness

  Eigen::Index size() const { return features.rows(); }
};

struct Batch {
  Mat x;
  Labels y;
};

enum class PartitionMode { kDisjointSubsets, kDistinctDistributions };

std::string to_string(PartitionMode mode);
PartitionMode parse_partition_mode(const std::string& s);

struct SyntheticMixedSpec {
  int n_classes = 10;
  int dim = 32;
  int samples_per_class = 200;
  PartitionMode mode = PartitionMode::kDisjointSubsets;
  double cluster_separation = 4.0;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
};

struct FederatedData {
  std::vector<Shard> train;
  std::vector<Shard> test;
  int n_classes = 0;
  int dim = 0;
};

/// Gaussian-cluster benchmark split across clients.
///
/// Disjoint subsets: one unit-variance cluster per class, classes dealt in
/// equal contiguous groups, one group per client. Distinct distributions: all
/// clients see all classes of a shared layout, each through its own
/// orthogonal transform and scale. Both split every client 80/20 per class.
FederatedData generate_mixed(const SyntheticMixedSpec& spec, int n_clients);

/// Rows: client_id,split,label,f0..f{dim-1}. Split is "train" or "test".
void export_csv(const FederatedData& data, const std::filesystem::path& path);
FederatedData import_csv(const std::filesystem::path& path);

/// Independent deterministic RNG stream for (seed, id, purpose).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t id, std::uint64_t purpose);

/// Epoch-wise shuffled mini-batches over one shard. A partial tail batch is
/// dropped and the shard reshuffled.
class BatchSampler {
 public:
  BatchSampler(const Shard& shard, std::mt19937_64 rng);

  Batch next(const Shard& shard, int batch_size);

 private:
  std::mt19937_64 rng_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
};

/// Pools all client shards into one.
Shard pool(const std::vector<Shard>& shards);

}  // namespace adasplit
