#include "adasplit/datagen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <fstream>
#include <sstream>

namespace adasplit {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Mat class_means(const SyntheticMixedSpec& spec, std::mt19937_64& rng) {
  // Random directions are nearly orthogonal in moderate dimension, so a radius
  // of separation / sqrt(2) puts class centres about `separation` apart.
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat means(spec.n_classes, spec.dim);
  const double radius = spec.cluster_separation / std::sqrt(2.0);
  for (int c = 0; c < spec.n_classes; ++c) {
    for (int d = 0; d < spec.dim; ++d) means(c, d) = normal(rng);
    means.row(c) *= radius / means.row(c).norm();
  }
  return means;
}

// Cayley transform of a shared skew-symmetric generator: close angles give
// close rotations, so heterogeneity grows with the distance between client ids.
Mat client_rotation(const Mat& skew, double angle) {
  const Eigen::Index n = skew.rows();
  const Mat identity = Mat::Identity(n, n);
  const Mat half = 0.5 * angle * skew;
  return (identity - half).partialPivLu().solve(identity + half);
}

void append_split(const Mat& samples, int label, int& next_id, double train_fraction, Shard& train,
                  Shard& test) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index n_train = Eigen::Index(std::llround(train_fraction * double(n)));
  auto append = [&](Shard& shard, Eigen::Index from, Eigen::Index to) {
    const Eigen::Index old = shard.features.rows();
    shard.features.conservativeResize(old + (to - from), samples.cols());
    shard.features.bottomRows(to - from) = samples.middleRows(from, to - from);
    for (Eigen::Index r = from; r < to; ++r) {
      shard.labels.push_back(label);
      shard.sample_ids.push_back(next_id++);
    }
  };
  append(train, 0, n_train);
  append(test, n_train, n);
}

}  // namespace

std::string to_string(PartitionMode mode) {
  return mode == PartitionMode::kDisjointSubsets ? "disjoint_subsets" : "distinct_distributions";
}

PartitionMode parse_partition_mode(const std::string& s) {
  if (s == "disjoint_subsets") return PartitionMode::kDisjointSubsets;
  if (s == "distinct_distributions") return PartitionMode::kDistinctDistributions;
  throw ConfigError("unknown partition mode '" + s + "'");
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t id, std::uint64_t purpose) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ (id + 0x632BE59BD9B4E019ULL));
  const std::uint64_t c = splitmix64(b ^ (purpose * 0x8CB92BA72F3D8DD7ULL + 1));
  std::seed_seq seq{std::uint32_t(c), std::uint32_t(c >> 32), std::uint32_t(b), std::uint32_t(b >> 32)};
  return std::mt19937_64(seq);
}

FederatedData generate_mixed(const SyntheticMixedSpec& spec, int n_clients) {
  if (n_clients <= 0) throw ConfigError("n_clients must be positive");
  if (spec.n_classes < 2 || spec.dim < 1 || spec.samples_per_class < 1) {
    throw ConfigError("dataset sizes must be positive (n_classes >= 2)");
  }
  if (!(spec.cluster_separation > 0)) throw ConfigError("cluster_separation must be positive");
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1)) throw ConfigError("train_fraction must lie in (0, 1)");

  auto rng = make_stream(spec.seed, 0, 0xDA7A);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Mat means = class_means(spec, rng);

  FederatedData data;
  data.n_classes = spec.n_classes;
  data.dim = spec.dim;
  data.train.resize(std::size_t(n_clients));
  data.test.resize(std::size_t(n_clients));
  for (int i = 0; i < n_clients; ++i) {
    data.train[std::size_t(i)].features.resize(0, spec.dim);
    data.test[std::size_t(i)].features.resize(0, spec.dim);
  }
  int next_id = 0;

  if (spec.mode == PartitionMode::kDisjointSubsets) {
    if (spec.n_classes % n_clients != 0) {
      throw ConfigError(fmt::format("disjoint_subsets needs n_classes ({}) divisible by n_clients ({})",
                                    spec.n_classes, n_clients));
    }
    const int per_client = spec.n_classes / n_clients;
    for (int c = 0; c < spec.n_classes; ++c) {
      Mat samples(spec.samples_per_class, spec.dim);
      for (int s = 0; s < spec.samples_per_class; ++s)
        for (int d = 0; d < spec.dim; ++d) samples(s, d) = means(c, d) + normal(rng);
      const auto owner = std::size_t(c / per_client);
      append_split(samples, c, next_id, spec.train_fraction, data.train[owner], data.test[owner]);
    }
    return data;
  }

  const int per_class = spec.samples_per_class / n_clients;
  if (per_class < 2) {
    throw ConfigError("distinct_distributions needs samples_per_class >= 2 * n_clients");
  }
  Mat generator(spec.dim, spec.dim);
  for (int r = 0; r < spec.dim; ++r)
    for (int c = 0; c < spec.dim; ++c) generator(r, c) = normal(rng);
  const Mat skew = (generator - generator.transpose()) / std::sqrt(double(spec.dim));
  for (int i = 0; i < n_clients; ++i) {
    const double angle = 0.6 * double(i);
    const double scale = 1.0 + 0.15 * double(i);
    const Mat rotation = client_rotation(skew, angle);
    auto client_rng = make_stream(spec.seed, std::uint64_t(i), 0xD157);
    for (int c = 0; c < spec.n_classes; ++c) {
      const Eigen::RowVectorXd centre = scale * (means.row(c) * rotation.transpose());
      Mat samples(per_class, spec.dim);
      for (int s = 0; s < per_class; ++s)
        for (int d = 0; d < spec.dim; ++d) samples(s, d) = centre(d) + normal(client_rng);
      append_split(samples, c, next_id, spec.train_fraction, data.train[std::size_t(i)],
                   data.test[std::size_t(i)]);
    }
  }
  return data;
}

BatchSampler::BatchSampler(const Shard& shard, std::mt19937_64 rng) : rng_(std::move(rng)) {
  order_.resize(std::size_t(shard.size()));
  std::iota(order_.begin(), order_.end(), 0);
  cursor_ = order_.size();  // shuffle on first draw
}

Batch BatchSampler::next(const Shard& shard, int batch_size) {
  if (std::size_t(shard.size()) != order_.size()) throw ContractError("sampler: shard size changed");
  const std::size_t n = order_.size();
  const std::size_t b = std::min<std::size_t>(std::size_t(std::max(batch_size, 0)), n);
  if (cursor_ + b > n) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  Batch batch;
  batch.x.resize(Eigen::Index(b), shard.features.cols());
  for (std::size_t k = 0; k < b; ++k) {
    const int row = order_[cursor_ + k];
    batch.x.row(Eigen::Index(k)) = shard.features.row(row);
    batch.y.push_back(shard.labels[std::size_t(row)]);
  }
  cursor_ += b;
  return batch;
}

Shard pool(const std::vector<Shard>& shards) {
  Shard out;
  Eigen::Index rows = 0;
  Eigen::Index cols = shards.empty() ? 0 : shards.front().features.cols();
  for (const auto& s : shards) rows += s.size();
  out.features.resize(rows, cols);
  Eigen::Index at = 0;
  for (const auto& s : shards) {
    out.features.middleRows(at, s.size()) = s.features;
    at += s.size();
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
    out.sample_ids.insert(out.sample_ids.end(), s.sample_ids.begin(), s.sample_ids.end());
  }
  return out;
}

void export_csv(const FederatedData& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "client_id,split,label";
  for (int d = 0; d < data.dim; ++d) out << ",f" << d;
  out << '\n';
  auto write = [&](const std::vector<Shard>& shards, const char* split) {
    for (std::size_t i = 0; i < shards.size(); ++i) {
      const auto& s = shards[i];
      for (Eigen::Index r = 0; r < s.size(); ++r) {
        out << i << ',' << split << ',' << s.labels[std::size_t(r)];
        for (Eigen::Index d = 0; d < s.features.cols(); ++d) out << ',' << fmt::format("{:.17g}", s.features(r, d));
        out << '\n';
      }
    }
  };
  write(data.train, "train");
  write(data.test, "test");
}

FederatedData import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
  int dim = 0;
  {
    std::stringstream header(line);
    std::string cell;
    int cols = 0;
    while (std::getline(header, cell, ',')) ++cols;
    dim = cols - 3;
    if (dim < 1) throw InputError(path.string() + ": header needs client_id,split,label,f0...");
  }
  FederatedData data;
  data.dim = dim;
  int line_no = 1;
  int next_id = 0;
  std::vector<std::vector<std::vector<double>>> rows[2];
  std::vector<Labels> labels[2];
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (int(cells.size()) != dim + 3) {
      throw InputError(fmt::format("{}:{}: expected {} columns, got {}", path.string(), line_no, dim + 3,
                                   cells.size()));
    }
    try {
      const int client = std::stoi(cells[0]);
      const int split = cells[1] == "train" ? 0 : (cells[1] == "test" ? 1 : -1);
      if (client < 0 || split < 0) throw std::invalid_argument("client/split");
      const int label = std::stoi(cells[2]);
      if (label < 0) throw std::invalid_argument("label");
      auto& r = rows[split];
      if (std::size_t(client) >= r.size()) {
        rows[0].resize(std::size_t(client) + 1);
        rows[1].resize(std::size_t(client) + 1);
        labels[0].resize(std::size_t(client) + 1);
        labels[1].resize(std::size_t(client) + 1);
      }
      std::vector<double> feats;
      for (int d = 0; d < dim; ++d) feats.push_back(std::stod(cells[std::size_t(d) + 3]));
      rows[split][std::size_t(client)].push_back(std::move(feats));
      labels[split][std::size_t(client)].push_back(label);
      data.n_classes = std::max(data.n_classes, label + 1);
    } catch (const std::logic_error&) {
      throw InputError(fmt::format("{}:{}: malformed row", path.string(), line_no));
    }
  }
  for (int split = 0; split < 2; ++split) {
    auto& target = split == 0 ? data.train : data.test;
    target.resize(rows[0].size());
    for (std::size_t c = 0; c < rows[split].size(); ++c) {
      auto& shard = target[c];
      shard.features.resize(Eigen::Index(rows[split][c].size()), dim);
      for (std::size_t r = 0; r < rows[split][c].size(); ++r) {
        for (int d = 0; d < dim; ++d) shard.features(Eigen::Index(r), d) = rows[split][c][r][std::size_t(d)];
        shard.sample_ids.push_back(next_id++);
      }
      shard.labels = labels[split][c];
    }
  }
  return data;
}

}  // namespace adasplit
