#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "adasplit/errors.hpp"
#include "adasplit/orchestrator.hpp"
#include "oracles.hpp"

namespace adasplit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using testing::append;
using testing::brute_force_select;
using testing::fresh_tape;
using testing::Tape;

TEST(Record, UnselectedAtStartAveragesTheInits) {
  BanditState b(2, 0.87, 0.5);
  b.record_iteration({0}, {{0, 0.7}});
  EXPECT_EQ(b.losses(1).back(), 100.0);
  EXPECT_EQ(b.losses(0).back(), 0.7);
  EXPECT_EQ(b.selections(0).back(), 1);
  EXPECT_EQ(b.selections(1).back(), 0);
  EXPECT_EQ(b.t(), 3);
}

TEST(Record, UnselectedIsMeanOfLastTwo) {
  BanditState b(2, 0.87, 0.5);
  b.record_iteration({0, 1}, {{0, 1.0}, {1, 2.0}});
  b.record_iteration({0, 1}, {{0, 1.0}, {1, 4.0}});
  b.record_iteration({0}, {{0, 1.0}});
  EXPECT_EQ(b.losses(1).back(), 3.0);
}

TEST(Record, ContractViolations) {
  BanditState b(3, 0.87, 0.6);
  EXPECT_THROW(b.record_iteration({0, 1}, {{0, 1.0}}), ContractError);
  EXPECT_THROW(b.record_iteration({0}, {{0, 1.0}, {2, 1.0}}), ContractError);
  EXPECT_THROW(b.record_iteration({0, 0}, {{0, 1.0}}), ContractError);
  EXPECT_THROW(b.record_iteration({7}, {{7, 1.0}}), RegistryError);
  EXPECT_EQ(b.t(), 2);
}

TEST(Advantage, InitialValue) {
  BanditState b(1, 1.0, 1.0);
  EXPECT_NEAR(b.advantage(0), 100.0 + std::sqrt(std::log(2.0)), 1e-12);
  EXPECT_NEAR(b.advantage(0), 100.8326, 1e-4);
}

TEST(Advantage, NeverSelectedIsInfinite) {
  auto b = BanditState::from_histories({{1.0, 2.0, 3.0}}, {{0, 0, 0}}, 0.5, 1.0);
  EXPECT_EQ(b.advantage(0), kInf);
  EXPECT_EQ(b.exploitation(0), kInf);
}

TEST(Advantage, ZeroGammaKeepsOnlyTheLatestEntry) {
  BanditState b(2, 0.0, 0.5);
  b.record_iteration({0}, {{0, 4.0}});
  // l = 4, s = 1, t = 3
  EXPECT_NEAR(b.advantage(0), 4.0 + std::sqrt(2.0 * std::log(3.0)), 1e-12);
  // client 1 was unselected in the latest entry: s = 0
  EXPECT_EQ(b.advantage(1), kInf);
}

TEST(Select, FullSelectionWhenEtaCoversEveryone) {
  BanditState b(4, 0.87, 1.0);
  EXPECT_EQ(b.select_clients(4), (std::vector<int>{0, 1, 2, 3}));
}

TEST(Select, TiesBreakByAscendingId) {
  BanditState b(5, 0.87, 0.6);
  EXPECT_EQ(b.selection_size(), 3);
  EXPECT_EQ(b.select_clients(5), (std::vector<int>{0, 1, 2}));
}

TEST(Select, PrefersHigherLoss) {
  BanditState b(3, 0.87, 0.3);
  b.record_iteration({0, 1, 2}, {{0, 1.0}, {1, 9.0}, {2, 2.0}});
  EXPECT_EQ(b.select_clients(3), (std::vector<int>{1}));
}

TEST(Select, CeilingIgnoresFloatingDust) {
  EXPECT_EQ(ceil_fraction(0.6 * 5), 3);
  EXPECT_EQ(ceil_fraction(0.2 * 5), 1);
  EXPECT_EQ(ceil_fraction(2.01), 3);
}

// 1000 seeded tapes, N <= 8, t <= 200, gamma in {0, .5, .87, 1}.
TEST(SelectProperty, MatchesBruteForceOnRandomTapes) {
  const double gammas[] = {0.0, 0.5, 0.87, 1.0};
  int infinite_seen = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    const double gamma = gammas[seed % 4];
    const double eta = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const int steps = std::uniform_int_distribution<int>(0, 198)(rng);
    // Coarse loss values make exact ties common.
    const bool coarse = seed % 3 == 0;
    BanditState b(n, gamma, eta);
    Tape tape = fresh_tape(n);
    for (int step = 0; step < steps; ++step) {
      std::vector<int> selected;
      std::map<int, double> observed;
      for (int i = 0; i < n; ++i) {
        if (std::bernoulli_distribution(0.4)(rng)) {
          selected.push_back(i);
          observed[i] = coarse ? double(std::uniform_int_distribution<int>(1, 3)(rng))
                               : std::uniform_real_distribution<double>(0.0, 5.0)(rng);
        }
      }
      b.record_iteration(selected, observed);
      append(tape, selected, observed);
    }
    ASSERT_EQ(b.t(), 2 + steps);
    ASSERT_EQ(b.select_clients(n), brute_force_select(tape, gamma, eta)) << "seed " << seed;
    for (int i = 0; i < n; ++i) infinite_seen += std::isinf(b.advantage(i));
  }
  EXPECT_GT(infinite_seen, 0);
}

TEST(SelectProperty, RoundTripEqualsRebuildFromHistories) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 5000);
    const int n = 5;
    BanditState b(n, 0.87, 0.6);
    for (int step = 0; step < 60; ++step) {
      const auto selected = b.select_clients(n);
      std::map<int, double> observed;
      for (int id : selected) observed[id] = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
      b.record_iteration(selected, observed);
    }
    std::vector<std::vector<double>> losses;
    std::vector<std::vector<int>> sels;
    for (int i = 0; i < n; ++i) {
      losses.push_back(b.losses(i));
      sels.push_back(b.selections(i));
    }
    const auto rebuilt = BanditState::from_histories(losses, sels, 0.87, 0.6);
    for (int i = 0; i < n; ++i) EXPECT_EQ(b.advantage(i), rebuilt.advantage(i));
    EXPECT_EQ(b.select_clients(n), rebuilt.select_clients(n));
  }
}

TEST(SelectProperty, ExploitationRankingIsScaleInvariant) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed + 9000);
    const int n = std::uniform_int_distribution<int>(2, 8)(rng);
    const int t = std::uniform_int_distribution<int>(2, 50)(rng);
    std::vector<std::vector<double>> losses(static_cast<std::size_t>(n));
    std::vector<std::vector<int>> sels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int u = 0; u < t; ++u) {
        losses[std::size_t(i)].push_back(std::uniform_real_distribution<double>(0.1, 5.0)(rng));
        sels[std::size_t(i)].push_back(u < 2 ? 1 : int(std::bernoulli_distribution(0.5)(rng)));
      }
    }
    const double c = std::ldexp(1.0, std::uniform_int_distribution<int>(-6, 6)(rng));
    auto scaled = losses;
    for (auto& h : scaled)
      for (auto& v : h) v *= c;
    const double gamma = seed % 2 ? 0.87 : 1.0;
    const auto a = BanditState::from_histories(losses, sels, gamma, 0.5);
    const auto b = BanditState::from_histories(scaled, sels, gamma, 0.5);
    EXPECT_EQ(a.select_by_exploitation(n), b.select_by_exploitation(n)) << "seed " << seed;
  }
}

TEST(SelectProperty, NoClientIsStarved) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 300);
    const int n = std::uniform_int_distribution<int>(2, 8)(rng);
    const double eta = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    BanditState b(n, 0.87, eta);
    const int window = int(std::ceil(double(n) / double(b.selection_size()) * 50));
    // Client 0 reports a much larger loss, so the others live on exploration alone.
    std::vector<int> last_seen(static_cast<std::size_t>(n), 0);
    for (int step = 1; step <= 4 * window; ++step) {
      const auto selected = b.select_clients(n);
      std::map<int, double> observed;
      for (int id : selected) {
        observed[id] = id == 0 ? 10.0 : std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        last_seen[std::size_t(id)] = step;
      }
      b.record_iteration(selected, observed);
      for (int i = 0; i < n; ++i) {
        ASSERT_LT(step - last_seen[std::size_t(i)], window) << "client " << i << " starved, seed " << seed;
      }
    }
  }
}

TEST(Construction, RejectsBadParameters) {
  EXPECT_THROW(BanditState(0, 0.5, 0.5), ConfigError);
  EXPECT_THROW(BanditState(3, 1.5, 0.5), ConfigError);
  EXPECT_THROW(BanditState(3, 0.5, 0.0), ConfigError);
  EXPECT_THROW(BanditState::from_histories({{1.0}}, {{1}}, 0.5, 0.5), StateError);
  EXPECT_THROW(BanditState::from_histories({{1.0, 2.0}}, {{1, 2}}, 0.5, 0.5), InputError);
}

}  // namespace
}  // namespace adasplit
