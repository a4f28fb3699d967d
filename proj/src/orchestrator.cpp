#include "adasplit/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "adasplit/errors.hpp"

namespace adasplit {

int ceil_fraction(double x) { return int(std::ceil(x - 1e-9)); }

BanditState::BanditState(int n_clients, double gamma, double eta) : gamma_(gamma), eta_(eta) {
  if (n_clients <= 0) throw ConfigError("bandit: n_clients must be positive");
  if (!(gamma >= 0 && gamma <= 1)) throw ConfigError("bandit: gamma must lie in [0, 1]");
  if (!(eta > 0 && eta <= 1)) throw ConfigError("bandit: eta must lie in (0, 1]");
  losses_.assign(std::size_t(n_clients), std::vector<double>{kInitialLoss, kInitialLoss});
  selections_.assign(std::size_t(n_clients), std::vector<int>{1, 1});
}

BanditState BanditState::from_histories(std::vector<std::vector<double>> losses,
                                        std::vector<std::vector<int>> selections, double gamma, double eta) {
  BanditState b(int(losses.size()), gamma, eta);
  if (selections.size() != losses.size()) throw DimensionError("bandit: loss and selection client counts differ");
  const std::size_t t = losses.front().size();
  if (t < 2) throw StateError("bandit: histories need at least the two initial entries");
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i].size() != t || selections[i].size() != t) throw DimensionError("bandit: ragged histories");
    for (int s : selections[i])
      if (s != 0 && s != 1) throw InputError("bandit: selections must be 0 or 1");
  }
  b.losses_ = std::move(losses);
  b.selections_ = std::move(selections);
  b.t_ = int(t);
  return b;
}

int BanditState::selection_size() const { return std::max(1, ceil_fraction(eta_ * double(n_clients()))); }

void BanditState::record_iteration(const std::vector<int>& selected, const std::map<int, double>& observed) {
  std::vector<int> is_selected(losses_.size(), 0);
  for (int id : selected) {
    if (id < 0 || id >= n_clients()) throw RegistryError("bandit: unknown client " + std::to_string(id));
    if (is_selected[std::size_t(id)]) throw ContractError("bandit: client selected twice");
    is_selected[std::size_t(id)] = 1;
    if (!observed.count(id)) throw ContractError("bandit: no observed loss for selected client " + std::to_string(id));
  }
  if (observed.size() != selected.size()) throw ContractError("bandit: observation for an unselected client");
  for (std::size_t i = 0; i < losses_.size(); ++i) {
    auto& l = losses_[i];
    if (is_selected[i]) {
      l.push_back(observed.at(int(i)));
    } else {
      l.push_back((l[l.size() - 1] + l[l.size() - 2]) / 2.0);
    }
    selections_[i].push_back(is_selected[i]);
  }
  ++t_;
}

void BanditState::discounted_sums(int client_id, double& l, double& s) const {
  const auto& losses = losses_.at(std::size_t(client_id));
  const auto& sel = selections_.at(std::size_t(client_id));
  l = 0.0;
  s = 0.0;
  // gamma^0 == 1 even for gamma == 0, so gamma = 0 keeps only the last entry.
  const std::size_t t = losses.size();
  for (std::size_t u = 0; u < t; ++u) {
    const double w = std::pow(gamma_, double(t - 1 - u));
    l += w * losses[u];
    s += w * double(sel[u]);
  }
}

double BanditState::exploitation(int client_id) const {
  if (t_ < 2) throw StateError("bandit: advantage needs t >= 2");
  double l = 0, s = 0;
  discounted_sums(client_id, l, s);
  if (s == 0.0) return std::numeric_limits<double>::infinity();
  return l / s;
}

double BanditState::advantage(int client_id) const {
  if (t_ < 2) throw StateError("bandit: advantage needs t >= 2");
  double l = 0, s = 0;
  discounted_sums(client_id, l, s);
  if (s == 0.0) return std::numeric_limits<double>::infinity();
  return l / s + std::sqrt(2.0 * std::log(double(t_)) / s);
}

std::vector<int> BanditState::top_k(const std::vector<double>& scores, int k) const {
  std::vector<int> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return scores[std::size_t(a)] > scores[std::size_t(b)]; });
  ids.resize(std::size_t(std::min<int>(k, int(ids.size()))));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<int> BanditState::select_clients(int n_clients) const {
  std::vector<double> scores;
  for (int i = 0; i < n_clients; ++i) scores.push_back(advantage(i));
  return top_k(scores, std::max(1, ceil_fraction(eta_ * double(n_clients))));
}

std::vector<int> BanditState::select_by_exploitation(int n_clients) const {
  std::vector<double> scores;
  for (int i = 0; i < n_clients; ++i) scores.push_back(exploitation(i));
  return top_k(scores, std::max(1, ceil_fraction(eta_ * double(n_clients))));
}

}  // namespace adasplit
