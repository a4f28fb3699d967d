#pragma once

#include <map>
#include <vector>

namespace adasplit {

/// UCB bandit over clients.
///
/// Histories start with two initial entries per client (loss 100, selected),
/// so t >= 2 always. Unselected clients get L^t = (L^{t-1} + L^{t-2}) / 2.
/// Scores are recomputed from the full histories on every query.
class BanditState {
 public:
  static constexpr double kInitialLoss = 100.0;

  BanditState(int n_clients, double gamma, double eta);

  /// Rebuilds a state from full histories (initial entries included).
  static BanditState from_histories(std::vector<std::vector<double>> losses, std::vector<std::vector<int>> selections,
                                    double gamma, double eta);

  int n_clients() const { return int(losses_.size()); }
  int t() const { return t_; }
  double gamma() const { return gamma_; }
  double eta() const { return eta_; }

  /// ceil(eta * N)
  int selection_size() const;

  const std::vector<double>& losses(int client_id) const { return losses_.at(std::size_t(client_id)); }
  const std::vector<int>& selections(int client_id) const { return selections_.at(std::size_t(client_id)); }

  /// Appends iteration t. `selected` must be ascending-unique ids whose keys
  /// match `observed` exactly.
  void record_iteration(const std::vector<int>& selected, const std::map<int, double>& observed);

  /// l_i / s_i + sqrt(2 ln t / s_i), +inf when s_i == 0.
  double advantage(int client_id) const;

  /// l_i / s_i alone (+inf when s_i == 0).
  double exploitation(int client_id) const;

  /// Top ceil(eta * n_clients) clients by advantage, ties by ascending id.
  /// The returned ids are sorted ascending.
  std::vector<int> select_clients(int n_clients) const;

  /// Same ranking rule on the exploitation term only.
  std::vector<int> select_by_exploitation(int n_clients) const;

 private:
  void discounted_sums(int client_id, double& l, double& s) const;
  std::vector<int> top_k(const std::vector<double>& scores, int k) const;

  double gamma_;
  double eta_;
  int t_ = 2;
  std::vector<std::vector<double>> losses_;
  std::vector<std::vector<int>> selections_;
};

/// ceil(x) that ignores floating-point dust just above an integer.
int ceil_fraction(double x);

}  // namespace adasplit
