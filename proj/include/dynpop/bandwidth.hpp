#pragma once

// Kelly proportional-share bandwidth mechanism with concave valuations:
// allocation rule, water-filling and delta-segmented optima, the layered
// greedy segment benchmark, and the randomized discretized smoothness
// deviation.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dynpop/common.hpp"
#include "dynpop/game.hpp"
#include "dynpop/matching.hpp"  // layer_of

namespace dynpop {

// v(x) = a*x - (b/2)*x^2 on [0,1]; a >= rho + b keeps v' >= rho, v(1) <= 1.
struct ConcaveValuation {
  double a = 0.0;
  double b = 0.0;

  double value(double x) const { return a * x - 0.5 * b * x * x; }
  double slope(double x) const { return a - b * x; }

  void validate(double rho, double alpha) const {
    if (b < -kSlackTol || b > alpha + kSlackTol)
      throw argument_error("ConcaveValuation: b outside [0, alpha]");
    if (a < rho + b - kSlackTol)
      throw argument_error("ConcaveValuation: slope drops below rho");
    if (value(1.0) > 1.0 + kSlackTol)
      throw argument_error("ConcaveValuation: v(1) exceeds 1");
  }
};

// Everyone pays her bid and receives share b_i / sum_j b_j (zero on an
// all-zero profile).
struct ProportionalResult {
  std::vector<double> shares;
  std::vector<double> payments;
};

inline ProportionalResult proportional_allocate(const std::vector<double>& bids) {
  double total = 0.0;
  for (double b : bids) {
    if (b < 0) throw argument_error("proportional_allocate: negative bid");
    total += b;
  }
  ProportionalResult res;
  res.payments = bids;
  res.shares.assign(bids.size(), 0.0);
  if (total > 0)
    for (std::size_t i = 0; i < bids.size(); ++i) res.shares[i] = bids[i] / total;
  return res;
}

// ---------------------------------------------------------------------------
// Welfare oracles.

// KKT solution of max sum v_i(x_i) s.t. sum x_i = 1: bisect the common
// marginal level M; leftover mass goes to constant-marginal (linear) players
// sitting exactly at M, lowest index first.
inline std::pair<std::vector<double>, double> waterfill_optimum(
    const std::vector<ConcaveValuation>& players) {
  if (players.empty()) throw argument_error("waterfill: no players");
  auto x_of = [](const ConcaveValuation& p, double m) {
    if (p.b == 0.0) return p.a > m ? 1.0 : 0.0;
    return std::clamp((p.a - m) / p.b, 0.0, 1.0);
  };
  auto total = [&](double m) {
    double s = 0.0;
    for (const auto& p : players) s += x_of(p, m);
    return s;
  };
  double lo = 0.0, hi = 0.0;
  for (const auto& p : players) hi = std::max(hi, p.a);
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (total(mid) > 1.0)
      lo = mid;
    else
      hi = mid;
  }
  double m = hi;
  std::vector<double> xs;
  xs.reserve(players.size());
  for (const auto& p : players) xs.push_back(x_of(p, m));
  double left = 1.0;
  for (double x : xs) left -= x;
  for (std::size_t i = 0; i < players.size() && left > 0; ++i) {
    if (players[i].b == 0.0 && std::abs(players[i].a - m) < 1e-7) {
      double take = std::min(1.0 - xs[i], left);
      xs[i] += take;
      left -= take;
    }
  }
  for (std::size_t i = 0; i < players.size() && left > 1e-12; ++i) {
    double take = std::min(1.0 - xs[i], left);  // numerical dust
    xs[i] += take;
    left -= take;
  }
  double welfare = 0.0;
  for (std::size_t i = 0; i < players.size(); ++i)
    welfare += players[i].value(xs[i]);
  return {xs, welfare};
}

// Marginal value of player i's k-th segment (1-based) of width delta.
inline double segment_marginal(const ConcaveValuation& p, int k, double delta) {
  return p.value(static_cast<double>(k) * delta) -
         p.value(static_cast<double>(k - 1) * delta);
}

// Greedy over the 1/delta segments by marginal value; exact for the
// delta-segmented problem because marginals are non-increasing.
inline std::pair<std::vector<int>, double> segmented_optimum(
    const std::vector<ConcaveValuation>& players, double delta) {
  double k_real = 1.0 / delta;
  int segments = static_cast<int>(std::round(k_real));
  if (std::abs(k_real - segments) > 1e-9)
    throw argument_error("segmented_optimum: 1/delta must be integral");
  std::vector<int> counts(players.size(), 0);
  double welfare = 0.0;
  for (int seg = 0; seg < segments; ++seg) {
    double best = -1.0;
    std::size_t who = 0;
    for (std::size_t i = 0; i < players.size(); ++i) {
      double m = segment_marginal(players[i], counts[i] + 1, delta);
      if (m > best + 1e-15) {
        best = m;
        who = i;
      }
    }
    counts[who] += 1;
    welfare += best;
  }
  return {counts, welfare};
}

inline double segmented_welfare(const std::vector<ConcaveValuation>& players,
                                const std::vector<int>& counts, double delta) {
  double w = 0.0;
  for (std::size_t i = 0; i < players.size(); ++i)
    w += players[i].value(counts[i] * delta);
  return w;
}

// Tightest segment width from the segmentation lemma (appendix form).
inline double segmentation_delta(double eps, double rho, double alpha) {
  if (alpha <= 0) return 1.0;
  return eps * rho / (alpha * (1.0 - eps));
}

// ---------------------------------------------------------------------------
// Layered greedy over segments.

// Segments are anonymous; a player's holding is a count, and her j-th held
// segment carries the layer of her j-th marginal.  Layers use base rho*delta.
class LayeredSegments {
 public:
  LayeredSegments(std::vector<ConcaveValuation> players, double delta, double rho,
                  double eps)
      : delta_(delta), rho_(rho), eps_(eps), players_(std::move(players)) {
    double k_real = 1.0 / delta;
    segments_ = static_cast<int>(std::round(k_real));
    if (std::abs(k_real - segments_) > 1e-9)
      throw argument_error("LayeredSegments: 1/delta must be integral");
    counts_.assign(players_.size(), 0);
    active_.assign(players_.size(), true);
    rebuild();
  }

  int segments() const { return segments_; }
  const std::vector<int>& counts() const { return counts_; }

  double welfare() const { return segmented_welfare(players_, counts_, delta_); }

  int layer_of_marginal(std::size_t i, int k) const {
    return layer_of(segment_marginal(players_[i], k, delta_), rho_ * delta_, eps_);
  }

  int phi() const {
    int total = 0;
    for (std::size_t i = 0; i < players_.size(); ++i)
      for (int k = 1; k <= counts_[i]; ++k) total += layer_of_marginal(i, k);
    return total;
  }

  // Departure frees the player's segments; each freed segment goes to the
  // player whose next marginal has the highest layer (lowest index on ties).
  // Returns per-player count deltas.
  std::vector<int> depart(std::size_t player) {
    std::vector<int> delta_counts(players_.size(), 0);
    active_[player] = false;
    int freed = counts_[player];
    delta_counts[player] -= freed;
    counts_[player] = 0;
    for (int f = 0; f < freed; ++f) {
      int best_layer = 0;
      int best_player = -1;
      for (std::size_t i = 0; i < players_.size(); ++i) {
        if (!active_[i]) continue;
        int l = layer_of_marginal(i, counts_[i] + 1);
        if (l > best_layer) {
          best_layer = l;
          best_player = static_cast<int>(i);
        }
      }
      if (best_player < 0) break;  // nobody active
      counts_[static_cast<std::size_t>(best_player)] += 1;
      delta_counts[static_cast<std::size_t>(best_player)] += 1;
    }
    return delta_counts;
  }

  // The arriving player takes segments while her next marginal's layer
  // strictly exceeds the weakest held layer (incumbents keep ties).
  std::vector<int> arrive(std::size_t player, ConcaveValuation v) {
    if (counts_[player] != 0)
      throw argument_error("LayeredSegments::arrive: slot still holds segments");
    players_[player] = v;
    active_[player] = true;
    std::vector<int> delta_counts(players_.size(), 0);
    while (true) {
      int mine = layer_of_marginal(player, counts_[player] + 1);
      // weakest last-segment layer among other holders
      int weak_layer = std::numeric_limits<int>::max();
      int weak_player = -1;
      for (std::size_t i = 0; i < players_.size(); ++i) {
        if (i == player || counts_[i] == 0) continue;
        int l = layer_of_marginal(i, counts_[i]);
        if (l < weak_layer) {
          weak_layer = l;
          weak_player = static_cast<int>(i);
        }
      }
      if (weak_player < 0 || mine <= weak_layer) break;
      counts_[static_cast<std::size_t>(weak_player)] -= 1;
      delta_counts[static_cast<std::size_t>(weak_player)] -= 1;
      counts_[player] += 1;
      delta_counts[player] += 1;
    }
    return delta_counts;
  }

  std::vector<int> turnover(std::size_t player, ConcaveValuation v) {
    auto d1 = depart(player);
    auto d2 = arrive(player, v);
    for (std::size_t i = 0; i < d1.size(); ++i) d1[i] += d2[i];
    return d1;
  }

  const std::vector<ConcaveValuation>& players() const { return players_; }

 private:
  void rebuild() {
    // greedy on layered marginals; marginals are non-increasing per player,
    // so repeatedly taking the best next layer is the layered greedy
    std::fill(counts_.begin(), counts_.end(), 0);
    for (int seg = 0; seg < segments_; ++seg) {
      int best_layer = 0;
      int best_player = -1;
      for (std::size_t i = 0; i < players_.size(); ++i) {
        if (!active_[i]) continue;
        int l = layer_of_marginal(i, counts_[i] + 1);
        if (l > best_layer) {
          best_layer = l;
          best_player = static_cast<int>(i);
        }
      }
      if (best_player < 0) break;
      counts_[static_cast<std::size_t>(best_player)] += 1;
    }
  }

  double delta_, rho_, eps_;
  int segments_ = 0;
  std::vector<ConcaveValuation> players_;
  std::vector<int> counts_;
  std::vector<bool> active_;
};

// ---------------------------------------------------------------------------
// Discretized smoothness deviation and verification.

// Distribution of ceil(U/zeta)*zeta for U uniform on [0, theta*v]; exact atom
// masses.  theta*v = 0 degenerates to the zero bid.
inline std::vector<std::pair<double, double>> smoothness_deviation_bandwidth(
    double theta_v, double zeta) {
  if (theta_v <= 1e-15) return {{0.0, 1.0}};
  std::vector<std::pair<double, double>> atoms;
  int k = 1;
  while ((k - 1) * zeta < theta_v - 1e-15) {
    double hi = std::min(static_cast<double>(k) * zeta, theta_v);
    atoms.emplace_back(static_cast<double>(k) * zeta,
                       (hi - static_cast<double>(k - 1) * zeta) / theta_v);
    ++k;
  }
  return atoms;
}

// Bound game over the zeta-grid of bids.
class BandwidthBoundGame {
 public:
  BandwidthBoundGame(std::vector<ConcaveValuation> players, double zeta)
      : zeta_(zeta), players_(std::move(players)) {
    levels_ = static_cast<int>(std::floor(1.0 / zeta + kSlackTol));
  }

  GameKind kind() const { return GameKind::mechanism; }
  int players() const { return static_cast<int>(players_.size()); }
  int strategy_count(int) const { return levels_ + 1; }
  double bid_of(int s) const { return static_cast<double>(s) * zeta_; }
  double zeta() const { return zeta_; }
  const std::vector<ConcaveValuation>& valuations() const { return players_; }

  Outcome evaluate(const StrategyProfile& s) const {
    std::vector<double> bids;
    bids.reserve(s.size());
    for (int v : s) bids.push_back(bid_of(v));
    auto res = proportional_allocate(bids);
    Outcome out;
    out.payments = res.payments;
    out.payoff.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      out.payoff[i] = players_[i].value(res.shares[i]) - bids[i];
    return out;
  }

 private:
  double zeta_;
  int levels_ = 0;
  std::vector<ConcaveValuation> players_;
};

struct BandwidthSmoothnessReport {
  bool holds = false;
  double best_theta = 0.0;
  double best_min_slack = -std::numeric_limits<double>::infinity();
  StrategyProfile worst_profile;
};

// Sweeps theta over a grid and reports the best verified deviation scale for
// the (lambda, 1) inequality against the given segmented benchmark.
inline BandwidthSmoothnessReport verify_bandwidth_smoothness(
    const BandwidthBoundGame& game, const std::vector<int>& benchmark_counts,
    double delta, double lambda, const std::vector<double>& theta_grid) {
  double w_hat = segmented_welfare(game.valuations(), benchmark_counts, delta);
  BandwidthSmoothnessReport best;
  for (double theta : theta_grid) {
    std::vector<MixedStrategy> dev(static_cast<std::size_t>(game.players()));
    for (int i = 0; i < game.players(); ++i) {
      double tv = theta * game.valuations()[static_cast<std::size_t>(i)].value(
                              benchmark_counts[static_cast<std::size_t>(i)] * delta);
      for (auto [bid, mass] : smoothness_deviation_bandwidth(tv, game.zeta())) {
        int level = static_cast<int>(std::round(bid / game.zeta()));
        dev[static_cast<std::size_t>(i)].emplace_back(level, mass);
      }
    }
    auto rep = verify_smoothness(game, {lambda, 1.0}, w_hat, dev);
    if (rep.min_slack > best.best_min_slack) {
      best.best_min_slack = rep.min_slack;
      best.best_theta = theta;
      best.worst_profile = rep.worst_profile;
      best.holds = rep.holds;
    }
  }
  return best;
}

}  // namespace dynpop
