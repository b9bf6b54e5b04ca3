#pragma once

// Simultaneous first-price item auctions with unit-demand bidders: the stage
// mechanism on a discrete bid grid, the smoothness deviation, an exact
// maximum-weight assignment oracle, and the greedy-layered stable benchmark
// with its potential function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynpop/common.hpp"
#include "dynpop/game.hpp"

namespace dynpop {

// Per-item values; every non-zero value lies in [rho, 1].
struct UnitDemandValuation {
  std::vector<double> values;

  void validate(double rho) const {
    for (double v : values) {
      if (v < 0 || v > 1 + kSlackTol)
        throw argument_error("valuation outside [0,1]");
      if (v > 0 && v < rho - kSlackTol)
        throw argument_error("non-zero valuation below rho");
    }
  }
};

struct BidGrid {
  double step = 0.0;  // = delta * rho

  explicit BidGrid(double step_in) : step(step_in) {
    if (step <= 0) throw argument_error("BidGrid: step must be positive");
  }
  int levels() const { return static_cast<int>(std::floor(1.0 / step + kSlackTol)); }
  double bid(int level) const { return static_cast<double>(level) * step; }
  // closest grid multiple <= x
  double floor_to_grid(double x) const {
    return std::floor(x / step + kSlackTol) * step;
  }
  bool on_grid(double x) const {
    double k = x / step;
    return std::abs(k - std::round(k)) < 1e-7;
  }
};

// One single-item bid, or the empty strategy.
struct ItemBid {
  int item = -1;  // -1 encodes the empty strategy
  double amount = 0.0;
  bool empty() const { return item < 0 || amount <= 0.0; }
};

struct MatchingAllocation {
  std::vector<int> item_of;  // per player, -1 if none
  std::vector<double> payments;
  double welfare = 0.0;
};

// s highest positive bids per item win and pay their bid; ties go to the
// lowest player index.  Zero bids never win.
inline MatchingAllocation run_first_price(const std::vector<ItemBid>& bids,
                                          const std::vector<UnitDemandValuation>& values,
                                          int m, int supply, const BidGrid& grid) {
  int n = static_cast<int>(bids.size());
  MatchingAllocation alloc;
  alloc.item_of.assign(static_cast<std::size_t>(n), -1);
  alloc.payments.assign(static_cast<std::size_t>(n), 0.0);
  for (const auto& b : bids)
    if (!b.empty() && !grid.on_grid(b.amount))
      throw argument_error("run_first_price: off-grid bid");
  for (int j = 0; j < m; ++j) {
    std::vector<std::pair<double, int>> cand;  // (bid, player)
    for (int i = 0; i < n; ++i)
      if (!bids[static_cast<std::size_t>(i)].empty() &&
          bids[static_cast<std::size_t>(i)].item == j)
        cand.emplace_back(bids[static_cast<std::size_t>(i)].amount, i);
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int w = 0; w < std::min<int>(supply, static_cast<int>(cand.size())); ++w) {
      int i = cand[static_cast<std::size_t>(w)].second;
      alloc.item_of[static_cast<std::size_t>(i)] = j;
      alloc.payments[static_cast<std::size_t>(i)] = cand[static_cast<std::size_t>(w)].first;
      alloc.welfare += values[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)];
    }
  }
  return alloc;
}

// Deviation from the discrete-bid smoothness proof: bid half the value of the
// benchmark item (floored to the grid), zero elsewhere; the empty strategy
// when the benchmark allocates nothing.
inline ItemBid smoothness_deviation(const UnitDemandValuation& v, int benchmark_item,
                                    const BidGrid& grid) {
  if (benchmark_item < 0) return {};
  double val = v.values[static_cast<std::size_t>(benchmark_item)];
  double b = grid.floor_to_grid(val / 2.0);
  if (b <= 0) return {};
  return {benchmark_item, b};
}

// ---------------------------------------------------------------------------
// Exact maximum-weight assignment (the Opt oracle).  Successive augmenting
// paths with Bellman-Ford on the residual graph; items are expanded into
// supply copies.  Players may stay unmatched, so augmentation stops when the
// best path gain drops to zero.
inline std::pair<double, std::vector<int>> optimal_matching(
    const std::vector<std::vector<double>>& values, int supply) {
  int n = static_cast<int>(values.size());
  int m = n > 0 ? static_cast<int>(values[0].size()) : 0;
  int slots = m * supply;
  std::vector<int> match_player(static_cast<std::size_t>(slots), -1);
  std::vector<int> match_slot(static_cast<std::size_t>(n), -1);
  auto item_of_slot = [&](int slot) { return slot / supply; };
  double total = 0.0;
  for (int round = 0; round < n; ++round) {
    // longest augmenting path from any free player to any free slot
    const double neg_inf = -1e18;
    std::vector<double> dist_p(static_cast<std::size_t>(n), neg_inf);
    std::vector<double> dist_s(static_cast<std::size_t>(slots), neg_inf);
    std::vector<int> from_p(static_cast<std::size_t>(slots), -1);
    for (int i = 0; i < n; ++i)
      if (match_slot[static_cast<std::size_t>(i)] < 0) dist_p[static_cast<std::size_t>(i)] = 0.0;
    for (int iter = 0; iter < n + slots + 1; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        if (dist_p[static_cast<std::size_t>(i)] <= neg_inf / 2) continue;
        for (int slot = 0; slot < slots; ++slot) {
          if (match_slot[static_cast<std::size_t>(i)] == slot) continue;
          double w = values[static_cast<std::size_t>(i)]
                           [static_cast<std::size_t>(item_of_slot(slot))];
          if (w <= 0) continue;
          double cand = dist_p[static_cast<std::size_t>(i)] + w;
          if (cand > dist_s[static_cast<std::size_t>(slot)] + 1e-12) {
            dist_s[static_cast<std::size_t>(slot)] = cand;
            from_p[static_cast<std::size_t>(slot)] = i;
            changed = true;
          }
        }
      }
      for (int slot = 0; slot < slots; ++slot) {
        int holder = match_player[static_cast<std::size_t>(slot)];
        if (holder < 0 || dist_s[static_cast<std::size_t>(slot)] <= neg_inf / 2) continue;
        double w = values[static_cast<std::size_t>(holder)]
                         [static_cast<std::size_t>(item_of_slot(slot))];
        double cand = dist_s[static_cast<std::size_t>(slot)] - w;
        if (cand > dist_p[static_cast<std::size_t>(holder)] + 1e-12) {
          dist_p[static_cast<std::size_t>(holder)] = cand;
          changed = true;
        }
      }
      if (!changed) break;
    }
    double best = 0.0;
    int best_slot = -1;
    for (int slot = 0; slot < slots; ++slot)
      if (match_player[static_cast<std::size_t>(slot)] < 0 &&
          dist_s[static_cast<std::size_t>(slot)] > best + 1e-12) {
        best = dist_s[static_cast<std::size_t>(slot)];
        best_slot = slot;
      }
    if (best_slot < 0) break;  // no positive-gain augmentation left
    total += best;
    // walk the alternating path back to the free player it started from
    int slot = best_slot;
    while (slot >= 0) {
      int i = from_p[static_cast<std::size_t>(slot)];
      int prev = match_slot[static_cast<std::size_t>(i)];
      match_slot[static_cast<std::size_t>(i)] = slot;
      match_player[static_cast<std::size_t>(slot)] = i;
      slot = prev;
    }
  }
  std::vector<int> item_of(static_cast<std::size_t>(n), -1);
  double welfare = 0.0;
  for (int i = 0; i < n; ++i)
    if (match_slot[static_cast<std::size_t>(i)] >= 0) {
      item_of[static_cast<std::size_t>(i)] = item_of_slot(match_slot[static_cast<std::size_t>(i)]);
      welfare += values[static_cast<std::size_t>(i)]
                       [static_cast<std::size_t>(item_of[static_cast<std::size_t>(i)])];
    }
  return {welfare, item_of};
}

// ---------------------------------------------------------------------------
// Greedy-layered stable benchmark.

// 0 if value == 0; otherwise the largest l >= 1 with value >= rho(1+eps)^(l-1).
inline int layer_of(double value, double rho, double eps) {
  if (value == 0.0) return 0;
  if (value < rho - 1e-12)
    throw argument_error("layer_of: value in (0, rho)");
  if (eps <= 0 || eps > 1.0 + kSlackTol)
    throw argument_error("layer_of: eps outside (0, 1]");
  int l = 1;
  double threshold = rho * (1.0 + eps);
  while (value + 1e-12 >= threshold) {
    ++l;
    threshold *= 1.0 + eps;
  }
  return l;
}

inline int max_layer(double rho, double eps) {
  return layer_of(1.0, rho, eps);
}

struct LayeredChange {
  int player = -1;
  int from_item = -1;  // -1 = was unassigned
  int to_item = -1;    // -1 = became unassigned
  int phi_delta = 0;
};

// Greedy matching on layered values with incumbent-favoring (strict) moves.
// Items carry `supply` copies; a slot is (item, copy).
class LayeredState {
 public:
  LayeredState(std::vector<UnitDemandValuation> values, int m, int supply,
               double rho, double eps)
      : m_(m), supply_(supply), rho_(rho), eps_(eps), values_(std::move(values)) {
    int n = static_cast<int>(values_.size());
    layers_.assign(static_cast<std::size_t>(n), {});
    for (int i = 0; i < n; ++i) refresh_layers(i);
    assign_.assign(static_cast<std::size_t>(n), -1);
    holder_.assign(static_cast<std::size_t>(m_) * static_cast<std::size_t>(supply_), -1);
    active_.assign(static_cast<std::size_t>(n), true);
    rebuild_greedy();
  }

  int players() const { return static_cast<int>(values_.size()); }
  int items() const { return m_; }
  int item_of(int player) const {
    int slot = assign_[static_cast<std::size_t>(player)];
    return slot < 0 ? -1 : slot / supply_;
  }
  const UnitDemandValuation& valuation(int player) const {
    return values_[static_cast<std::size_t>(player)];
  }

  double welfare() const {
    double w = 0.0;
    for (int i = 0; i < players(); ++i) {
      int j = item_of(i);
      if (j >= 0) w += values_[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)];
    }
    return w;
  }

  int phi() const {
    int total = 0;
    for (std::size_t slot = 0; slot < holder_.size(); ++slot) {
      int i = holder_[slot];
      if (i >= 0)
        total += layers_[static_cast<std::size_t>(i)]
                        [static_cast<std::size_t>(static_cast<int>(slot) / supply_)];
    }
    return total;
  }

  // Frees the player's slot (if any), then cascades free slots to the best
  // strictly-eligible players.  Returns the changes; the first entry is the
  // departure itself when the player held an item.
  std::vector<LayeredChange> depart(int player) {
    std::vector<LayeredChange> log;
    active_[static_cast<std::size_t>(player)] = false;
    int slot = assign_[static_cast<std::size_t>(player)];
    if (slot >= 0) {
      int j = slot / supply_;
      assign_[static_cast<std::size_t>(player)] = -1;
      holder_[static_cast<std::size_t>(slot)] = -1;
      log.push_back({player, j, -1,
                     -layers_[static_cast<std::size_t>(player)][static_cast<std::size_t>(j)]});
      settle_free_slot(slot, log);
    }
    return log;
  }

  // New participant in the slot: installs her values, then she takes her best
  // eligible item, displacing strictly lower layers, cascading displaced
  // players the same way.
  std::vector<LayeredChange> arrive(int player, UnitDemandValuation values) {
    if (assign_[static_cast<std::size_t>(player)] >= 0)
      throw argument_error("LayeredState::arrive: slot still assigned");
    values.validate(rho_);
    values_[static_cast<std::size_t>(player)] = std::move(values);
    refresh_layers(player);
    active_[static_cast<std::size_t>(player)] = true;
    std::vector<LayeredChange> log;
    int current = player;
    while (true) {
      auto [best_layer, best_slot] = best_eligible_slot(current);
      if (best_slot < 0) break;
      int displaced = holder_[static_cast<std::size_t>(best_slot)];
      int j = best_slot / supply_;
      holder_[static_cast<std::size_t>(best_slot)] = current;
      assign_[static_cast<std::size_t>(current)] = best_slot;
      int gained = layers_[static_cast<std::size_t>(current)][static_cast<std::size_t>(j)];
      if (displaced < 0) {
        log.push_back({current, -1, j, gained});
        break;
      }
      int lost = layers_[static_cast<std::size_t>(displaced)][static_cast<std::size_t>(j)];
      assign_[static_cast<std::size_t>(displaced)] = -1;
      log.push_back({current, -1, j, gained - lost});
      log.push_back({displaced, j, -1, 0});
      current = displaced;
    }
    return log;
  }

  std::vector<LayeredChange> turnover(int player, UnitDemandValuation values) {
    auto log = depart(player);
    auto more = arrive(player, std::move(values));
    log.insert(log.end(), more.begin(), more.end());
    return log;
  }

  // Consistency: slot bookkeeping matches, layers within range, phi matches.
  void validate() const {
    for (int i = 0; i < players(); ++i) {
      int slot = assign_[static_cast<std::size_t>(i)];
      if (slot >= 0 && holder_[static_cast<std::size_t>(slot)] != i)
        throw argument_error("LayeredState: assignment tables disagree");
    }
    int cap = max_layer(rho_, eps_);
    for (std::size_t slot = 0; slot < holder_.size(); ++slot) {
      int i = holder_[slot];
      if (i < 0) continue;
      int j = static_cast<int>(slot) / supply_;
      int l = layers_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (l < 1 || l > cap) throw argument_error("LayeredState: layer out of range");
    }
  }

 private:
  void refresh_layers(int i) {
    auto& row = layers_[static_cast<std::size_t>(i)];
    row.assign(static_cast<std::size_t>(m_), 0);
    for (int j = 0; j < m_; ++j)
      row[static_cast<std::size_t>(j)] =
          layer_of(values_[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)],
                   rho_, eps_);
  }

  // Min layer over an item's copies; also reports a slot realizing it
  // (a free copy counts as layer 0, lowest copy index wins ties).
  std::pair<int, int> weakest_slot(int item) const {
    int best_layer = std::numeric_limits<int>::max();
    int best_slot = -1;
    for (int c = 0; c < supply_; ++c) {
      int slot = item * supply_ + c;
      int h = holder_[static_cast<std::size_t>(slot)];
      int l = h < 0 ? 0
                    : layers_[static_cast<std::size_t>(h)][static_cast<std::size_t>(item)];
      if (l < best_layer) {
        best_layer = l;
        best_slot = slot;
      }
    }
    return {best_layer, best_slot};
  }

  // Best item the player can enter: strictly above her current layer and
  // strictly above the weakest copy holder (>=1 for a free copy).
  std::pair<int, int> best_eligible_slot(int player) const {
    int own = 0;
    int own_slot = assign_[static_cast<std::size_t>(player)];
    if (own_slot >= 0)
      own = layers_[static_cast<std::size_t>(player)]
                   [static_cast<std::size_t>(own_slot / supply_)];
    int best_layer = 0;
    int best_slot = -1;
    for (int j = 0; j < m_; ++j) {
      int l = layers_[static_cast<std::size_t>(player)][static_cast<std::size_t>(j)];
      if (l < 1 || l <= own) continue;
      auto [weak_layer, weak_slot] = weakest_slot(j);
      if (l <= weak_layer) continue;
      if (l > best_layer) {
        best_layer = l;
        best_slot = weak_slot;
      }
    }
    return {best_layer, best_slot};
  }

  void settle_free_slot(int slot, std::vector<LayeredChange>& log) {
    while (slot >= 0) {
      int j = slot / supply_;
      int best_layer = 0, best_player = -1;
      for (int i = 0; i < players(); ++i) {
        if (!active_[static_cast<std::size_t>(i)]) continue;
        int l = layers_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (l < 1) continue;
        int own = 0;
        int own_slot = assign_[static_cast<std::size_t>(i)];
        if (own_slot >= 0)
          own = layers_[static_cast<std::size_t>(i)]
                       [static_cast<std::size_t>(own_slot / supply_)];
        if (l <= own) continue;
        if (l > best_layer) {
          best_layer = l;
          best_player = i;
        }
      }
      if (best_player < 0) return;
      int old_slot = assign_[static_cast<std::size_t>(best_player)];
      int old_item = old_slot < 0 ? -1 : old_slot / supply_;
      int old_layer =
          old_item < 0 ? 0
                       : layers_[static_cast<std::size_t>(best_player)]
                                [static_cast<std::size_t>(old_item)];
      if (old_slot >= 0) holder_[static_cast<std::size_t>(old_slot)] = -1;
      assign_[static_cast<std::size_t>(best_player)] = slot;
      holder_[static_cast<std::size_t>(slot)] = best_player;
      log.push_back({best_player, old_item, j, best_layer - old_layer});
      slot = old_slot;
    }
  }

  void rebuild_greedy() {
    struct Entry {
      int layer, player, item;
    };
    std::vector<Entry> order;
    for (int i = 0; i < players(); ++i)
      for (int j = 0; j < m_; ++j) {
        int l = layers_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (l >= 1) order.push_back({l, i, j});
      }
    std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
      if (a.layer != b.layer) return a.layer > b.layer;
      if (a.player != b.player) return a.player < b.player;
      return a.item < b.item;
    });
    std::vector<int> used(static_cast<std::size_t>(m_), 0);
    for (const auto& e : order) {
      if (assign_[static_cast<std::size_t>(e.player)] >= 0) continue;
      if (used[static_cast<std::size_t>(e.item)] >= supply_) continue;
      int slot = e.item * supply_ + used[static_cast<std::size_t>(e.item)];
      ++used[static_cast<std::size_t>(e.item)];
      assign_[static_cast<std::size_t>(e.player)] = slot;
      holder_[static_cast<std::size_t>(slot)] = e.player;
    }
  }

  int m_, supply_;
  double rho_, eps_;
  std::vector<UnitDemandValuation> values_;
  std::vector<std::vector<int>> layers_;
  std::vector<int> assign_;   // player -> slot
  std::vector<int> holder_;   // slot -> player
  std::vector<bool> active_;
};

inline LayeredState greedy_layered_init(std::vector<UnitDemandValuation> values,
                                        int m, int supply, double rho, double eps) {
  return LayeredState(std::move(values), m, supply, rho, eps);
}

// ---------------------------------------------------------------------------
// Bound game adapter for the generic smoothness/Nash machinery.

// Strategy encoding: 0 = empty; k >= 1 maps to (item, level) pairs in item-major
// order.  With cap_to_value, only bids at most the player's value are offered,
// which keeps utilities in [0,1] by construction.
class MatchingBoundGame {
 public:
  MatchingBoundGame(std::vector<UnitDemandValuation> values, int m, int supply,
                    BidGrid grid, bool cap_to_value = true)
      : m_(m), supply_(supply), grid_(grid), values_(std::move(values)) {
    for (const auto& v : values_) {
      std::vector<ItemBid> list;
      list.push_back({});  // empty strategy
      for (int j = 0; j < m_; ++j)
        for (int level = 1; level <= grid_.levels(); ++level) {
          double b = grid_.bid(level);
          if (cap_to_value && b > v.values[static_cast<std::size_t>(j)] + kSlackTol)
            break;
          list.push_back({j, b});
        }
      strategies_.push_back(std::move(list));
    }
  }

  GameKind kind() const { return GameKind::mechanism; }
  int players() const { return static_cast<int>(values_.size()); }
  int strategy_count(int i) const {
    return static_cast<int>(strategies_[static_cast<std::size_t>(i)].size());
  }
  const ItemBid& strategy(int i, int s) const {
    return strategies_[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
  }
  // strategy index of (item, amount); -1 if absent
  int find_strategy(int i, const ItemBid& bid) const {
    const auto& list = strategies_[static_cast<std::size_t>(i)];
    if (bid.empty()) return 0;
    for (std::size_t s = 1; s < list.size(); ++s)
      if (list[s].item == bid.item && std::abs(list[s].amount - bid.amount) < 1e-9)
        return static_cast<int>(s);
    return -1;
  }

  Outcome evaluate(const StrategyProfile& s) const {
    std::vector<ItemBid> bids;
    bids.reserve(s.size());
    for (int i = 0; i < players(); ++i)
      bids.push_back(strategy(i, s[static_cast<std::size_t>(i)]));
    auto alloc = run_first_price(bids, values_, m_, supply_, grid_);
    Outcome out;
    out.payoff.resize(static_cast<std::size_t>(players()));
    out.payments = alloc.payments;
    for (int i = 0; i < players(); ++i) {
      int j = alloc.item_of[static_cast<std::size_t>(i)];
      out.payoff[static_cast<std::size_t>(i)] =
          j < 0 ? 0.0
                : values_[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)] -
                      alloc.payments[static_cast<std::size_t>(i)];
    }
    return out;
  }

  const BidGrid& grid() const { return grid_; }
  int items() const { return m_; }
  int supply() const { return supply_; }
  const std::vector<UnitDemandValuation>& values() const { return values_; }

 private:
  int m_, supply_;
  BidGrid grid_;
  std::vector<UnitDemandValuation> values_;
  std::vector<std::vector<ItemBid>> strategies_;
};

// Deviation profile for verify_smoothness from a benchmark assignment.
inline std::vector<MixedStrategy> matching_deviation_profile(
    const MatchingBoundGame& game, const std::vector<int>& benchmark_item) {
  std::vector<MixedStrategy> dev;
  for (int i = 0; i < game.players(); ++i) {
    ItemBid b = smoothness_deviation(game.values()[static_cast<std::size_t>(i)],
                                     benchmark_item[static_cast<std::size_t>(i)],
                                     game.grid());
    int idx = game.find_strategy(i, b);
    if (idx < 0) throw argument_error("matching deviation not in strategy set");
    dev.push_back(pure(idx));
  }
  return dev;
}

inline double assignment_welfare(const std::vector<UnitDemandValuation>& values,
                                 const std::vector<int>& item_of) {
  double w = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (item_of[i] >= 0) w += values[i].values[static_cast<std::size_t>(item_of[i])];
  return w;
}

}  // namespace dynpop
