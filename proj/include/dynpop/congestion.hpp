#pragma once

// Atomic congestion games with linear or polynomial latencies: cost
// evaluation, brute-force Opt oracle, the benchmark-play smoothness
// deviation, Rosenthal potential, and cost scaling for learner losses.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dynpop/common.hpp"
#include "dynpop/game.hpp"

namespace dynpop {

// latency a*x + b, or a general polynomial sum_j coeffs[j] * x^j.
struct Latency {
  std::vector<double> coeffs;  // coeffs[j] multiplies x^j

  static Latency linear(double a, double b) { return {{b, a}}; }

  double operator()(int x) const {
    double pw = 1.0, total = 0.0;
    for (double c : coeffs) {
      total += c * pw;
      pw *= static_cast<double>(x);
    }
    return total;
  }

  double a_plus_b() const {
    double s = 0.0;
    for (double c : coeffs) s += c;
    return s;  // l(1)
  }

  void validate() const {
    if (coeffs.empty()) throw argument_error("Latency: no coefficients");
    for (double c : coeffs)
      if (c < 0) throw argument_error("Latency: negative coefficient");
    bool positive_lead = false;
    for (std::size_t j = 1; j < coeffs.size(); ++j)
      if (coeffs[j] > 0) positive_lead = true;
    if (!positive_lead) throw argument_error("Latency: needs a positive degree term");
  }
};

// Per-type strategy sets are explicit element subsets.
struct CongestionType {
  std::vector<std::vector<int>> strategies;
};

class CongestionGame {
 public:
  CongestionGame(std::vector<Latency> elements, std::vector<CongestionType> types)
      : elements_(std::move(elements)), types_(std::move(types)) {
    for (const auto& e : elements_) e.validate();
    for (const auto& t : types_) {
      if (t.strategies.empty())
        throw argument_error("CongestionGame: type with empty strategy set");
      for (const auto& s : t.strategies)
        for (int e : s)
          if (e < 0 || e >= static_cast<int>(elements_.size()))
            throw argument_error("CongestionGame: bad element index");
    }
  }

  int element_count() const { return static_cast<int>(elements_.size()); }
  int type_count() const { return static_cast<int>(types_.size()); }
  const Latency& latency(int e) const { return elements_[static_cast<std::size_t>(e)]; }
  const CongestionType& type(int v) const { return types_[static_cast<std::size_t>(v)]; }

  int max_strategy_size() const {
    std::size_t m = 1;
    for (const auto& t : types_)
      for (const auto& s : t.strategies) m = std::max(m, s.size());
    return static_cast<int>(m);
  }

  double max_latency_l1() const {
    double v = 0.0;
    for (const auto& e : elements_) v = std::max(v, e.a_plus_b());
    return v;
  }

 private:
  std::vector<Latency> elements_;
  std::vector<CongestionType> types_;
};

struct CongestionCosts {
  std::vector<int> load;        // x_e
  std::vector<double> player;   // c_i
  double social = 0.0;          // C = sum_i c_i
};

// c_i = sum over selected elements of l_e(x_e) with x_e the selection count.
inline CongestionCosts congestion_costs(const CongestionGame& game,
                                        const std::vector<int>& type_of,
                                        const StrategyProfile& s) {
  std::size_t n = type_of.size();
  if (s.size() != n) throw argument_error("congestion_costs: dimension mismatch");
  CongestionCosts out;
  out.load.assign(static_cast<std::size_t>(game.element_count()), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& strat = game.type(type_of[i]).strategies;
    if (s[i] < 0 || s[i] >= static_cast<int>(strat.size()))
      throw argument_error("congestion_costs: invalid strategy index");
    for (int e : strat[static_cast<std::size_t>(s[i])])
      out.load[static_cast<std::size_t>(e)] += 1;
  }
  out.player.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int e : game.type(type_of[i]).strategies[static_cast<std::size_t>(s[i])])
      out.player[i] += game.latency(e)(out.load[static_cast<std::size_t>(e)]);
  for (double c : out.player) out.social += c;
  return out;
}

// Scale that keeps every per-player cost in [0,1]: a player uses at most
// max_strategy_size elements, each costing at most l_e(n) <= n * l_e(1).
inline double cost_scale(const CongestionGame& game, int n) {
  double per_element = 0.0;
  for (int e = 0; e < game.element_count(); ++e)
    per_element = std::max(per_element, game.latency(e)(n));
  return std::max(1e-12, per_element * game.max_strategy_size());
}

// Bound-game adapter; payoffs are raw (unscaled) costs.
class CongestionBoundGame {
 public:
  CongestionBoundGame(const CongestionGame* game, std::vector<int> type_of)
      : game_(game), type_of_(std::move(type_of)) {}

  GameKind kind() const { return GameKind::cost_game; }
  int players() const { return static_cast<int>(type_of_.size()); }
  int strategy_count(int i) const {
    return static_cast<int>(
        game_->type(type_of_[static_cast<std::size_t>(i)]).strategies.size());
  }
  Outcome evaluate(const StrategyProfile& s) const {
    auto costs = congestion_costs(*game_, type_of_, s);
    Outcome out;
    out.payoff = std::move(costs.player);
    return out;
  }

  const CongestionGame& game() const { return *game_; }
  const std::vector<int>& types() const { return type_of_; }

 private:
  const CongestionGame* game_;
  std::vector<int> type_of_;
};

// Exact Opt over joint profiles (enumeration guard applies).  Incumbent
// preference: among cost-equal minimizers, the profile with the fewest
// differences from `previous` wins (then lexicographic order).
inline std::pair<double, StrategyProfile> brute_force_opt(
    const CongestionBoundGame& game, const StrategyProfile* previous = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  StrategyProfile best_profile;
  int best_dist = std::numeric_limits<int>::max();
  detail::for_each_profile(game, [&](const StrategyProfile& s) {
    double c = 0.0;
    for (double ci : game.evaluate(s).payoff) c += ci;
    int dist = 0;
    if (previous)
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] != (*previous)[i]) ++dist;
    if (c < best - kSlackTol || (c < best + kSlackTol && dist < best_dist)) {
      best = std::min(best, c);
      best_profile = s;
      best_dist = dist;
    }
  });
  return {best, best_profile};
}

// The smoothness deviation for congestion games plays the benchmark set.
inline int congestion_deviation(const CongestionBoundGame& game, int i,
                                const std::vector<int>& benchmark) {
  int idx = benchmark[static_cast<std::size_t>(i)];
  if (idx < 0 || idx >= game.strategy_count(i))
    throw argument_error("congestion_deviation: benchmark infeasible for type");
  return idx;
}

// Rosenthal potential: sum_e sum_{k=1..x_e} l_e(k).  Its local minima are
// pure Nash equilibria.
inline double rosenthal_potential(const CongestionGame& game,
                                  const std::vector<int>& type_of,
                                  const StrategyProfile& s) {
  auto costs = congestion_costs(game, type_of, s);
  double phi = 0.0;
  for (int e = 0; e < game.element_count(); ++e)
    for (int k = 1; k <= costs.load[static_cast<std::size_t>(e)]; ++k)
      phi += game.latency(e)(k);
  return phi;
}

}  // namespace dynpop
