#pragma once

// Core stage-game abstractions: social objective, solution-based smoothness
// verification, pure-Nash enumeration, stability accounting and the
// right-hand-side evaluators for the efficiency theorems.
//
// A "bound game" is a stage game fixed at one type profile.  Generic
// operations are templated on a BoundGame type exposing:
//
//   GameKind kind() const;
//   int players() const;
//   int strategy_count(int i) const;
//   Outcome evaluate(const StrategyProfile&) const;
//
// Outcome::payoff holds costs for cost games and utilities for mechanisms;
// Outcome::payments is empty for cost games.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "dynpop/common.hpp"

namespace dynpop {

enum class GameKind { cost_game, mechanism };

using StrategyProfile = std::vector<int>;

struct Outcome {
  std::vector<double> payoff;    // c_i or u_i
  std::vector<double> payments;  // P_i, mechanisms only
};

struct SmoothnessParams {
  double lambda = 0.0;
  double mu = 0.0;
};

// One atom list per player; a deterministic deviation is a single atom.
using MixedStrategy = std::vector<std::pair<int, double>>;

inline MixedStrategy pure(int strategy) { return {{strategy, 1.0}}; }

namespace detail {

template <class G>
std::uint64_t profile_space_size(const G& game) {
  std::uint64_t prod = 1;
  for (int i = 0; i < game.players(); ++i) {
    int c = game.strategy_count(i);
    if (c <= 0) throw argument_error("empty strategy set");
    prod *= static_cast<std::uint64_t>(c);
    if (prod > kEnumerationGuard)
      throw capacity_error("profile space exceeds enumeration guard");
  }
  return prod;
}

// Odometer walk over the full profile space.
template <class G, class F>
void for_each_profile(const G& game, F&& fn) {
  profile_space_size(game);
  int n = game.players();
  StrategyProfile s(n, 0);
  while (true) {
    fn(const_cast<const StrategyProfile&>(s));
    int i = 0;
    while (i < n) {
      if (++s[i] < game.strategy_count(i)) break;
      s[i] = 0;
      ++i;
    }
    if (i == n) break;
  }
}

}  // namespace detail

// C(s;v) for cost games, W(s;v) = sum_i u_i + sum_i P_i for mechanisms.
template <class G>
double social_objective(const G& game, const StrategyProfile& s) {
  if (static_cast<int>(s.size()) != game.players())
    throw argument_error("social_objective: profile dimension mismatch");
  Outcome out = game.evaluate(s);
  double total = std::accumulate(out.payoff.begin(), out.payoff.end(), 0.0);
  if (game.kind() == GameKind::mechanism)
    total += std::accumulate(out.payments.begin(), out.payments.end(), 0.0);
  return total;
}

struct SmoothnessReport {
  bool holds = false;
  double min_slack = 0.0;       // min over profiles of (inequality slack)
  StrategyProfile worst_profile;
};

// Checks the solution-based smoothness inequality by exhausting the profile
// space.  benchmark_value is C(x;v) or W(x;v) of the reference solution; the
// deviation may be randomized (expectation is exact over the atoms).
template <class G>
SmoothnessReport verify_smoothness(const G& game, const SmoothnessParams& params,
                                   double benchmark_value,
                                   const std::vector<MixedStrategy>& deviation) {
  int n = game.players();
  if (static_cast<int>(deviation.size()) != n)
    throw argument_error("verify_smoothness: deviation dimension mismatch");
  if (game.kind() == GameKind::cost_game && params.mu >= 1.0)
    throw argument_error("verify_smoothness: cost games need mu < 1");
  SmoothnessReport report;
  report.holds = true;
  report.min_slack = std::numeric_limits<double>::infinity();
  detail::for_each_profile(game, [&](const StrategyProfile& s) {
    Outcome base = game.evaluate(s);
    double dev_total = 0.0;
    StrategyProfile probe = s;
    for (int i = 0; i < n; ++i) {
      double e = 0.0;
      for (const auto& [strat, prob] : deviation[i]) {
        probe[i] = strat;
        e += prob * game.evaluate(probe).payoff[static_cast<std::size_t>(i)];
      }
      probe[i] = s[i];
      dev_total += e;
    }
    double slack;
    if (game.kind() == GameKind::cost_game) {
      double cost_s = std::accumulate(base.payoff.begin(), base.payoff.end(), 0.0);
      slack = params.lambda * benchmark_value + params.mu * cost_s - dev_total;
    } else {
      double revenue =
          std::accumulate(base.payments.begin(), base.payments.end(), 0.0);
      slack = dev_total - (params.lambda * benchmark_value - params.mu * revenue);
    }
    if (slack < report.min_slack) {
      report.min_slack = slack;
      report.worst_profile = s;
    }
  });
  report.holds = report.min_slack >= -kSlackTol;
  return report;
}

// Exact set of pure Nash equilibria (no strictly improving unilateral move).
template <class G>
std::vector<StrategyProfile> enumerate_pure_nash(const G& game) {
  const bool cost = game.kind() == GameKind::cost_game;
  std::vector<StrategyProfile> result;
  detail::for_each_profile(game, [&](const StrategyProfile& s) {
    Outcome base = game.evaluate(s);
    StrategyProfile probe = s;
    for (int i = 0; i < game.players(); ++i) {
      double own = base.payoff[static_cast<std::size_t>(i)];
      for (int alt = 0; alt < game.strategy_count(i); ++alt) {
        if (alt == s[i]) continue;
        probe[i] = alt;
        double dev = game.evaluate(probe).payoff[static_cast<std::size_t>(i)];
        bool improves = cost ? dev < own - kSlackTol : dev > own + kSlackTol;
        if (improves) {
          probe[i] = s[i];
          return;
        }
      }
      probe[i] = s[i];
    }
    result.push_back(s);
  });
  return result;
}

// True iff every pure NE meets the smoothness-implied bound against the
// benchmark value: C <= lambda/(1-mu) * C(x) or W >= lambda/max(1,mu) * W(x).
template <class G>
bool poa_bound_check(const G& game, const SmoothnessParams& params,
                     double benchmark_value) {
  auto equilibria = enumerate_pure_nash(game);
  for (const auto& s : equilibria) {
    double obj = social_objective(game, s);
    if (game.kind() == GameKind::cost_game) {
      double bound = params.lambda / (1.0 - params.mu) * benchmark_value;
      if (obj > bound + kSlackTol) return false;
    } else {
      double bound = params.lambda / std::max(1.0, params.mu) * benchmark_value;
      if (obj < bound - kSlackTol) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Stability accounting.

// Per-player outcome tokens; kEmpty marks the empty allocation.
struct Solution {
  static constexpr std::int64_t kEmpty = -1;
  std::vector<std::int64_t> x;
};

struct StabilityLedger {
  std::vector<std::int64_t> k;      // changes in x_i or v_i
  std::vector<std::int64_t> kappa;  // x_i changes + type changes while allocated
  double mean_k() const {
    double s = 0;
    for (auto v : k) s += static_cast<double>(v);
    return k.empty() ? 0.0 : s / static_cast<double>(k.size());
  }
  double mean_kappa() const {
    double s = 0;
    for (auto v : kappa) s += static_cast<double>(v);
    return kappa.empty() ? 0.0 : s / static_cast<double>(kappa.size());
  }
};

// Replays the definitional counting over a (type, solution) sequence.  Type
// identity is by token value.  A step where both the solution and the type of
// an allocated player change adds 1 to k_i and 2 to kappa_i.
inline StabilityLedger stability_counts(
    const std::vector<std::pair<std::vector<std::int64_t>, Solution>>& seq) {
  if (seq.empty()) throw argument_error("stability_counts: empty sequence");
  std::size_t n = seq.front().first.size();
  for (const auto& [v, x] : seq)
    if (v.size() != n || x.x.size() != n)
      throw argument_error("stability_counts: inconsistent dimensions");
  StabilityLedger ledger;
  ledger.k.assign(n, 0);
  ledger.kappa.assign(n, 0);
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    const auto& [v0, x0] = seq[t];
    const auto& [v1, x1] = seq[t + 1];
    for (std::size_t i = 0; i < n; ++i) {
      bool xchg = x0.x[i] != x1.x[i];
      bool vchg = v0[i] != v1[i];
      if (xchg || vchg) ledger.k[i] += 1;
      if (xchg) ledger.kappa[i] += 1;
      if (vchg && x0.x[i] != Solution::kEmpty) ledger.kappa[i] += 1;
    }
  }
  return ledger;
}

// ---------------------------------------------------------------------------
// Theorem right-hand sides.

enum class TheoremKind { cost, mech, improved_mech };

struct TheoremInputs {
  double lambda = 0.0;
  double mu = 0.0;
  double alpha = 1.0;   // benchmark approximation factor
  double c_r = 1.0;     // adaptive-regret envelope constant
  double n = 0.0;
  double m = 0.0;
  double t = 0.0;       // horizon
  double n_strategies = 0.0;
  double k = 0.0;       // stability (mean changes per player)
  double sum_opt = 0.0;
};

inline double theorem_rhs(TheoremKind kind, const TheoremInputs& in) {
  if (in.t <= 0 || in.n_strategies <= 0 || in.n <= 0)
    throw argument_error("theorem_rhs: positive T, N, n required");
  double log_nt = std::log(in.n_strategies * in.t);
  switch (kind) {
    case TheoremKind::cost: {
      if (in.mu >= 1.0) throw argument_error("theorem_rhs: cost needs mu < 1");
      double regret = in.n / (1.0 - in.mu) * in.c_r *
                      std::sqrt(in.t * (in.k + 1.0) * log_nt);
      return in.lambda * in.alpha / (1.0 - in.mu) * in.sum_opt + regret;
    }
    case TheoremKind::mech: {
      double regret = in.n * in.c_r * std::sqrt(in.t * (in.k + 1.0) * log_nt);
      return in.lambda / (in.alpha * std::max(1.0, in.mu)) * in.sum_opt - regret;
    }
    case TheoremKind::improved_mech: {
      double regret =
          in.c_r * std::sqrt(in.t * in.m * (in.k * in.n + in.m) * log_nt);
      return in.lambda / (in.alpha * std::max(1.0, in.mu)) * in.sum_opt - regret;
    }
  }
  throw argument_error("theorem_rhs: unknown theorem kind");
}

// ---------------------------------------------------------------------------
// Explicit-table stage game, mainly for tests and tiny examples.

class TableGame {
 public:
  TableGame(GameKind kind, std::vector<int> strategy_counts,
            std::function<Outcome(const StrategyProfile&)> eval)
      : kind_(kind), counts_(std::move(strategy_counts)), eval_(std::move(eval)) {}

  GameKind kind() const { return kind_; }
  int players() const { return static_cast<int>(counts_.size()); }
  int strategy_count(int i) const { return counts_[static_cast<std::size_t>(i)]; }
  Outcome evaluate(const StrategyProfile& s) const { return eval_(s); }

 private:
  GameKind kind_;
  std::vector<int> counts_;
  std::function<Outcome(const StrategyProfile&)> eval_;
};

}  // namespace dynpop
