#pragma once

// Total-variation machinery: stable-sequence sampling from a distribution
// sequence via maximal couplings, a toy exponential-mechanism matcher,
// joint-DP measurement and the failure-patch transform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "dynpop/common.hpp"
#include "dynpop/distribution.hpp"
#include "dynpop/game.hpp"

namespace dynpop {

struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
  double beta = 0.0;

  void validate() const {
    if (epsilon < 0) throw argument_error("PrivacyParams: epsilon < 0");
    if (delta < 0 || delta > 1) throw argument_error("PrivacyParams: delta outside [0,1]");
    if (beta < 0 || beta > 1) throw argument_error("PrivacyParams: beta outside [0,1]");
  }
};

// x^1 ~ sigma^1; outside change_steps the outcome is copied (the distributions
// must match there); at change step t the next outcome is drawn from the
// maximal-coupling conditional given x^t, so every per-step marginal is
// sigma^t and Pr[x^{t+1} != x^t] equals the tv distance.
inline std::vector<int> stable_sequence_sample(
    const std::vector<FiniteDistribution>& sigma, const std::set<int>& change_steps,
    Rng& rng) {
  if (sigma.empty()) throw argument_error("stable_sequence_sample: empty sequence");
  std::size_t space = sigma.front().size();
  for (const auto& d : sigma)
    if (d.size() != space)
      throw argument_error("stable_sequence_sample: outcome spaces differ");
  std::vector<int> xs;
  xs.reserve(sigma.size());
  xs.push_back(sigma.front().sample(rng));
  for (std::size_t t = 0; t + 1 < sigma.size(); ++t) {
    if (change_steps.count(static_cast<int>(t)) == 0) {
      xs.push_back(xs.back());
      continue;
    }
    auto coupling = maximal_coupling(sigma[t], sigma[t + 1]);
    xs.push_back(coupling.sample_given_x(xs.back(), sigma[t], rng));
  }
  return xs;
}

// ---------------------------------------------------------------------------
// Exponential-mechanism matcher over enumerated feasible matchings.

// Outcome table: per outcome, each player's item (-1 = unallocated), items
// distinct up to supply.
inline std::vector<std::vector<int>> enumerate_matchings(int n, int m, int supply) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(n), -1);
  std::vector<int> used(static_cast<std::size_t>(m), 0);
  std::uint64_t guard = 1;
  for (int i = 0; i < n; ++i) {
    guard *= static_cast<std::uint64_t>(m + 1);
    if (guard > kEnumerationGuard)
      throw capacity_error("enumerate_matchings: space too large");
  }
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    rec(i + 1);
    for (int j = 0; j < m; ++j) {
      if (used[static_cast<std::size_t>(j)] >= supply) continue;
      used[static_cast<std::size_t>(j)] += 1;
      cur[static_cast<std::size_t>(i)] = j;
      rec(i + 1);
      cur[static_cast<std::size_t>(i)] = -1;
      used[static_cast<std::size_t>(j)] -= 1;
    }
  };
  rec(0);
  return out;
}

inline double matching_welfare(const std::vector<std::vector<double>>& values,
                               const std::vector<int>& item_of) {
  double w = 0.0;
  for (std::size_t i = 0; i < item_of.size(); ++i)
    if (item_of[i] >= 0) w += values[i][static_cast<std::size_t>(item_of[i])];
  return w;
}

// Pr[x] proportional to exp(eps * W(x;v) / 2); W has sensitivity <= 1 under a
// one-player change, so the full output is eps-differentially private, which
// implies joint DP.
inline FiniteDistribution exponential_matcher(
    const std::vector<std::vector<double>>& values,
    const std::vector<std::vector<int>>& outcomes, double eps) {
  FiniteDistribution dist;
  dist.p.reserve(outcomes.size());
  double max_w = 0.0;
  std::vector<double> ws;
  ws.reserve(outcomes.size());
  for (const auto& x : outcomes) {
    double w = matching_welfare(values, x);
    ws.push_back(w);
    max_w = std::max(max_w, w);
  }
  double total = 0.0;
  for (double w : ws) {
    double mass = std::exp(eps * (w - max_w) / 2.0);
    dist.p.push_back(mass);
    total += mass;
  }
  for (double& p : dist.p) p /= total;
  return dist;
}

// ---------------------------------------------------------------------------
// Privacy measurement.

struct MeasuredPrivacy {
  bool is_dp = true;      // false when no finite epsilon satisfies the bound
  double epsilon = 0.0;
};

namespace detail {

// Minimal eps with F(eps) = sum_w max(0, P(w) - e^eps Q(w)) <= delta.
// F is continuous and non-increasing in eps; on each segment between sorted
// likelihood ratios it is linear, so the crossing is exact.
inline MeasuredPrivacy min_eps_one_direction(const FiniteDistribution& p,
                                             const FiniteDistribution& q,
                                             double delta) {
  double zero_q_mass = 0.0;  // P-mass where Q = 0; no epsilon can cover it
  std::vector<std::pair<double, std::pair<double, double>>> ratios;  // (P/Q, (P,Q))
  for (std::size_t w = 0; w < p.size(); ++w) {
    if (q.p[w] <= 0.0) {
      zero_q_mass += p.p[w];
    } else if (p.p[w] > 0.0) {
      ratios.push_back({p.p[w] / q.p[w], {p.p[w], q.p[w]}});
    }
  }
  if (zero_q_mass > delta + kProbTol) return {false, 0.0};
  std::sort(ratios.begin(), ratios.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  auto f_of = [&](double z) {
    double f = zero_q_mass;
    for (const auto& [r, pq] : ratios)
      if (r > z) f += pq.first - z * pq.second;
    return f;
  };
  if (f_of(1.0) <= delta + kProbTol) return {true, 0.0};
  // walk the segments [r_{j+1}, r_j]; prefix sums give the linear pieces
  double sum_p = 0.0, sum_q = 0.0;
  for (std::size_t j = 0; j < ratios.size(); ++j) {
    sum_p += ratios[j].second.first;
    sum_q += ratios[j].second.second;
    double seg_hi = ratios[j].first;
    double seg_lo = (j + 1 < ratios.size()) ? ratios[j + 1].first : 0.0;
    double z = (zero_q_mass + sum_p - delta) / sum_q;  // F(z) == delta here
    if (z >= seg_lo - kProbTol && z <= seg_hi + kProbTol)
      return {true, std::log(std::max(1.0, z))};
  }
  return {true, std::log(std::max(1.0, ratios.empty() ? 1.0 : ratios.front().first))};
}

}  // namespace detail

// Measured epsilon of a mechanism across explicit neighbor pairs.  For
// delta = 0 this is the max |ln ratio| over outcomes (0/0 contributes 0;
// support mismatch means no finite epsilon works).  For delta > 0, the
// minimal epsilon satisfying the subset condition in both directions.
inline MeasuredPrivacy measure_privacy(
    const std::function<FiniteDistribution(const std::vector<int>&)>& mechanism,
    const std::vector<std::pair<std::vector<int>, std::vector<int>>>& neighbor_pairs,
    double delta) {
  MeasuredPrivacy out;
  for (const auto& [d0, d1] : neighbor_pairs) {
    FiniteDistribution p = mechanism(d0);
    FiniteDistribution q = mechanism(d1);
    if (p.size() != q.size())
      throw argument_error("measure_privacy: outcome spaces differ");
    if (delta == 0.0) {
      for (std::size_t w = 0; w < p.size(); ++w) {
        bool pz = p.p[w] <= 0.0, qz = q.p[w] <= 0.0;
        if (pz && qz) continue;
        if (pz || qz) return {false, 0.0};
        out.epsilon = std::max(out.epsilon, std::abs(std::log(p.p[w] / q.p[w])));
      }
    } else {
      auto fwd = detail::min_eps_one_direction(p, q, delta);
      auto bwd = detail::min_eps_one_direction(q, p, delta);
      if (!fwd.is_dp || !bwd.is_dp) return {false, 0.0};
      out.epsilon = std::max({out.epsilon, fwd.epsilon, bwd.epsilon});
    }
  }
  return out;
}

// Moves the flagged (failure) mass onto the designated optimal outcome.
inline FiniteDistribution failure_patch(const FiniteDistribution& dist,
                                        const std::vector<bool>& failure_flags,
                                        double beta, int opt_outcome) {
  if (failure_flags.size() != dist.size())
    throw argument_error("failure_patch: flag dimension mismatch");
  if (opt_outcome < 0 || static_cast<std::size_t>(opt_outcome) >= dist.size())
    throw argument_error("failure_patch: bad optimal outcome");
  double flagged = 0.0;
  for (std::size_t w = 0; w < dist.size(); ++w)
    if (failure_flags[w]) flagged += dist.p[w];
  if (flagged > beta + 1e-12)
    throw argument_error("failure_patch: flagged mass exceeds beta");
  FiniteDistribution out = dist;
  for (std::size_t w = 0; w < out.size(); ++w) {
    if (failure_flags[w] && w != static_cast<std::size_t>(opt_outcome)) {
      out.p[static_cast<std::size_t>(opt_outcome)] += out.p[w];
      out.p[w] = 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Privacy => stability, measured end to end.

struct PrivacyStabilityReport {
  double mean_k = 0.0;   // measured (1/n) sum_i k_i, averaged over seeds
  double bound = 0.0;    // pT(1 + n(2 eps + 2 beta + delta))
  bool holds = false;
};

// Runs the mechanism along a type sequence, decomposing each round transition
// into single-slot sub-transitions in slot order (intermediate solutions are
// discarded), coupling consecutive outputs maximally, and counting per-player
// changes in type or own outcome coordinate.
inline PrivacyStabilityReport privacy_stability_check(
    const std::function<FiniteDistribution(const std::vector<int>&)>& mechanism,
    const std::vector<std::vector<int>>& outcome_coords,  // [outcome][player]
    const std::vector<std::vector<int>>& type_sequence,   // [t][player]
    double p, const PrivacyParams& params, int n_seeds, Rng& rng) {
  params.validate();
  if (params.epsilon > 0.5)
    throw argument_error("privacy_stability_check: requires epsilon <= 1/2");
  if (type_sequence.empty())
    throw argument_error("privacy_stability_check: empty sequence");
  std::size_t n = type_sequence.front().size();
  int horizon = static_cast<int>(type_sequence.size());
  PrivacyStabilityReport report;
  report.bound = p * horizon *
                 (1.0 + static_cast<double>(n) *
                            (2.0 * params.epsilon + 2.0 * params.beta + params.delta));
  double total_mean_k = 0.0;
  for (int seed = 0; seed < n_seeds; ++seed) {
    Rng local = rng.fork(static_cast<std::uint64_t>(seed));
    std::vector<std::int64_t> k(n, 0);
    std::vector<int> types = type_sequence.front();
    FiniteDistribution current_dist = mechanism(types);
    int x = current_dist.sample(local);
    for (int t = 1; t < horizon; ++t) {
      const auto& next = type_sequence[static_cast<std::size_t>(t)];
      for (std::size_t i = 0; i < n; ++i) {
        if (next[i] == types[i]) continue;
        k[i] += 1;  // own type change
        types[i] = next[i];
        FiniteDistribution nd = mechanism(types);
        auto coupling = maximal_coupling(current_dist, nd);
        int x2 = coupling.sample_given_x(x, current_dist, local);
        for (std::size_t q = 0; q < n; ++q)
          if (outcome_coords[static_cast<std::size_t>(x2)][q] !=
              outcome_coords[static_cast<std::size_t>(x)][q])
            k[q] += 1;
        x = x2;
        current_dist = std::move(nd);
      }
    }
    double mean = 0.0;
    for (auto v : k) mean += static_cast<double>(v);
    total_mean_k += mean / static_cast<double>(n);
  }
  report.mean_k = total_mean_k / n_seeds;
  report.holds = report.mean_k <= report.bound + kSlackTol;
  return report;
}

}  // namespace dynpop
