#pragma once

// Explicit finite distributions over an enumerated outcome space, total
// variation distance and the maximal coupling construction.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dynpop/common.hpp"

namespace dynpop {

inline constexpr double kProbTol = 1e-12;

// Probability vector over outcome ids 0..size-1.  The ids index into a
// caller-owned outcome table; this class only sees the probabilities.
struct FiniteDistribution {
  std::vector<double> p;

  std::size_t size() const { return p.size(); }

  void validate() const {
    double sum = 0.0;
    for (double v : p) {
      if (v < -kProbTol) throw argument_error("FiniteDistribution: negative mass");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kProbTol)
      throw argument_error("FiniteDistribution: mass sums to " + format_double(sum));
  }

  int sample(Rng& rng) const { return sample_index(p, rng); }
};

// 0.5 * L1 distance.  Asserts agreement with the max_A(mu(A)-eta(A)) form.
inline double tv_distance(const FiniteDistribution& mu, const FiniteDistribution& eta) {
  if (mu.size() != eta.size())
    throw argument_error("tv_distance: outcome spaces differ");
  double l1 = 0.0, pos = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double d = mu.p[i] - eta.p[i];
    l1 += std::abs(d);
    if (d > 0) pos += d;
  }
  double half_l1 = 0.5 * l1;
  if (std::abs(half_l1 - pos) > 1e-9)
    throw argument_error("tv_distance: the two definitions disagree");
  return half_l1;
}

// Maximal coupling of (mu, eta): diagonal mass min(mu,eta); the residuals are
// coupled by the product of the normalized excess distributions.
struct MaximalCoupling {
  std::size_t n = 0;
  std::vector<double> diag;        // mass placed on (i, i)
  std::vector<double> mu_excess;   // normalized, empty when tv == 0
  std::vector<double> eta_excess;  // normalized
  double mismatch = 0.0;           // Pr[X != Y] == tv(mu, eta)

  double joint(std::size_t x, std::size_t y) const {
    double v = (x == y) ? diag[x] : 0.0;
    if (mismatch > 0)
      v += mismatch * mu_excess[x] * eta_excess[y];
    return v;
  }

  // Conditional sample of Y given X = x; preserves the eta marginal exactly.
  int sample_given_x(int x, const FiniteDistribution& mu, Rng& rng) const {
    if (mu.p[static_cast<std::size_t>(x)] <= 0.0)
      throw argument_error("maximal_coupling: conditioning on zero-probability outcome");
    double keep = diag[static_cast<std::size_t>(x)] / mu.p[static_cast<std::size_t>(x)];
    if (rng.uniform01() < keep) return x;
    return sample_index(eta_excess, rng);
  }
};

inline MaximalCoupling maximal_coupling(const FiniteDistribution& mu,
                                        const FiniteDistribution& eta) {
  if (mu.size() != eta.size())
    throw argument_error("maximal_coupling: outcome spaces differ");
  MaximalCoupling c;
  c.n = mu.size();
  c.diag.resize(c.n);
  double overlap = 0.0;
  for (std::size_t i = 0; i < c.n; ++i) {
    c.diag[i] = std::min(mu.p[i], eta.p[i]);
    overlap += c.diag[i];
  }
  c.mismatch = 1.0 - overlap;
  if (c.mismatch > kProbTol) {
    c.mu_excess.resize(c.n);
    c.eta_excess.resize(c.n);
    for (std::size_t i = 0; i < c.n; ++i) {
      c.mu_excess[i] = std::max(0.0, mu.p[i] - c.diag[i]) / c.mismatch;
      c.eta_excess[i] = std::max(0.0, eta.p[i] - c.diag[i]) / c.mismatch;
    }
  } else {
    c.mismatch = 0.0;
    c.mu_excess.assign(c.n, 0.0);
    c.eta_excess.assign(c.n, 0.0);
  }
  return c;
}

}  // namespace dynpop
