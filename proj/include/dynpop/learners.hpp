#pragma once

// Online learners over finite strategy sets with full-information feedback,
// plus exact interval-regret evaluation against a loss stream.
//
// Two learners are provided: Fixed-Share (multiplicative update followed by
// mixing with the uniform distribution) and a geometric-covering restart
// ensemble (one Hedge per covering interval, aggregated by a master Hedge
// over the live restart levels).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dynpop/common.hpp"

namespace dynpop {

// Materialized loss stream: losses[t][s] in [0,1], t = 0..T-1.
struct LossStream {
  std::vector<std::vector<double>> losses;
  int horizon() const { return static_cast<int>(losses.size()); }
  int actions() const { return losses.empty() ? 0 : static_cast<int>(losses[0].size()); }
};

class Learner {
 public:
  virtual ~Learner() = default;
  // Distribution to play this round; a valid probability vector.
  virtual const std::vector<double>& distribution() const = 0;
  // Full-information update with the realized loss of every action.
  virtual void observe(const std::vector<double>& losses) = 0;
  virtual int actions() const = 0;
};

namespace detail {

inline void check_losses(const std::vector<double>& losses, int n) {
  if (static_cast<int>(losses.size()) != n)
    throw argument_error("learner: loss vector dimension mismatch");
  for (double l : losses)
    if (l < -kSlackTol || l > 1.0 + kSlackTol)
      throw argument_error("learner: loss outside [0,1]");
}

inline void normalize(std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v;
  if (s <= 0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return;
  }
  for (double& v : w) v /= s;
}

}  // namespace detail

// Multiplicative update with rate eta, then mix an alpha share of uniform.
// alpha = 0 is plain Hedge.
class FixedShare : public Learner {
 public:
  FixedShare(int n_actions, double eta, double alpha_mix)
      : eta_(eta), alpha_(alpha_mix),
        w_(static_cast<std::size_t>(n_actions),
           1.0 / static_cast<double>(n_actions)) {
    if (n_actions < 1) throw argument_error("FixedShare: need >= 1 action");
    if (alpha_mix < 0 || alpha_mix > 1)
      throw argument_error("FixedShare: alpha_mix outside [0,1]");
  }

  const std::vector<double>& distribution() const override { return w_; }
  int actions() const override { return static_cast<int>(w_.size()); }

  void observe(const std::vector<double>& losses) override {
    detail::check_losses(losses, actions());
    for (std::size_t s = 0; s < w_.size(); ++s)
      w_[s] *= std::exp(-eta_ * losses[s]);
    detail::normalize(w_);
    if (alpha_ > 0) {
      double u = alpha_ / static_cast<double>(w_.size());
      for (double& v : w_) v = (1.0 - alpha_) * v + u;
    }
  }

 private:
  double eta_, alpha_;
  std::vector<double> w_;
};

// Default Fixed-Share rates for a player with expected lifetime min(T, 1/p).
struct FixedShareRates {
  double eta;
  double alpha_mix;
};

inline FixedShareRates fixed_share_defaults(int n_actions, int horizon, double p) {
  double t0 = static_cast<double>(horizon);
  if (p > 0) t0 = std::min(t0, std::ceil(1.0 / p));
  t0 = std::max(t0, 2.0);
  double eta = std::sqrt(8.0 * std::log(std::max(2, n_actions)) / t0);
  return {eta, p};
}

// Geometric-covering restart ensemble: for each level j the Hedge instance is
// restarted every 2^j rounds (intervals [k*2^j, (k+1)*2^j)), with the level
// learning rate tuned to the interval length.  A master Hedge over the live
// levels forms the played distribution; a restarted level re-enters with a
// 1/t share of the master mass, so old levels fade when the environment
// shifts.
class CoveringHedge : public Learner {
 public:
  CoveringHedge(int n_actions, int horizon_hint, double master_eta = 1.0)
      : n_(n_actions), master_eta_(master_eta) {
    if (n_actions < 1) throw argument_error("CoveringHedge: need >= 1 action");
    levels_ = 1;
    while ((1 << levels_) < std::max(2, horizon_hint)) ++levels_;
    ++levels_;
    for (int j = 0; j < levels_; ++j) {
      eta_.push_back(std::sqrt(8.0 * std::log(std::max(2, n_actions)) /
                               static_cast<double>(1 << j)));
      experts_.emplace_back(static_cast<std::size_t>(n_),
                            1.0 / static_cast<double>(n_));
    }
    master_.assign(static_cast<std::size_t>(levels_),
                   1.0 / static_cast<double>(levels_));
    rebuild_play();
  }

  const std::vector<double>& distribution() const override { return play_; }
  int actions() const override { return n_; }

  void observe(const std::vector<double>& losses) override {
    detail::check_losses(losses, n_);
    for (int j = 0; j < levels_; ++j) {
      double e = eta_[static_cast<std::size_t>(j)];
      auto& w = experts_[static_cast<std::size_t>(j)];
      double expert_loss = 0.0;
      for (int s = 0; s < n_; ++s)
        expert_loss += w[static_cast<std::size_t>(s)] * losses[static_cast<std::size_t>(s)];
      master_[static_cast<std::size_t>(j)] *= std::exp(-master_eta_ * expert_loss);
      for (int s = 0; s < n_; ++s)
        w[static_cast<std::size_t>(s)] *= std::exp(-e * losses[static_cast<std::size_t>(s)]);
      detail::normalize(w);
    }
    detail::normalize(master_);
    ++t_;
    // restart every level whose covering interval boundary falls at t
    double fresh = 1.0 / static_cast<double>(t_ + 1);
    int restarted = 0;
    for (int j = 0; j < levels_; ++j)
      if (t_ % (std::int64_t{1} << j) == 0) ++restarted;
    if (restarted > 0) {
      for (int j = 0; j < levels_; ++j) {
        if (t_ % (std::int64_t{1} << j) == 0) {
          experts_[static_cast<std::size_t>(j)].assign(
              static_cast<std::size_t>(n_), 1.0 / static_cast<double>(n_));
          master_[static_cast<std::size_t>(j)] =
              fresh / static_cast<double>(restarted);
        } else {
          master_[static_cast<std::size_t>(j)] *= 1.0 - fresh;
        }
      }
      detail::normalize(master_);
    }
    rebuild_play();
  }

 private:
  void rebuild_play() {
    play_.assign(static_cast<std::size_t>(n_), 0.0);
    for (int j = 0; j < levels_; ++j)
      for (int s = 0; s < n_; ++s)
        play_[static_cast<std::size_t>(s)] +=
            master_[static_cast<std::size_t>(j)] *
            experts_[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)];
    detail::normalize(play_);
  }

  int n_;
  int levels_;
  double master_eta_;
  std::int64_t t_ = 0;
  std::vector<double> eta_;
  std::vector<std::vector<double>> experts_;
  std::vector<double> master_;
  std::vector<double> play_;
};

using LearnerFactory = std::function<std::unique_ptr<Learner>(int n_actions)>;

// ---------------------------------------------------------------------------
// Interval regret.

struct RegretReport {
  int tau1 = 0;  // 1-based, inclusive
  int tau2 = 0;  // exclusive, <= T+1
  double regret = 0.0;
  int best_action = -1;
};

// Exact R(tau1,tau2) of the played distribution sequence: expected played loss
// minus the best fixed action on the interval, maximized by brute force.
inline RegretReport interval_regret(const LossStream& stream,
                                    const std::vector<std::vector<double>>& played,
                                    int tau1, int tau2) {
  int t_max = stream.horizon();
  if (!(1 <= tau1 && tau1 < tau2 && tau2 <= t_max + 1))
    throw argument_error("interval_regret: bad interval");
  if (static_cast<int>(played.size()) < t_max)
    throw argument_error("interval_regret: played sequence too short");
  int n = stream.actions();
  double played_loss = 0.0;
  std::vector<double> action_loss(static_cast<std::size_t>(n), 0.0);
  for (int t = tau1 - 1; t < tau2 - 1; ++t) {
    for (int s = 0; s < n; ++s) {
      double l = stream.losses[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)];
      played_loss += played[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] * l;
      action_loss[static_cast<std::size_t>(s)] += l;
    }
  }
  RegretReport rep;
  rep.tau1 = tau1;
  rep.tau2 = tau2;
  rep.best_action = static_cast<int>(
      std::min_element(action_loss.begin(), action_loss.end()) - action_loss.begin());
  rep.regret = played_loss - action_loss[static_cast<std::size_t>(rep.best_action)];
  return rep;
}

// Feeds the stream to a fresh learner and records the played distributions.
inline std::vector<std::vector<double>> run_learner(const LossStream& stream,
                                                    Learner& learner) {
  std::vector<std::vector<double>> played;
  played.reserve(static_cast<std::size_t>(stream.horizon()));
  for (int t = 0; t < stream.horizon(); ++t) {
    played.push_back(learner.distribution());
    learner.observe(stream.losses[static_cast<std::size_t>(t)]);
  }
  return played;
}

inline double regret_envelope(double c, int tau1, int tau2, int n_actions) {
  return c * std::sqrt(static_cast<double>(tau2 - tau1) *
                       std::log(static_cast<double>(n_actions) * tau2));
}

// Mean interval regret over seeded streams vs the C*sqrt(len*ln(N*tau2))
// envelope.  Returns true iff every listed interval stays under the envelope.
inline bool regret_envelope_check(
    const std::function<LossStream(std::uint64_t seed)>& stream_gen,
    const LearnerFactory& make_learner,
    const std::vector<std::pair<int, int>>& intervals, double c,
    int n_seeds = 30) {
  if (n_seeds < 1) throw argument_error("regret_envelope_check: need seeds");
  std::vector<double> mean(intervals.size(), 0.0);
  int n_actions = 0;
  for (int seed = 0; seed < n_seeds; ++seed) {
    LossStream stream = stream_gen(static_cast<std::uint64_t>(seed));
    n_actions = stream.actions();
    auto learner = make_learner(n_actions);
    auto played = run_learner(stream, *learner);
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      auto rep = interval_regret(stream, played, intervals[i].first, intervals[i].second);
      mean[i] += rep.regret / static_cast<double>(n_seeds);
    }
  }
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    double env = regret_envelope(c, intervals[i].first, intervals[i].second, n_actions);
    if (mean[i] > env) return false;
  }
  return true;
}

// All intervals [k*2^j+1, (k+1)*2^j+1) covering a horizon, largest level first.
inline std::vector<std::pair<int, int>> dyadic_intervals(int horizon) {
  std::vector<std::pair<int, int>> out;
  for (int size = 1; size <= horizon; size *= 2)
    for (int start = 1; start + size <= horizon + 1; start += size)
      out.emplace_back(start, start + size);
  return out;
}

}  // namespace dynpop
