#pragma once

// Dynamic-population process: per-round independent departures with
// probability p, replacement types chosen by an arrival policy.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dynpop/common.hpp"

namespace dynpop {

struct PopulationConfig {
  int n = 0;
  double p = 0.0;  // turnover probability per player per round
  int horizon = 0;
  std::uint64_t seed = 0;
};

enum class ArrivalPolicyKind { scripted, rotation, iid_pool, adversarial_worst };

struct TurnoverEvent {
  int t = 0;  // 1-based round at which the new type takes effect (t >= 2)
  int slot = 0;
  int new_type = 0;
};

// Types are ids into a caller-owned pool.  The adversarial policy asks a
// callback to score candidate types; lower is worse for the system (the
// one-step greedy adversary picks the minimizer).  The scripted policy
// bypasses the random departures and replays explicit events.
struct ArrivalPolicy {
  ArrivalPolicyKind kind = ArrivalPolicyKind::iid_pool;
  std::vector<int> pool;
  // scripted: initial types plus the exact event list to replay
  std::vector<int> script_initial;
  std::vector<TurnoverEvent> script_events;
  // adversarial_worst: benchmark welfare if `slot` switches to `candidate`
  std::function<double(int slot, int candidate, const std::vector<int>& types)>
      score;
};

struct PopulationRun {
  std::vector<std::vector<int>> types;  // [t][slot], t = 0..T-1
  std::vector<TurnoverEvent> events;
};

inline double expected_lifetime(double p) {
  if (p < 0 || p > 1) throw argument_error("expected_lifetime: p outside [0,1]");
  if (p == 0) return std::numeric_limits<double>::infinity();  // no turnover
  return 1.0 / p;
}

namespace detail {

inline int draw_type(const ArrivalPolicy& policy, int slot,
                     const std::vector<int>& current,
                     std::vector<std::size_t>& rotation_pos, Rng& rng) {
  switch (policy.kind) {
    case ArrivalPolicyKind::scripted:
      throw argument_error("population: scripted policy is replayed, not drawn");
    case ArrivalPolicyKind::rotation: {
      if (policy.pool.empty()) throw argument_error("population: empty pool");
      auto& pos = rotation_pos[static_cast<std::size_t>(slot)];
      pos = (pos + 1) % policy.pool.size();
      return policy.pool[pos];
    }
    case ArrivalPolicyKind::iid_pool: {
      if (policy.pool.empty()) throw argument_error("population: empty pool");
      return policy.pool[rng.below(policy.pool.size())];
    }
    case ArrivalPolicyKind::adversarial_worst: {
      if (policy.pool.empty()) throw argument_error("population: empty pool");
      if (!policy.score)
        throw argument_error("population: adversarial policy needs a score callback");
      int best = policy.pool.front();
      double best_score = std::numeric_limits<double>::infinity();
      for (int cand : policy.pool) {
        double s = policy.score(slot, cand, current);
        if (s < best_score) {
          best_score = s;
          best = cand;
        }
      }
      return best;
    }
  }
  throw argument_error("population: unknown policy");
}

}  // namespace detail

// v^1 comes from the policy (one draw per slot); for t >= 2 each slot
// independently resamples with probability p.  Deterministic given the seed.
inline PopulationRun simulate_population(const PopulationConfig& config,
                                         const ArrivalPolicy& policy) {
  if (config.n < 1 || config.horizon < 1)
    throw argument_error("population: n and T must be >= 1");
  if (config.p < 0 || config.p > 1)
    throw argument_error("population: p outside [0,1]");
  Rng rng(config.seed);
  std::vector<std::size_t> rotation_pos(static_cast<std::size_t>(config.n), 0);
  PopulationRun run;
  std::vector<int> current(static_cast<std::size_t>(config.n));
  if (policy.kind == ArrivalPolicyKind::scripted) {
    if (static_cast<int>(policy.script_initial.size()) != config.n)
      throw argument_error("population: script initial profile has wrong size");
    current = policy.script_initial;
    run.types.push_back(current);
    std::size_t pos = 0;
    for (int t = 2; t <= config.horizon; ++t) {
      while (pos < policy.script_events.size() &&
             policy.script_events[pos].t == t) {
        const auto& e = policy.script_events[pos];
        if (e.slot < 0 || e.slot >= config.n)
          throw argument_error("population: script slot out of range");
        current[static_cast<std::size_t>(e.slot)] = e.new_type;
        run.events.push_back(e);
        ++pos;
      }
      run.types.push_back(current);
    }
    if (pos != policy.script_events.size())
      throw argument_error("population: script events outside horizon or unordered");
    return run;
  }
  for (int i = 0; i < config.n; ++i) {
    // rotation starts at pool[i % size] per slot for variety
    if (policy.kind == ArrivalPolicyKind::rotation) {
      if (policy.pool.empty()) throw argument_error("population: empty pool");
      rotation_pos[static_cast<std::size_t>(i)] =
          static_cast<std::size_t>(i) % policy.pool.size();
      current[static_cast<std::size_t>(i)] =
          policy.pool[rotation_pos[static_cast<std::size_t>(i)]];
    } else {
      current[static_cast<std::size_t>(i)] =
          detail::draw_type(policy, i, current, rotation_pos, rng);
    }
  }
  run.types.push_back(current);
  for (int t = 2; t <= config.horizon; ++t) {
    for (int i = 0; i < config.n; ++i) {
      if (rng.bernoulli(config.p)) {
        int nt = detail::draw_type(policy, i, current, rotation_pos, rng);
        current[static_cast<std::size_t>(i)] = nt;
        run.events.push_back({t, i, nt});
      }
    }
    run.types.push_back(current);
  }
  return run;
}

// Event log as CSV: t,slot,new_type_id with LF line endings.
inline std::string events_to_csv(const std::vector<TurnoverEvent>& events) {
  std::string out = "t,slot,new_type_id\n";
  for (const auto& e : events) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.slot);
    out += ',';
    out += std::to_string(e.new_type);
    out += '\n';
  }
  return out;
}

}  // namespace dynpop
