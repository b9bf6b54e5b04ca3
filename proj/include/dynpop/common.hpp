#pragma once

// Shared basics: error types, a portable deterministic RNG, small numeric
// helpers and locale-independent number formatting.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynpop {

class argument_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an enumeration would exceed the profile-count guard.
class capacity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Profile enumeration guard: product of strategy-set sizes must stay below this.
inline constexpr std::uint64_t kEnumerationGuard = 10'000'000;

// Slack tolerance for inequality checks on doubles.
inline constexpr double kSlackTol = 1e-9;

// SplitMix64-based generator. std:: distributions are implementation-defined,
// so all sampling goes through this class to keep runs byte-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw argument_error("Rng::below: n must be positive");
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / n * n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Derive an independent stream (e.g. one per seed index).
  Rng fork(std::uint64_t salt) {
    Rng r(state_ ^ (0xd1342543de82ef95ULL * (salt + 1)));
    r.next_u64();
    return r;
  }

 private:
  std::uint64_t state_;
};

// Samples an index from a probability vector using a single uniform draw.
inline int sample_index(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Shortest round-trip decimal form, '.' separator, no locale involvement.
inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

}  // namespace dynpop
