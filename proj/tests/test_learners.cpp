#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dynpop/learners.hpp"

using namespace dynpop;

namespace {

LossStream constant_stream(int t_max, int n, double value) {
  LossStream s;
  s.losses.assign(static_cast<std::size_t>(t_max),
                  std::vector<double>(static_cast<std::size_t>(n), value));
  return s;
}

// best action 0 in the first half, action 1 afterwards
LossStream single_switch(int t_max, int n) {
  LossStream s;
  s.losses.assign(static_cast<std::size_t>(t_max),
                  std::vector<double>(static_cast<std::size_t>(n), 1.0));
  for (int t = 0; t < t_max / 2; ++t) s.losses[static_cast<std::size_t>(t)][0] = 0.0;
  for (int t = t_max / 2; t < t_max; ++t) s.losses[static_cast<std::size_t>(t)][1] = 0.0;
  return s;
}

}  // namespace

TEST_CASE("degenerate learners") {
  SECTION("one action plays it forever") {
    FixedShare l(1, 0.5, 0.1);
    for (int t = 0; t < 20; ++t) {
      CHECK(l.distribution() == std::vector<double>{1.0});
      l.observe({0.7});
    }
  }
  SECTION("full mixing is uniform regardless of losses") {
    FixedShare l(4, 2.0, 1.0);
    Rng rng(1);
    for (int t = 0; t < 30; ++t) {
      std::vector<double> losses;
      for (int s = 0; s < 4; ++s) losses.push_back(rng.uniform01());
      l.observe(losses);
      for (double w : l.distribution()) CHECK(w == Catch::Approx(0.25));
    }
  }
  SECTION("losses outside [0,1] are rejected") {
    FixedShare l(2, 1.0, 0.0);
    CHECK_THROWS_AS(l.observe({0.5, 1.5}), argument_error);
  }
}

TEST_CASE("fixed-share locks onto the better action") {
  // N=2, losses (0,1), eta=1, alpha=0.01: Pr[action 1] >= 0.95 at t=100
  FixedShare l(2, 1.0, 0.01);
  for (int t = 0; t < 99; ++t) l.observe({0.0, 1.0});
  double p1 = l.distribution()[0];
  CHECK(p1 >= 0.95);
  CHECK(p1 == Catch::Approx(0.9921132484302438).margin(1e-9));
}

TEST_CASE("emitted distributions are valid probability vectors") {
  Rng rng(5);
  FixedShare fs(5, 0.7, 0.02);
  CoveringHedge ch(5, 256);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> losses;
    for (int s = 0; s < 5; ++s) losses.push_back(rng.uniform01());
    for (Learner* l : {static_cast<Learner*>(&fs), static_cast<Learner*>(&ch)}) {
      double sum = 0.0;
      for (double w : l->distribution()) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      l->observe(losses);
    }
  }
}

TEST_CASE("fixed-share with zero mixing is bit-identical to plain hedge") {
  double eta = 0.3;
  FixedShare fs(3, eta, 0.0);
  std::vector<double> manual = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> losses = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
    fs.observe(losses);
    double z = 0.0;
    for (int s = 0; s < 3; ++s) {
      manual[static_cast<std::size_t>(s)] *=
          std::exp(-eta * losses[static_cast<std::size_t>(s)]);
      z += manual[static_cast<std::size_t>(s)];
    }
    for (double& w : manual) w /= z;
    for (int s = 0; s < 3; ++s)
      CHECK(fs.distribution()[static_cast<std::size_t>(s)] ==
            manual[static_cast<std::size_t>(s)]);
  }
}

TEST_CASE("interval regret evaluation") {
  SECTION("point mass on the interval-best action gives zero regret") {
    LossStream s = single_switch(16, 2);
    std::vector<std::vector<double>> played(16, {1.0, 0.0});
    auto rep = interval_regret(s, played, 1, 9);
    CHECK(rep.regret == Catch::Approx(0.0));
    CHECK(rep.best_action == 0);
  }

  SECTION("uniform play over (0,1) losses accumulates half the length") {
    LossStream s;
    s.losses.assign(10, {0.0, 1.0});
    std::vector<std::vector<double>> played(10, {0.5, 0.5});
    auto rep = interval_regret(s, played, 1, 11);
    CHECK(rep.regret == Catch::Approx(5.0));
  }

  SECTION("matches a brute-force oracle on random streams") {
    Rng rng(21);
    LossStream s;
    int t_max = 20, n = 3;
    for (int t = 0; t < t_max; ++t) {
      std::vector<double> row;
      for (int a = 0; a < n; ++a) row.push_back(rng.uniform01());
      s.losses.push_back(row);
    }
    std::vector<std::vector<double>> played;
    for (int t = 0; t < t_max; ++t) {
      std::vector<double> d = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
      double z = d[0] + d[1] + d[2];
      for (double& v : d) v /= z;
      played.push_back(d);
    }
    for (auto [t1, t2] : std::vector<std::pair<int, int>>{{1, 21}, {3, 11}, {20, 21}}) {
      auto rep = interval_regret(s, played, t1, t2);
      double brute_best = 1e18;
      for (int a = 0; a < n; ++a) {
        double acc = 0.0;
        for (int t = t1 - 1; t < t2 - 1; ++t)
          acc += s.losses[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
        brute_best = std::min(brute_best, acc);
      }
      double brute_played = 0.0;
      for (int t = t1 - 1; t < t2 - 1; ++t)
        for (int a = 0; a < n; ++a)
          brute_played += played[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)] *
                          s.losses[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
      CHECK(rep.regret == Catch::Approx(brute_played - brute_best));
    }
  }

  SECTION("full-horizon point-mass play equals the classical regret") {
    Rng rng(33);
    int t_max = 30, n = 4;
    LossStream s;
    std::vector<int> actions;
    for (int t = 0; t < t_max; ++t) {
      std::vector<double> row;
      for (int a = 0; a < n; ++a) row.push_back(rng.uniform01());
      s.losses.push_back(row);
      actions.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
    }
    std::vector<std::vector<double>> played;
    for (int t = 0; t < t_max; ++t) {
      std::vector<double> d(static_cast<std::size_t>(n), 0.0);
      d[static_cast<std::size_t>(actions[static_cast<std::size_t>(t)])] = 1.0;
      played.push_back(d);
    }
    double classical = 0.0;
    std::vector<double> totals(static_cast<std::size_t>(n), 0.0);
    for (int t = 0; t < t_max; ++t) {
      classical += s.losses[static_cast<std::size_t>(t)]
                           [static_cast<std::size_t>(actions[static_cast<std::size_t>(t)])];
      for (int a = 0; a < n; ++a)
        totals[static_cast<std::size_t>(a)] +=
            s.losses[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
    }
    classical -= *std::min_element(totals.begin(), totals.end());
    auto rep = interval_regret(s, played, 1, t_max + 1);
    CHECK(rep.regret == Catch::Approx(classical));
  }

  SECTION("bad intervals are rejected") {
    LossStream s = constant_stream(4, 2, 0.5);
    std::vector<std::vector<double>> played(4, {0.5, 0.5});
    CHECK_THROWS_AS(interval_regret(s, played, 0, 3), argument_error);
    CHECK_THROWS_AS(interval_regret(s, played, 3, 3), argument_error);
    CHECK_THROWS_AS(interval_regret(s, played, 1, 6), argument_error);
  }

  SECTION("a constant shift at one step cancels exactly") {
    // dyadic losses keep the float arithmetic exact
    LossStream s;
    s.losses = {{0.25, 0.5}, {0.125, 0.75}, {0.5, 0.25}};
    std::vector<std::vector<double>> played(3, {0.5, 0.5});
    auto before = interval_regret(s, played, 1, 4);
    for (double& l : s.losses[1]) l += 0.125;
    auto after = interval_regret(s, played, 1, 4);
    CHECK(before.regret == after.regret);
  }
}

TEST_CASE("adaptive-regret envelope on the single-switch stream") {
  int t_max = 1 << 12;
  int n = 10;
  auto stream_gen = [&](std::uint64_t) { return single_switch(t_max, n); };
  auto intervals = dyadic_intervals(t_max);

  SECTION("constant losses have zero regret everywhere") {
    auto gen = [&](std::uint64_t) { return constant_stream(64, 4, 0.3); };
    auto factory = [&](int actions) -> std::unique_ptr<Learner> {
      return std::make_unique<FixedShare>(actions, 0.5, 0.01);
    };
    CHECK(regret_envelope_check(gen, factory, dyadic_intervals(64), 0.5, 3));
  }

  SECTION("fixed-share meets C = 10 on all dyadic intervals") {
    auto factory = [&](int actions) -> std::unique_ptr<Learner> {
      auto rates = fixed_share_defaults(actions, t_max, 0.0);
      return std::make_unique<FixedShare>(actions, rates.eta, 1e-3);
    };
    CHECK(regret_envelope_check(stream_gen, factory, intervals, 10.0, 3));
  }

  SECTION("covering ensemble meets C = 10 on all dyadic intervals") {
    auto factory = [&](int actions) -> std::unique_ptr<Learner> {
      return std::make_unique<CoveringHedge>(actions, t_max);
    };
    CHECK(regret_envelope_check(stream_gen, factory, intervals, 10.0, 1));
  }

  SECTION("plain hedge violates the envelope after the switch") {
    auto factory = [&](int actions) -> std::unique_ptr<Learner> {
      auto rates = fixed_share_defaults(actions, t_max, 0.0);
      return std::make_unique<FixedShare>(actions, rates.eta, 0.0);
    };
    std::vector<std::pair<int, int>> second_half = {{t_max / 2 + 1, t_max + 1}};
    CHECK_FALSE(regret_envelope_check(stream_gen, factory, second_half, 10.0, 3));
  }
}
