#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dynpop/congestion.hpp"
#include "dynpop/game.hpp"
#include "dynpop/matching.hpp"

using namespace dynpop;

namespace {

CongestionGame two_link_game() {
  std::vector<Latency> links = {Latency::linear(1.0, 0.0), Latency::linear(1.0, 0.0)};
  CongestionType type{{{0}, {1}}};
  return CongestionGame(links, {type, type});
}

TableGame coordination_game() {
  return TableGame(GameKind::cost_game, {2, 2}, [](const StrategyProfile& s) {
    double c = s[0] == s[1] ? 0.0 : 1.0;
    return Outcome{{c, c}, {}};
  });
}

TableGame matching_pennies() {
  return TableGame(GameKind::cost_game, {2, 2}, [](const StrategyProfile& s) {
    double c1 = s[0] == s[1] ? 0.0 : 1.0;
    return Outcome{{c1, 1.0 - c1}, {}};
  });
}

}  // namespace

TEST_CASE("social objective on a two-player congestion game") {
  auto game = two_link_game();
  CongestionBoundGame bound(&game, {0, 0});
  CHECK(social_objective(bound, {0, 0}) == Catch::Approx(4.0));
  CHECK(social_objective(bound, {0, 1}) == Catch::Approx(2.0));
  CHECK_THROWS_AS(social_objective(bound, {0}), argument_error);
}

TEST_CASE("social objective of a first-price mechanism is utilities plus revenue") {
  std::vector<UnitDemandValuation> v = {{{0.8}}, {{0.0}}};
  MatchingBoundGame bound(v, 1, 1, BidGrid(0.1), true);
  int s1 = bound.find_strategy(0, {0, 0.5});
  REQUIRE(s1 > 0);
  CHECK(social_objective(bound, {s1, 0}) == Catch::Approx(0.8));
  // all-empty profile allocates nothing
  CHECK(social_objective(bound, {0, 0}) == Catch::Approx(0.0));
}

TEST_CASE("first-price smoothness holds at lambda = 1/2 - delta and fails inflated") {
  // values (1, 0.5), bid step 0.05 = delta*rho with rho = 0.5, delta = 0.1
  std::vector<UnitDemandValuation> v = {{{1.0}}, {{0.5}}};
  MatchingBoundGame bound(v, 1, 1, BidGrid(0.05), true);
  auto [opt_w, assign] = optimal_matching({{1.0}, {0.5}}, 1);
  REQUIRE(opt_w == Catch::Approx(1.0));
  auto dev = matching_deviation_profile(bound, assign);

  auto good = verify_smoothness(bound, {0.5 - 0.1, 1.0}, opt_w, dev);
  CHECK(good.holds);

  auto bad = verify_smoothness(bound, {0.9, 1.0}, opt_w, dev);
  CHECK_FALSE(bad.holds);
  CHECK(bad.worst_profile.size() == 2);

  // independent re-check of the violated inequality at the witness profile
  Outcome base = bound.evaluate(bad.worst_profile);
  double revenue = base.payments[0] + base.payments[1];
  double dev_total = 0.0;
  for (int i = 0; i < 2; ++i) {
    StrategyProfile probe = bad.worst_profile;
    probe[static_cast<std::size_t>(i)] = dev[static_cast<std::size_t>(i)][0].first;
    dev_total += bound.evaluate(probe).payoff[static_cast<std::size_t>(i)];
  }
  CHECK(dev_total < 0.9 * opt_w - revenue - kSlackTol);
}

TEST_CASE("linear congestion smoothness at (5/3, 1/3) w.r.t. the optimum") {
  auto game = two_link_game();
  CongestionBoundGame bound(&game, {0, 0});
  auto [opt_c, opt_profile] = brute_force_opt(bound);
  REQUIRE(opt_c == Catch::Approx(2.0));
  std::vector<MixedStrategy> dev;
  for (int i = 0; i < 2; ++i)
    dev.push_back(pure(congestion_deviation(bound, i, opt_profile)));
  auto rep = verify_smoothness(bound, {5.0 / 3.0, 1.0 / 3.0}, opt_c, dev);
  CHECK(rep.holds);
  CHECK_THROWS_AS(verify_smoothness(bound, {1.0, 1.0}, opt_c, dev), argument_error);
}

TEST_CASE("pure Nash enumeration") {
  auto pennies = matching_pennies();
  CHECK(enumerate_pure_nash(pennies).empty());

  auto coord = coordination_game();
  CHECK(enumerate_pure_nash(coord).size() == 2);

  // Rosenthal-potential minima are pure equilibria on random congestion games
  Rng rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    int m = 2 + static_cast<int>(rng.below(2));
    std::vector<Latency> links;
    for (int e = 0; e < m; ++e)
      links.push_back(Latency::linear(rng.uniform(0.1, 1.0), rng.uniform(0.0, 0.5)));
    std::vector<CongestionType> types;
    int n = 2 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n; ++i) {
      CongestionType t;
      for (int e = 0; e < m; ++e) t.strategies.push_back({e});
      types.push_back(t);
    }
    CongestionGame game(links, types);
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
    CongestionBoundGame bound(&game, ids);
    auto equilibria = enumerate_pure_nash(bound);
    REQUIRE_FALSE(equilibria.empty());
    // exhaustive potential argmin must appear in the equilibrium list
    double best_phi = 1e18;
    StrategyProfile best;
    detail::for_each_profile(bound, [&](const StrategyProfile& s) {
      double phi = rosenthal_potential(game, ids, s);
      if (phi < best_phi - 1e-12) {
        best_phi = phi;
        best = s;
      }
    });
    CHECK(std::find(equilibria.begin(), equilibria.end(), best) != equilibria.end());
  }
}

TEST_CASE("poa bound check against smooth benchmarks") {
  auto game = two_link_game();
  CongestionBoundGame bound(&game, {0, 0});
  auto [opt_c, opt_profile] = brute_force_opt(bound);
  CHECK(poa_bound_check(bound, {5.0 / 3.0, 1.0 / 3.0}, opt_c));

  // symmetric identical players: the optimum itself is an equilibrium
  auto coord = coordination_game();
  CHECK(poa_bound_check(coord, {1.0, 0.0}, 0.0));

  // fine-grid single-item first price: every equilibrium welfare >= (1/2-delta) opt
  std::vector<UnitDemandValuation> v = {{{1.0}}, {{0.5}}};
  MatchingBoundGame fp(v, 1, 1, BidGrid(0.05), true);
  CHECK(poa_bound_check(fp, {0.5 - 0.1, 1.0}, 1.0));
}

TEST_CASE("smoothness implies the poa bound on random tiny cost games") {
  Rng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 100; ++trial) {
    int n = 2;
    std::vector<int> counts = {2 + static_cast<int>(rng.below(2)),
                               2 + static_cast<int>(rng.below(2))};
    std::vector<std::vector<double>> table;
    int cells = counts[0] * counts[1];
    for (int c = 0; c < cells; ++c)
      table.push_back({rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)});
    TableGame game(GameKind::cost_game, counts, [=](const StrategyProfile& s) {
      int cell = s[0] * counts[1] + s[1];
      return Outcome{table[static_cast<std::size_t>(cell)], {}};
    });
    StrategyProfile x = {static_cast<int>(rng.below(static_cast<std::uint64_t>(counts[0]))),
                         static_cast<int>(rng.below(static_cast<std::uint64_t>(counts[1])))};
    double benchmark = social_objective(game, x);
    std::vector<MixedStrategy> dev = {pure(x[0]), pure(x[1])};
    double mu = rng.uniform(0.0, 0.9);
    // smallest lambda making the inequality hold, then a hair above it
    double lam_needed = 0.0;
    detail::for_each_profile(game, [&](const StrategyProfile& s) {
      Outcome base = game.evaluate(s);
      double cost_s = base.payoff[0] + base.payoff[1];
      double dev_total = 0.0;
      for (int i = 0; i < n; ++i) {
        StrategyProfile probe = s;
        probe[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
        dev_total += game.evaluate(probe).payoff[static_cast<std::size_t>(i)];
      }
      lam_needed = std::max(lam_needed, (dev_total - mu * cost_s) / benchmark);
    });
    SmoothnessParams params{lam_needed + 1e-6, mu};
    auto rep = verify_smoothness(game, params, benchmark, dev);
    REQUIRE(rep.holds);
    CHECK(poa_bound_check(game, params, benchmark));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("stability counting replays the definitions") {
  using Seq = std::vector<std::pair<std::vector<std::int64_t>, Solution>>;

  SECTION("constant sequence has zero counters") {
    Seq seq;
    for (int t = 0; t < 5; ++t) seq.push_back({{1, 2}, Solution{{0, Solution::kEmpty}}});
    auto ledger = stability_counts(seq);
    CHECK(ledger.k == std::vector<std::int64_t>{0, 0});
    CHECK(ledger.kappa == std::vector<std::int64_t>{0, 0});
  }

  SECTION("type change while unallocated counts for k only") {
    Seq seq;
    for (int t = 0; t < 6; ++t) {
      std::int64_t type = t >= 3 ? 9 : 1;
      seq.push_back({{type}, Solution{{Solution::kEmpty}}});
    }
    auto ledger = stability_counts(seq);
    CHECK(ledger.k[0] == 1);
    CHECK(ledger.kappa[0] == 0);
  }

  SECTION("simultaneous type and allocation change counts twice for kappa") {
    Seq seq;
    seq.push_back({{1}, Solution{{5}}});
    seq.push_back({{2}, Solution{{6}}});
    auto ledger = stability_counts(seq);
    CHECK(ledger.k[0] == 1);
    CHECK(ledger.kappa[0] == 2);
  }

  SECTION("kappa is at most 2k on random sequences") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      Seq seq;
      int n = 3, t_max = 20;
      for (int t = 0; t < t_max; ++t) {
        std::vector<std::int64_t> types;
        Solution sol;
        for (int i = 0; i < n; ++i) {
          types.push_back(static_cast<std::int64_t>(rng.below(3)));
          std::int64_t x = static_cast<std::int64_t>(rng.below(3));
          sol.x.push_back(x == 0 ? Solution::kEmpty : x);
        }
        seq.push_back({types, sol});
      }
      auto ledger = stability_counts(seq);
      for (int i = 0; i < n; ++i)
        CHECK(ledger.kappa[static_cast<std::size_t>(i)] <=
              2 * ledger.k[static_cast<std::size_t>(i)]);
    }
  }

  SECTION("empty sequence is rejected") {
    CHECK_THROWS_AS(stability_counts({}), argument_error);
  }
}

TEST_CASE("theorem right-hand sides") {
  SECTION("cost variant at k = 0 and no optimum mass") {
    TheoremInputs in;
    in.lambda = 5.0 / 3.0;
    in.mu = 1.0 / 3.0;
    in.alpha = 1.0;
    in.c_r = 1.5;
    in.n = 4;
    in.t = 100;
    in.n_strategies = 8;
    in.k = 0;
    in.sum_opt = 0;
    double expect = 4.0 / (1.0 - 1.0 / 3.0) * 1.5 * std::sqrt(100.0 * std::log(800.0));
    CHECK(theorem_rhs(TheoremKind::cost, in) == Catch::Approx(expect));
  }

  SECTION("improved mechanism with n = m, k = 0") {
    TheoremInputs in;
    in.lambda = 0.5;
    in.mu = 1.0;
    in.alpha = 1.0;
    in.c_r = 2.0;
    in.n = 6;
    in.m = 6;
    in.t = 50;
    in.n_strategies = 10;
    in.k = 0;
    in.sum_opt = 30;
    double regret = 2.0 * std::sqrt(50.0 * 6.0 * 6.0 * std::log(500.0));
    CHECK(theorem_rhs(TheoremKind::improved_mech, in) ==
          Catch::Approx(0.5 * 30.0 - regret));
  }

  SECTION("duplicate arithmetic cross-check for the mechanism variant") {
    TheoremInputs in;
    in.lambda = 0.5;
    in.mu = 1.0;
    in.alpha = 2.0 * 1.25;
    in.c_r = 1.0;
    in.n = 8;
    in.m = 3;
    in.t = 10000;
    in.n_strategies = 60;
    in.k = 0.37;
    in.sum_opt = 21234.5;
    double lhs = theorem_rhs(TheoremKind::mech, in);
    double rhs = 0.5 / (2.5 * 1.0) * 21234.5 -
                 8.0 * 1.0 * std::sqrt(10000.0 * 1.37 * std::log(60.0 * 10000.0));
    CHECK(lhs == Catch::Approx(rhs));
  }

  SECTION("cost variant rejects mu >= 1") {
    TheoremInputs in;
    in.mu = 1.0;
    in.n = 1;
    in.t = 10;
    in.n_strategies = 2;
    CHECK_THROWS_AS(theorem_rhs(TheoremKind::cost, in), argument_error);
  }
}

TEST_CASE("social objective is symmetric in anonymous games") {
  auto game = two_link_game();
  CongestionBoundGame bound(&game, {0, 0});
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    StrategyProfile s = {static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))};
    StrategyProfile swapped = {s[1], s[0]};
    CHECK(social_objective(bound, s) == Catch::Approx(social_objective(bound, swapped)));
  }
}

TEST_CASE("payoffs stay in [0,1] across enumerated profiles of the stage games") {
  std::vector<UnitDemandValuation> v = {{{1.0, 0.3}}, {{0.5, 0.9}}};
  MatchingBoundGame fp(v, 2, 1, BidGrid(0.1), true);
  detail::for_each_profile(fp, [&](const StrategyProfile& s) {
    for (double u : fp.evaluate(s).payoff) {
      CHECK(u >= -kSlackTol);
      CHECK(u <= 1.0 + kSlackTol);
    }
  });
}

TEST_CASE("enumeration guard raises a capacity error") {
  TableGame big(GameKind::cost_game, {3000, 3000, 3000},
                [](const StrategyProfile&) { return Outcome{{0, 0, 0}, {}}; });
  CHECK_THROWS_AS(enumerate_pure_nash(big), capacity_error);
}
