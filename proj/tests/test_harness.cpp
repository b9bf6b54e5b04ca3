#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>

#include "dynpop/io.hpp"

using namespace dynpop;

namespace {

std::string data_dir() {
  if (const char* env = std::getenv("DYNPOP_TEST_DATA")) return env;
  return std::string(TEST_DATA_DIR);
}

ExperimentConfig matching_config() {
  return load_config(data_dir() + "/config_matching_small.json");
}

}  // namespace

TEST_CASE("config parsing") {
  auto cfg = matching_config();
  CHECK(cfg.game == GameId::matching);
  CHECK(cfg.n == 3);
  CHECK(cfg.horizon == 40);
  CHECK(cfg.matching->m == 2);
  CHECK(cfg.matching->pool.size() == 3);

  SECTION("horizon zero is rejected before any work") {
    json j = json::parse(read_file(data_dir() + "/config_matching_small.json"));
    j["T"] = 0;
    CHECK_THROWS_AS(parse_config(j, data_dir()), config_error);
  }
  SECTION("unknown game is rejected") {
    json j = json::parse(read_file(data_dir() + "/config_matching_small.json"));
    j["game"] = "poker";
    CHECK_THROWS_AS(parse_config(j, data_dir()), config_error);
  }
  SECTION("config json round-trips through the schema") {
    json j = json::parse(read_file(data_dir() + "/config_matching_small.json"));
    auto cfg2 = parse_config(j, data_dir());
    CHECK(cfg2.n == cfg.n);
    CHECK(cfg2.p == cfg.p);
    CHECK(cfg2.seeds == cfg.seeds);
  }
}

TEST_CASE("single-round run equals a single-shot evaluation") {
  auto cfg = matching_config();
  cfg.horizon = 1;
  cfg.p = 0.0;
  auto rep = run_experiment(cfg, 5);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.cum_objective == Catch::Approx(rep.rows[0].objective));
  CHECK(rep.cum_opt == Catch::Approx(rep.rows[0].opt));
  CHECK(rep.stability.mean_k() == 0.0);
  CHECK(rep.events.empty());
}

TEST_CASE("cumulative columns are recomputable from the rows") {
  auto cfg = matching_config();
  auto rep = run_experiment(cfg, 3);
  double acc_w = 0.0, acc_o = 0.0;
  for (const auto& r : rep.rows) {
    acc_w += r.objective;
    acc_o += r.opt;
    CHECK(r.cum_ratio == Catch::Approx(acc_w / acc_o));
  }
  CHECK(rep.cum_objective == Catch::Approx(acc_w));
  CHECK(rep.cum_opt == Catch::Approx(acc_o));
}

TEST_CASE("determinism: same config and seed give identical outputs") {
  auto cfg = matching_config();
  auto a = run_experiment(cfg, 11);
  auto b = run_experiment(cfg, 11);
  CHECK(report_to_csv(a) == report_to_csv(b));
  auto c = run_experiment(cfg, 12);
  CHECK(report_to_csv(a) != report_to_csv(c));
}

TEST_CASE("counterfactual losses agree with the mechanism evaluation") {
  auto cfg = matching_config();
  const auto& su = cfg.matching.value();
  std::vector<UnitDemandValuation> values;
  for (int id : su.initial) values.push_back(su.table[static_cast<std::size_t>(id)]);
  MatchingBoundGame game(values, su.m, su.supply, su.grid(), true);
  Rng rng(2);
  std::vector<double> losses;
  for (int trial = 0; trial < 50; ++trial) {
    StrategyProfile s;
    std::vector<ItemBid> bids;
    for (int i = 0; i < game.players(); ++i) {
      s.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(game.strategy_count(i)))));
      bids.push_back(game.strategy(i, s.back()));
    }
    Outcome out = game.evaluate(s);
    for (int i = 0; i < game.players(); ++i) {
      detail::matching_losses(game, bids, i, losses);
      CHECK(losses[static_cast<std::size_t>(s[static_cast<std::size_t>(i)])] ==
            Catch::Approx(1.0 - out.payoff[static_cast<std::size_t>(i)]));
      // and every alternative matches a fresh evaluation
      for (int alt = 0; alt < game.strategy_count(i); ++alt) {
        StrategyProfile probe = s;
        probe[static_cast<std::size_t>(i)] = alt;
        CHECK(losses[static_cast<std::size_t>(alt)] ==
              Catch::Approx(1.0 - game.evaluate(probe).payoff[static_cast<std::size_t>(i)]));
      }
    }
  }
}

TEST_CASE("deviation play achieves the benchmark welfare exactly") {
  auto cfg = matching_config();
  const auto& su = cfg.matching.value();
  std::vector<UnitDemandValuation> values;
  std::vector<std::vector<double>> raw;
  for (int id : su.initial) {
    values.push_back(su.table[static_cast<std::size_t>(id)]);
    raw.push_back(values.back().values);
  }
  LayeredState bench(values, su.m, su.supply, su.rho, su.eps);
  MatchingBoundGame game(values, su.m, su.supply, su.grid(), true);
  std::vector<ItemBid> dev_bids;
  for (int i = 0; i < game.players(); ++i)
    dev_bids.push_back(smoothness_deviation(values[static_cast<std::size_t>(i)],
                                            bench.item_of(i), su.grid()));
  auto alloc = run_first_price(dev_bids, values, su.m, su.supply, su.grid());
  CHECK(alloc.welfare == Catch::Approx(bench.welfare()));
  auto [opt_w, _] = optimal_matching(raw, su.supply);
  CHECK(alloc.welfare >= opt_w / (2.0 * (1.0 + su.eps)) - 1e-12);
}

TEST_CASE("all three game runners produce coherent reports") {
  SECTION("bandwidth") {
    auto cfg = load_config(data_dir() + "/config_bandwidth_small.json");
    auto rep = run_experiment(cfg, 4);
    CHECK(rep.rows.size() == 40);
    CHECK(rep.cum_opt > 0);
    for (const auto& r : rep.rows) CHECK(r.benchmark <= r.opt + 1e-9);
  }
  SECTION("congestion") {
    auto cfg = load_config(data_dir() + "/config_congestion_small.json");
    auto rep = run_experiment(cfg, 4);
    CHECK(rep.kind == GameKind::cost_game);
    CHECK(rep.rows.size() == 40);
    for (const auto& r : rep.rows) CHECK(r.objective >= r.opt - 1e-9);
    CHECK(rep.verdicts.count("congestion_bound") == 1);
  }
  SECTION("coupled-private matching benchmark") {
    auto cfg = matching_config();
    cfg.benchmark = BenchmarkKind::coupled_private;
    cfg.horizon = 30;
    auto rep = run_experiment(cfg, 9);
    CHECK(rep.rows.size() == 30);
    for (const auto& r : rep.rows) CHECK(r.benchmark >= 0.0);
  }
  SECTION("adversarial arrivals") {
    auto cfg = matching_config();
    cfg.arrival = ArrivalPolicyKind::adversarial_worst;
    cfg.horizon = 20;
    cfg.p = 0.3;
    auto rep = run_experiment(cfg, 2);
    CHECK(rep.rows.size() == 20);
  }
}

TEST_CASE("sweep is monotone-ish and deterministic") {
  auto cfg = matching_config();
  cfg.horizon = 30;
  cfg.seeds = {1, 2};
  auto rows = sweep(cfg, {0.0, 1.0});
  REQUIRE(rows.size() == 2);
  // sanity bounds at p = 1
  CHECK(rows[1].mean_ratio >= 0.0);
  CHECK(rows[1].mean_ratio <= 1.0 + 1e-9);
  auto rows2 = sweep(cfg, {0.0, 1.0});
  CHECK(rows[0].mean_ratio == rows2[0].mean_ratio);
  CHECK(rows[1].mean_ratio == rows2[1].mean_ratio);
}

TEST_CASE("csv rendering uses the documented schema") {
  auto cfg = matching_config();
  cfg.horizon = 3;
  auto rep = run_experiment(cfg, 1);
  auto csv = report_to_csv(rep);
  CHECK(csv.rfind("t,welfare,opt,benchmark,cum_ratio,phi,changes\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("\r") == std::string::npos);
  auto j = report_summary_json(rep);
  CHECK(j.contains("verdicts"));
  CHECK(j.contains("fitted_cr"));
}

TEST_CASE("aggregation conjunction over seeds") {
  auto cfg = matching_config();
  cfg.horizon = 25;
  std::vector<RunReport> reports;
  for (std::uint64_t s : {1, 2, 3}) reports.push_back(run_experiment(cfg, s));
  auto agg = aggregate_reports(reports);
  CHECK(agg.runs == 3);
  double mean = (reports[0].cum_objective + reports[1].cum_objective +
                 reports[2].cum_objective) / 3.0;
  CHECK(agg.mean_cum_objective == Catch::Approx(mean));
}
