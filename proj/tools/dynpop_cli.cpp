// Command-line front end: run experiments, sweep turnover rates, verify
// smoothness claims, query welfare oracles, sample coupled sequences and
// enumerate pure Nash equilibria.
//
// Exit codes: 0 success, 2 config error, 3 capacity error, 4 bound-check
// failure (with --strict).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynpop/io.hpp"

namespace fs = std::filesystem;
using namespace dynpop;

namespace {

std::string out_dir_or_default(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DYNPOP_OUT_DIR")) return env;
  return ".";
}

int cmd_run(const std::string& config_path, std::uint64_t seed_override,
            bool has_seed, const std::string& out_dir_flag,
            const std::string& format, bool strict) {
  ExperimentConfig cfg = load_config(config_path);
  if (has_seed) cfg.seeds = {seed_override};
  std::string out_dir = out_dir_or_default(out_dir_flag);
  fs::create_directories(out_dir);
  std::vector<RunReport> reports;
  json per_seed = json::array();
  for (auto seed : cfg.seeds) {
    RunReport rep = run_experiment(cfg, seed);
    if (format == "csv" || format == "both")
      write_file(out_dir + "/run_seed" + std::to_string(seed) + ".csv",
                 report_to_csv(rep));
    per_seed.push_back(report_summary_json(rep));
    reports.push_back(std::move(rep));
  }
  auto agg = aggregate_reports(reports);
  if (format == "json" || format == "both") {
    json summary;
    summary["config"] = config_path;
    summary["seeds"] = cfg.seeds;
    summary["runs"] = per_seed;
    summary["aggregate"] = aggregate_json(agg);
    write_file(out_dir + "/summary.json", summary.dump(2) + "\n");
  }
  bool all_ok = true;
  for (const auto& [name, ok] : agg.verdicts) {
    std::cout << (ok ? "pass " : "FAIL ") << name
              << " (ratio=" << format_double(agg.mean_ratio) << ")\n";
    all_ok = all_ok && ok;
  }
  if (agg.verdicts.empty())
    std::cout << "done (ratio=" << format_double(agg.mean_ratio) << ")\n";
  if (strict && !all_ok) return 4;
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<double>& ps,
              const std::string& out_dir_flag) {
  ExperimentConfig cfg = load_config(config_path);
  std::vector<double> p_values = ps;
  if (p_values.empty()) p_values = {0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  auto rows = sweep(cfg, p_values);
  std::string out_dir = out_dir_or_default(out_dir_flag);
  fs::create_directories(out_dir);
  write_file(out_dir + "/sweep.csv", sweep_to_csv(rows));
  for (const auto& r : rows)
    std::cout << "p=" << format_double(r.p)
              << " ratio=" << format_double(r.mean_ratio) << "\n";
  return 0;
}

int cmd_verify_smoothness(const std::string& game, const std::string& instance_path,
                          double lambda_override, bool has_lambda) {
  json inst = json::parse(read_file(instance_path));
  if (game == "matching") {
    MatchingSetup su = parse_matching_instance(inst);
    std::vector<UnitDemandValuation> values;
    std::vector<std::vector<double>> raw;
    for (int id : su.initial) {
      values.push_back(su.table[static_cast<std::size_t>(id)]);
      raw.push_back(su.table[static_cast<std::size_t>(id)].values);
    }
    MatchingBoundGame bound(values, su.m, su.supply, su.grid(), true);
    auto [opt_w, opt_assign] = optimal_matching(raw, su.supply);
    double lambda = has_lambda ? lambda_override : 0.5 - su.grid_delta;
    auto dev = matching_deviation_profile(bound, opt_assign);
    auto rep = verify_smoothness(bound, {lambda, 1.0}, opt_w, dev);
    std::cout << (rep.holds ? "holds" : "violated")
              << " lambda=" << format_double(lambda)
              << " min_slack=" << format_double(rep.min_slack) << "\n";
    return 0;
  }
  if (game == "bandwidth") {
    BandwidthSetup su = parse_bandwidth_instance(inst);
    std::vector<ConcaveValuation> values;
    for (int id : su.initial) values.push_back(su.table[static_cast<std::size_t>(id)]);
    BandwidthBoundGame bound(values, su.zeta());
    auto [counts, seg_w] = segmented_optimum(values, su.delta);
    double lambda = has_lambda ? lambda_override : 2.0 - std::sqrt(3.0) - su.eps;
    std::vector<double> thetas;
    for (int k = 1; k <= 20; ++k) thetas.push_back(0.05 * k);
    auto rep = verify_bandwidth_smoothness(bound, counts, su.delta, lambda, thetas);
    std::cout << (rep.holds ? "holds" : "violated")
              << " lambda=" << format_double(lambda)
              << " theta=" << format_double(rep.best_theta)
              << " min_slack=" << format_double(rep.best_min_slack) << "\n";
    return 0;
  }
  if (game == "congestion") {
    CongestionSetup su = parse_congestion_instance(inst);
    CongestionGame g(su.elements, su.types);
    CongestionBoundGame bound(&g, su.initial);
    auto [opt_c, opt_profile] = brute_force_opt(bound);
    double lambda = has_lambda ? lambda_override : 5.0 / 3.0;
    std::vector<MixedStrategy> dev;
    for (int i = 0; i < bound.players(); ++i)
      dev.push_back(pure(congestion_deviation(bound, i, opt_profile)));
    auto rep = verify_smoothness(bound, {lambda, 1.0 / 3.0}, opt_c, dev);
    std::cout << (rep.holds ? "holds" : "violated")
              << " lambda=" << format_double(lambda)
              << " min_slack=" << format_double(rep.min_slack) << "\n";
    return 0;
  }
  throw config_error("verify-smoothness: unknown game '" + game + "'");
}

int cmd_oracle(const std::string& game, const std::string& instance_path) {
  json inst = json::parse(read_file(instance_path));
  if (game == "matching") {
    MatchingSetup su = parse_matching_instance(inst);
    std::vector<std::vector<double>> raw;
    std::vector<UnitDemandValuation> values;
    for (int id : su.initial) {
      raw.push_back(su.table[static_cast<std::size_t>(id)].values);
      values.push_back(su.table[static_cast<std::size_t>(id)]);
    }
    auto [opt_w, assign] = optimal_matching(raw, su.supply);
    LayeredState greedy(values, su.m, su.supply, su.rho, su.eps);
    std::cout << "opt=" << format_double(opt_w)
              << " greedy_layered=" << format_double(greedy.welfare())
              << " phi=" << greedy.phi() << "\n";
    return 0;
  }
  if (game == "bandwidth") {
    BandwidthSetup su = parse_bandwidth_instance(inst);
    std::vector<ConcaveValuation> values;
    for (int id : su.initial) values.push_back(su.table[static_cast<std::size_t>(id)]);
    auto [xs, w] = waterfill_optimum(values);
    auto [counts, seg_w] = segmented_optimum(values, su.delta);
    LayeredSegments layered(values, su.delta, su.rho, su.eps);
    std::cout << "waterfill=" << format_double(w)
              << " segmented=" << format_double(seg_w)
              << " greedy_layered=" << format_double(layered.welfare()) << "\n";
    return 0;
  }
  if (game == "congestion") {
    CongestionSetup su = parse_congestion_instance(inst);
    CongestionGame g(su.elements, su.types);
    CongestionBoundGame bound(&g, su.initial);
    auto [opt_c, profile] = brute_force_opt(bound);
    std::cout << "opt=" << format_double(opt_c) << " profile=";
    for (std::size_t i = 0; i < profile.size(); ++i)
      std::cout << (i ? "," : "") << profile[i];
    std::cout << "\n";
    return 0;
  }
  throw config_error("oracle: unknown game '" + game + "'");
}

// Sample a coupled outcome sequence from a JSON file holding a list of
// distributions over a shared outcome space plus the change steps.
int cmd_couple(const std::string& dists_path, std::uint64_t seed, int samples) {
  json j = json::parse(read_file(dists_path));
  std::vector<FiniteDistribution> sigma;
  for (const auto& d : j.at("distributions")) sigma.push_back(parse_distribution(d));
  std::set<int> change_steps;
  for (int s : j.at("change_steps").get<std::vector<int>>()) change_steps.insert(s);
  Rng rng(seed);
  for (int rep = 0; rep < samples; ++rep) {
    auto xs = stable_sequence_sample(sigma, change_steps, rng);
    for (std::size_t t = 0; t < xs.size(); ++t)
      std::cout << (t ? "," : "") << xs[t];
    std::cout << "\n";
  }
  for (std::size_t t = 0; t + 1 < sigma.size(); ++t)
    if (change_steps.count(static_cast<int>(t)))
      std::cout << "tv[" << t << "]=" << format_double(tv_distance(sigma[t], sigma[t + 1]))
                << "\n";
  return 0;
}

int cmd_nash(const std::string& game, const std::string& instance_path) {
  json inst = json::parse(read_file(instance_path));
  if (game == "matching") {
    MatchingSetup su = parse_matching_instance(inst);
    std::vector<UnitDemandValuation> values;
    for (int id : su.initial) values.push_back(su.table[static_cast<std::size_t>(id)]);
    MatchingBoundGame bound(values, su.m, su.supply, su.grid(), true);
    auto eq = enumerate_pure_nash(bound);
    std::cout << eq.size() << " pure equilibria\n";
    for (const auto& s : eq) {
      for (std::size_t i = 0; i < s.size(); ++i) std::cout << (i ? "," : "") << s[i];
      std::cout << " welfare=" << format_double(social_objective(bound, s)) << "\n";
    }
    return 0;
  }
  if (game == "congestion") {
    CongestionSetup su = parse_congestion_instance(inst);
    CongestionGame g(su.elements, su.types);
    CongestionBoundGame bound(&g, su.initial);
    auto eq = enumerate_pure_nash(bound);
    std::cout << eq.size() << " pure equilibria\n";
    for (const auto& s : eq) {
      for (std::size_t i = 0; i < s.size(); ++i) std::cout << (i ? "," : "") << s[i];
      std::cout << " cost=" << format_double(social_objective(bound, s)) << "\n";
    }
    return 0;
  }
  if (game == "bandwidth") {
    BandwidthSetup su = parse_bandwidth_instance(inst);
    std::vector<ConcaveValuation> values;
    for (int id : su.initial) values.push_back(su.table[static_cast<std::size_t>(id)]);
    BandwidthBoundGame bound(values, su.zeta());
    auto eq = enumerate_pure_nash(bound);
    std::cout << eq.size() << " pure equilibria\n";
    return 0;
  }
  throw config_error("nash: unknown game '" + game + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynpop: learning and efficiency experiments in games with dynamic player populations"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format = "both", game, instance_path, dists_path;
  std::uint64_t seed = 1;
  bool strict = false;
  double lambda = 0.0;
  std::vector<double> ps;
  int samples = 1;

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the config seed list");
  run->add_option("--out-dir", out_dir, "output directory");
  run->add_option("--format", format, "csv|json|both")->check(CLI::IsMember({"csv", "json", "both"}));
  run->add_flag("--strict", strict, "exit 4 when a bound check fails");

  auto* sw = app.add_subcommand("sweep", "welfare-ratio vs turnover probability");
  sw->add_option("--config", config_path, "experiment config JSON")->required();
  sw->add_option("--p", ps, "turnover probabilities to sweep");
  sw->add_option("--out-dir", out_dir, "output directory");

  auto* vs = app.add_subcommand("verify-smoothness", "exhaustive smoothness check");
  vs->add_option("--game", game, "matching|bandwidth|congestion")->required();
  vs->add_option("--instance", instance_path, "instance JSON")->required();
  auto* lambda_opt = vs->add_option("--lambda", lambda, "claimed lambda");

  auto* orc = app.add_subcommand("oracle", "welfare oracles for an instance");
  orc->add_option("--game", game, "matching|bandwidth|congestion")->required();
  orc->add_option("--instance", instance_path, "instance JSON")->required();

  auto* cp = app.add_subcommand("couple", "sample a coupled stable sequence");
  cp->add_option("--dists", dists_path, "distribution sequence JSON")->required();
  cp->add_option("--seed", seed, "rng seed");
  cp->add_option("--samples", samples, "number of sampled sequences");

  auto* nash = app.add_subcommand("nash", "enumerate pure Nash equilibria");
  nash->add_option("--game", game, "matching|bandwidth|congestion")->required();
  nash->add_option("--instance", instance_path, "instance JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, seed, seed_opt->count() > 0, out_dir, format, strict);
    if (sw->parsed()) return cmd_sweep(config_path, ps, out_dir);
    if (vs->parsed())
      return cmd_verify_smoothness(game, instance_path, lambda, lambda_opt->count() > 0);
    if (orc->parsed()) return cmd_oracle(game, instance_path);
    if (cp->parsed()) return cmd_couple(dists_path, seed, samples);
    if (nash->parsed()) return cmd_nash(game, instance_path);
  } catch (const capacity_error& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 3;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const io_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const argument_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
