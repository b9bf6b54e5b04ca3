#pragma once

// JSON parsing/serialization for instance files, experiment configs, report
// summaries and distribution dumps, plus small file helpers.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynpop/distribution.hpp"
#include "dynpop/harness.hpp"

namespace dynpop {

using json = nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << content;
  if (!out) throw io_error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Instances.

// {m, s, rho, epsilon, delta, players:[{values:[...]}], pool:[{values:[...]}]}
inline MatchingSetup parse_matching_instance(const json& j) {
  MatchingSetup su;
  try {
    su.m = j.at("m").get<int>();
    su.supply = j.value("s", 1);
    su.rho = j.at("rho").get<double>();
    su.eps = j.value("epsilon", 0.25);
    su.grid_delta = j.value("delta", 0.25);
    su.cap_bids_to_value = j.value("cap_bids_to_value", true);
    for (const auto& p : j.at("players")) {
      UnitDemandValuation v{p.at("values").get<std::vector<double>>()};
      if (static_cast<int>(v.values.size()) != su.m)
        throw config_error("matching instance: value row length != m");
      v.validate(su.rho);
      su.table.push_back(std::move(v));
      su.initial.push_back(static_cast<int>(su.table.size()) - 1);
    }
    if (j.contains("pool")) {
      for (const auto& p : j.at("pool")) {
        UnitDemandValuation v{p.at("values").get<std::vector<double>>()};
        v.validate(su.rho);
        su.table.push_back(std::move(v));
        su.pool.push_back(static_cast<int>(su.table.size()) - 1);
      }
    } else {
      su.pool = su.initial;
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("matching instance: ") + e.what());
  }
  return su;
}

// {rho, alpha, epsilon, delta, players:[{a,b}], pool:[{a,b}]}
inline BandwidthSetup parse_bandwidth_instance(const json& j) {
  BandwidthSetup su;
  try {
    su.rho = j.at("rho").get<double>();
    su.alpha = j.at("alpha").get<double>();
    su.eps = j.value("epsilon", 0.25);
    su.delta = j.at("delta").get<double>();
    for (const auto& p : j.at("players")) {
      ConcaveValuation v{p.at("a").get<double>(), p.at("b").get<double>()};
      v.validate(su.rho, su.alpha);
      su.table.push_back(v);
      su.initial.push_back(static_cast<int>(su.table.size()) - 1);
    }
    if (j.contains("pool")) {
      for (const auto& p : j.at("pool")) {
        ConcaveValuation v{p.at("a").get<double>(), p.at("b").get<double>()};
        v.validate(su.rho, su.alpha);
        su.table.push_back(v);
        su.pool.push_back(static_cast<int>(su.table.size()) - 1);
      }
    } else {
      su.pool = su.initial;
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("bandwidth instance: ") + e.what());
  }
  return su;
}

// {elements:[{a,b} | {coeffs:[...]}], types:[{strategies:[[e,...],...]}],
//  players:[type_id,...], pool:[type_id,...]}
inline CongestionSetup parse_congestion_instance(const json& j) {
  CongestionSetup su;
  try {
    for (const auto& e : j.at("elements")) {
      if (e.contains("coeffs"))
        su.elements.push_back({e.at("coeffs").get<std::vector<double>>()});
      else
        su.elements.push_back(
            Latency::linear(e.at("a").get<double>(), e.value("b", 0.0)));
    }
    for (const auto& t : j.at("types")) {
      CongestionType type;
      for (const auto& s : t.at("strategies"))
        type.strategies.push_back(s.get<std::vector<int>>());
      su.types.push_back(std::move(type));
    }
    if (j.contains("players"))
      su.initial = j.at("players").get<std::vector<int>>();
    else
      for (std::size_t i = 0; i < su.types.size(); ++i)
        su.initial.push_back(static_cast<int>(i));
    if (j.contains("pool"))
      su.pool = j.at("pool").get<std::vector<int>>();
    else {
      for (std::size_t i = 0; i < su.types.size(); ++i)
        su.pool.push_back(static_cast<int>(i));
    }
    for (int id : su.initial)
      if (id < 0 || id >= static_cast<int>(su.types.size()))
        throw config_error("congestion instance: bad player type id");
    for (int id : su.pool)
      if (id < 0 || id >= static_cast<int>(su.types.size()))
        throw config_error("congestion instance: bad pool type id");
  } catch (const json::exception& e) {
    throw config_error(std::string("congestion instance: ") + e.what());
  }
  return su;
}

// ---------------------------------------------------------------------------
// Experiment config.

inline ExperimentConfig parse_config(const json& j, const std::string& base_dir) {
  ExperimentConfig cfg;
  try {
    std::string game = j.at("game").get<std::string>();
    std::string instance_path = j.at("instance").get<std::string>();
    if (!instance_path.empty() && instance_path[0] != '/')
      instance_path = base_dir.empty() ? instance_path : base_dir + "/" + instance_path;
    json inst = json::parse(read_file(instance_path));
    if (game == "matching") {
      cfg.game = GameId::matching;
      cfg.matching = parse_matching_instance(inst);
      cfg.n = j.value("n", static_cast<int>(cfg.matching->initial.size()));
    } else if (game == "bandwidth") {
      cfg.game = GameId::bandwidth;
      cfg.bandwidth = parse_bandwidth_instance(inst);
      cfg.n = j.value("n", static_cast<int>(cfg.bandwidth->initial.size()));
    } else if (game == "congestion") {
      cfg.game = GameId::congestion;
      cfg.congestion = parse_congestion_instance(inst);
      cfg.n = j.value("n", static_cast<int>(cfg.congestion->initial.size()));
    } else {
      throw config_error("config: unknown game '" + game + "'");
    }
    cfg.p = j.value("p", 0.0);
    cfg.horizon = j.at("T").get<int>();
    if (j.contains("seeds")) {
      if (j.at("seeds").is_array()) {
        cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      } else {
        std::uint64_t base = j.at("seeds").value("base", 1);
        int count = j.at("seeds").value("count", 1);
        cfg.seeds.clear();
        for (int i = 0; i < count; ++i) cfg.seeds.push_back(base + static_cast<std::uint64_t>(i));
      }
    }
    if (j.contains("learner")) {
      const auto& l = j.at("learner");
      std::string kind = l.value("kind", "fixed-share");
      if (kind == "fixed-share")
        cfg.learner = LearnerKind::fixed_share;
      else if (kind == "covering")
        cfg.learner = LearnerKind::covering;
      else
        throw config_error("config: unknown learner '" + kind + "'");
      if (l.contains("eta")) cfg.eta = l.at("eta").get<double>();
      if (l.contains("alpha_mix")) cfg.alpha_mix = l.at("alpha_mix").get<double>();
    }
    std::string bench = j.value("benchmark", std::string());
    if (bench.empty())
      cfg.benchmark = cfg.game == GameId::congestion
                          ? BenchmarkKind::brute_opt_stabilized
                          : BenchmarkKind::greedy_layered;
    else if (bench == "greedy-layered")
      cfg.benchmark = BenchmarkKind::greedy_layered;
    else if (bench == "brute-opt-stabilized")
      cfg.benchmark = BenchmarkKind::brute_opt_stabilized;
    else if (bench == "coupled-private")
      cfg.benchmark = BenchmarkKind::coupled_private;
    else
      throw config_error("config: unknown benchmark '" + bench + "'");
    std::string arrival = j.value("arrival", std::string("iid-pool"));
    if (arrival == "iid-pool")
      cfg.arrival = ArrivalPolicyKind::iid_pool;
    else if (arrival == "rotation")
      cfg.arrival = ArrivalPolicyKind::rotation;
    else if (arrival == "scripted")
      cfg.arrival = ArrivalPolicyKind::scripted;
    else if (arrival == "adversarial-worst")
      cfg.arrival = ArrivalPolicyKind::adversarial_worst;
    else
      throw config_error("config: unknown arrival policy '" + arrival + "'");
    if (j.contains("script"))
      for (const auto& e : j.at("script"))
        cfg.script.push_back({e.at("t").get<int>(), e.at("slot").get<int>(),
                              e.at("type").get<int>()});
    cfg.privacy_eps = j.value("privacy_epsilon", 0.2);
    cfg.eta_bound = j.value("eta_bound", 0.1);
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::string dir;
  auto slash = path.find_last_of('/');
  if (slash != std::string::npos) dir = path.substr(0, slash);
  return parse_config(json::parse(read_file(path)), dir);
}

// ---------------------------------------------------------------------------
// Report and distribution serialization.

inline json report_summary_json(const RunReport& r) {
  json j;
  j["seed"] = r.seed;
  j["n"] = r.n;
  j["T"] = r.horizon;
  j["p"] = r.p;
  j["kind"] = r.kind == GameKind::mechanism ? "mechanism" : "cost-game";
  j["nominal_strategies"] = r.nominal_strategies;
  j["cum_objective"] = r.cum_objective;
  j["cum_opt"] = r.cum_opt;
  j["cum_benchmark"] = r.cum_benchmark;
  j["cum_ratio"] = r.cum_opt > 0 ? r.cum_objective / r.cum_opt : 0.0;
  j["mean_k"] = r.stability.mean_k();
  j["mean_kappa"] = r.stability.mean_kappa();
  j["fitted_cr"] = r.fitted_cr;
  j["events"] = r.events.size();
  j["constants"] = r.constants;
  j["verdicts"] = r.verdicts;
  return j;
}

inline json aggregate_json(const AggregateReport& agg) {
  json j;
  j["runs"] = agg.runs;
  j["mean_cum_objective"] = agg.mean_cum_objective;
  j["mean_cum_opt"] = agg.mean_cum_opt;
  j["mean_cum_benchmark"] = agg.mean_cum_benchmark;
  j["mean_ratio"] = agg.mean_ratio;
  j["mean_k"] = agg.mean_k;
  j["mean_kappa"] = agg.mean_kappa;
  j["max_fitted_cr"] = agg.max_fitted_cr;
  j["verdicts"] = agg.verdicts;
  return j;
}

// {omega:[ids], p:[...]}
inline json distribution_json(const std::vector<int>& omega,
                              const FiniteDistribution& dist) {
  json j;
  j["omega"] = omega;
  j["p"] = dist.p;
  return j;
}

inline FiniteDistribution parse_distribution(const json& j) {
  FiniteDistribution d;
  d.p = j.at("p").get<std::vector<double>>();
  d.validate();
  return d;
}

}  // namespace dynpop
