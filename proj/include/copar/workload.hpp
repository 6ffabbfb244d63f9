#pragma once

#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "copar/faults.hpp"
#include "copar/types.hpp"

namespace copar {

struct NodeAddress {
  NodeId id = 0;
  std::string address;  // host:port, networked mode only
};

struct LatencyRange {
  long long min_us = 0;
  long long max_us = 0;
};

struct Timeouts {
  long long prepare_us = 2'000'000;
  long long commit_us = 2'000'000;
  long long watchdog_us = 8'000'000;
};

struct RunConfig {
  std::vector<NodeAddress> nodes;
  std::string generator_address;
  int m = 1;
  ResourceVector R;
  CostBound c;
  long long total_tx = 0;
  double rate = 1.0;  // transactions per second
  Amount request_min = 1, request_max = 1;
  Amount donation_min = 1, donation_max = 1;
  double donation_fraction = 0.0;
  double return_fraction = 0.5;  // among non-donations, probability of a return
  std::uint64_t seed = 0;
  LatencyRange link_latency{1'000, 20'000};
  LatencyRange proc_latency{1'000, 3'000};
  Timeouts timeouts;
  FailurePlan failure;
  bool legacy_charge = false;  // literal owner charging, redistribution off

  int n() const { return static_cast<int>(nodes.size()); }

  std::vector<std::string> echo() const {
    std::vector<std::string> out;
    auto add = [&out](const std::string& k, const std::string& v) { out.push_back(k + "=" + v); };
    std::string ids;
    for (const auto& nd : nodes) ids += (ids.empty() ? "" : " ") + std::to_string(nd.id);
    add("nodes", ids);
    add("resource_types", std::to_string(m));
    add("initial_resources", R.str());
    add("cost_bound", to_string(c.c));
    add("total_tx", std::to_string(total_tx));
    add("rate", std::to_string(rate));
    add("request_range", std::to_string(request_min) + ".." + std::to_string(request_max));
    add("donation_range", std::to_string(donation_min) + ".." + std::to_string(donation_max));
    add("donation_fraction", std::to_string(donation_fraction));
    add("return_fraction", std::to_string(return_fraction));
    add("seed", std::to_string(seed));
    add("link_latency_us", std::to_string(link_latency.min_us) + ".." +
                               std::to_string(link_latency.max_us));
    add("proc_latency_us", std::to_string(proc_latency.min_us) + ".." +
                               std::to_string(proc_latency.max_us));
    add("legacy_charge", legacy_charge ? "true" : "false");
    if (failure.enabled) {
      add("failure_target", std::to_string(failure.target));
      add("failure_thresholds", std::to_string(failure.pessimistic_counter_threshold) + "/" +
                                    std::to_string(failure.generator_counter_threshold));
    }
    return out;
  }
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ConfigError(std::string("missing config field: ") + name);
  return *it;
}

inline Rational json_rational(const nlohmann::json& j, const char* name) {
  if (j.is_string()) return parse_decimal(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long long>());
  throw ConfigError(std::string(name) + " must be a decimal string or integer");
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::require_field;
  RunConfig cfg;
  for (const auto& nd : require_field(j, "nodes")) {
    NodeAddress a;
    a.id = require_field(nd, "id").get<NodeId>();
    if (a.id <= 0) throw ConfigError("node id must be positive");
    if (nd.contains("address")) a.address = nd["address"].get<std::string>();
    cfg.nodes.push_back(std::move(a));
  }
  if (cfg.nodes.empty()) throw ConfigError("missing config field: nodes (empty list)");
  {
    std::set<NodeId> ids;
    for (const auto& nd : cfg.nodes) {
      if (!ids.insert(nd.id).second) throw ConfigError("duplicate node id");
    }
  }
  if (j.contains("generator_address")) cfg.generator_address = j["generator_address"];
  cfg.R = ResourceVector(require_field(j, "initial_resources").get<std::vector<Amount>>());
  if (!cfg.R.all_nonneg()) throw ConfigError("initial_resources entry is negative");
  cfg.m = j.contains("resource_types") ? j["resource_types"].get<int>()
                                       : static_cast<int>(cfg.R.size());
  if (cfg.m < 1 || static_cast<std::size_t>(cfg.m) != cfg.R.size()) {
    throw ConfigError("resource_types does not match initial_resources length");
  }
  cfg.c = CostBound(detail::json_rational(require_field(j, "cost_bound"), "cost_bound"));
  cfg.total_tx = require_field(j, "total_tx").get<long long>();
  if (cfg.total_tx < 0) throw ConfigError("total_tx must be non-negative");
  cfg.rate = require_field(j, "rate").get<double>();
  if (cfg.rate <= 0) throw ConfigError("rate must be positive");
  auto range = [&j](const char* name, Amount& lo, Amount& hi) {
    const auto& r = detail::require_field(j, name);
    if (!r.is_array() || r.size() != 2) throw ConfigError(std::string(name) + " must be [min,max]");
    lo = r[0].get<Amount>();
    hi = r[1].get<Amount>();
    if (lo < 0 || hi < lo) throw ConfigError(std::string(name) + " is empty or negative");
  };
  range("request_range", cfg.request_min, cfg.request_max);
  range("donation_range", cfg.donation_min, cfg.donation_max);
  if (j.contains("donation_fraction")) cfg.donation_fraction = j["donation_fraction"].get<double>();
  if (cfg.donation_fraction < 0 || cfg.donation_fraction > 1) {
    throw ConfigError("donation_fraction must be in [0,1]");
  }
  if (j.contains("return_fraction")) cfg.return_fraction = j["return_fraction"].get<double>();
  if (cfg.return_fraction < 0 || cfg.return_fraction > 1) {
    throw ConfigError("return_fraction must be in [0,1]");
  }
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  auto lat = [&j](const char* name, LatencyRange& out) {
    if (!j.contains(name)) return;
    const auto& r = j[name];
    if (!r.is_array() || r.size() != 2) throw ConfigError(std::string(name) + " must be [min,max]");
    out.min_us = static_cast<long long>(r[0].get<double>() * 1000.0);
    out.max_us = static_cast<long long>(r[1].get<double>() * 1000.0);
    if (out.min_us < 0 || out.max_us < out.min_us) throw ConfigError(std::string(name) + " is empty");
  };
  lat("latency_ms", cfg.link_latency);
  lat("proc_latency_ms", cfg.proc_latency);
  if (j.contains("timeouts")) {
    const auto& t = j["timeouts"];
    if (t.contains("prepare_ms")) cfg.timeouts.prepare_us = t["prepare_ms"].get<long long>() * 1000;
    if (t.contains("commit_ms")) cfg.timeouts.commit_us = t["commit_ms"].get<long long>() * 1000;
    if (t.contains("watchdog_ms"))
      cfg.timeouts.watchdog_us = t["watchdog_ms"].get<long long>() * 1000;
  }
  if (j.contains("failure")) {
    const auto& f = j["failure"];
    cfg.failure.enabled = f.value("enabled", false);
    if (cfg.failure.enabled) {
      cfg.failure.target = detail::require_field(f, "target").get<NodeId>();
      cfg.failure.pessimistic_counter_threshold = f.value("pessimistic_threshold", 50);
      cfg.failure.generator_counter_threshold = f.value("generator_threshold", 25);
      bool known = false;
      for (const auto& nd : cfg.nodes) known |= nd.id == cfg.failure.target;
      if (!known) throw ConfigError("failure.target is not a configured node");
      if (cfg.failure.pessimistic_counter_threshold >= cfg.total_tx ||
          cfg.failure.generator_counter_threshold >= cfg.total_tx) {
        throw ConfigError("failure thresholds must be below total_tx");
      }
    }
  }
  if (j.contains("legacy_charge")) cfg.legacy_charge = j["legacy_charge"].get<bool>();
  return cfg;
}

inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str());
}

// Generator-side draw state. A fixed seed reproduces the transaction stream
// byte for byte.
struct GeneratorState {
  Seq next_seq = 1;
  std::mt19937_64 rng;
  std::map<NodeId, long long> sent_per_node;
  std::set<NodeId> dropped;
  bool reroute_downstream_next = true;

  explicit GeneratorState(std::uint64_t seed) : rng(seed) {}
};

// Alternating ring neighbors of a dropped node, ring order = node list order.
inline NodeId reroute_target(const RunConfig& cfg, GeneratorState& state, NodeId intended) {
  std::size_t idx = 0;
  bool found = false;
  for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
    if (cfg.nodes[i].id == intended) {
      idx = i;
      found = true;
      break;
    }
  }
  if (!found) throw ProtocolError("reroute for unknown node");
  const std::size_t n = cfg.nodes.size();
  for (std::size_t step = 1; step <= n; ++step) {
    std::size_t cand = state.reroute_downstream_next ? (idx + step) % n : (idx + n - step) % n;
    NodeId id = cfg.nodes[cand].id;
    if (!state.dropped.count(id)) {
      state.reroute_downstream_next = !state.reroute_downstream_next;
      return id;
    }
  }
  throw ProtocolError("all nodes dropped; generator must wait for a majority");
}

// intended_out, when given, receives the owner drawn before any rerouting.
inline Transaction next_transaction(GeneratorState& state, const RunConfig& cfg,
                                    NodeId* intended_out = nullptr) {
  if (state.next_seq > cfg.total_tx) throw ProtocolError("generator exhausted");
  Transaction tx;
  tx.seq = state.next_seq++;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  bool donation = coin(state.rng) < cfg.donation_fraction;
  tx.delta = ResourceVector::zeros(static_cast<std::size_t>(cfg.m));
  if (donation) {
    tx.kind = TxKind::Addition;
    std::uniform_int_distribution<Amount> mag(cfg.donation_min, cfg.donation_max);
    for (int k = 0; k < cfg.m; ++k) tx.delta[k] = mag(state.rng);
  } else {
    tx.kind = TxKind::Request;
    bool is_return = coin(state.rng) < cfg.return_fraction;
    std::uniform_int_distribution<Amount> mag(cfg.request_min, cfg.request_max);
    for (int k = 0; k < cfg.m; ++k) {
      Amount units = mag(state.rng);
      tx.delta[k] = is_return ? units : -units;
    }
  }
  std::uniform_int_distribution<std::size_t> pick(0, cfg.nodes.size() - 1);
  NodeId owner = cfg.nodes[pick(state.rng)].id;
  if (intended_out) *intended_out = owner;
  if (state.dropped.count(owner)) owner = reroute_target(cfg, state, owner);
  tx.owner = owner;
  ++state.sent_per_node[owner];
  return tx;
}

}  // namespace copar
