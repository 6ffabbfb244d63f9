#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "copar/generator.hpp"
#include "copar/node.hpp"
#include "copar/sim.hpp"

namespace copar {

struct SimResult {
  Trace trace;
  std::map<NodeId, NodeCounts> counts;
  std::map<NodeId, std::size_t> child_backlog;
  std::map<NodeId, bool> dropped_target_view;
  std::map<Seq, NodeId> ownership;
  Seq issued = 0;
  Seq finalized = 0;
  bool generator_done = false;
};

// One deterministic in-memory run: all nodes plus the generator wired through
// a single seeded event queue. Count invariants are checked after every event.
class SimRunner {
 public:
  explicit SimRunner(const RunConfig& cfg, std::optional<std::vector<ScriptedTx>> script = std::nullopt)
      : cfg_(cfg), world_(cfg.seed ^ 0x9e3779b97f4a7c15ull, cfg.link_latency) {
    trace_.header() = cfg_.echo();
    for (const auto& nd : cfg_.nodes) {
      auto env = make_env(nd.id);
      nodes_.emplace(nd.id, std::make_unique<ProtocolNode>(nd.id, cfg_, env));
      NodeId id = nd.id;
      world_.register_node(
          id, [this, id](NodeId from, const Envelope& e) { nodes_.at(id)->on_message(from, e); },
          [this, id](TimerTag tag, long long aux) { nodes_.at(id)->on_timer(tag, aux); });
    }
    generator_ = std::make_unique<GeneratorAgent>(cfg_, make_env(kGeneratorId), std::move(script));
    world_.register_node(
        kGeneratorId,
        [this](NodeId from, const Envelope& e) { generator_->on_message(from, e); },
        [this](TimerTag tag, long long aux) { generator_->on_timer(tag, aux); });
  }

  SimResult run(long long max_events = 20'000'000) {
    generator_->start();
    long long steps = 0;
    while (world_.step(&trace_)) {
      check_invariants();
      if (++steps > max_events) throw ProtocolError("simulation exceeded the event budget");
    }
    SimResult res;
    res.trace = std::move(trace_);
    for (const auto& [id, node] : nodes_) {
      res.counts[id] = node->counts();
      res.child_backlog[id] = node->queues().child.size();
      res.dropped_target_view[id] = node->dropped_target();
    }
    res.ownership = generator_->ownership();
    res.issued = generator_->issued();
    res.finalized = generator_->last_finalized();
    res.generator_done = generator_->done();
    return res;
  }

  const ProtocolNode& node(NodeId id) const { return *nodes_.at(id); }
  SimWorld& world() { return world_; }

 private:
  NodeEnv make_env(NodeId id) {
    NodeEnv env;
    env.send = [this, id](NodeId to, const Envelope& e) { world_.send(id, to, e); };
    env.schedule = [this, id](long long delay_us, TimerTag tag, long long aux) {
      world_.schedule(id, delay_us, tag, aux);
    };
    env.now_us = [this]() { return world_.now_us(); };
    env.draw_proc_latency = [this]() { return world_.draw_proc_latency(cfg_.proc_latency); };
    env.trace = &trace_;
    return env;
  }

  void check_invariants() const {
    for (const auto& [id, node] : nodes_) {
      if (!node->counts().counts_nonneg()) {
        throw ProtocolError("count invariant violated at node " + std::to_string(id));
      }
    }
  }

  RunConfig cfg_;
  SimWorld world_;
  Trace trace_;
  std::map<NodeId, std::unique_ptr<ProtocolNode>> nodes_;
  std::unique_ptr<GeneratorAgent> generator_;
};

inline SimResult run_sim(const RunConfig& cfg,
                         std::optional<std::vector<ScriptedTx>> script = std::nullopt) {
  SimRunner runner(cfg, std::move(script));
  return runner.run();
}

}  // namespace copar
