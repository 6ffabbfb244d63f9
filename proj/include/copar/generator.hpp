#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "copar/faults.hpp"
#include "copar/message.hpp"
#include "copar/metrics.hpp"
#include "copar/node.hpp"
#include "copar/workload.hpp"

namespace copar {

struct ScriptedTx {
  NodeId owner = 0;
  TxKind kind = TxKind::Request;
  ResourceVector delta;
};

// The transaction generator doubles as the system monitor: it emits sequenced
// transactions at the configured rate and strands head-of-line transactions
// whose owner left the pool.
class GeneratorAgent {
 public:
  GeneratorAgent(const RunConfig& cfg, NodeEnv env,
                 std::optional<std::vector<ScriptedTx>> script = std::nullopt)
      : cfg_(cfg), env_(std::move(env)), state_(cfg.seed), script_(std::move(script)) {
    if (script_) total_ = static_cast<Seq>(script_->size());
    else total_ = cfg_.total_tx;
    period_us_ = static_cast<long long>(1e6 / cfg_.rate);
    if (period_us_ < 1) period_us_ = 1;
  }

  void start() {
    if (total_ == 0) {
      done_ = true;
      return;
    }
    env_.schedule(period_us_, TimerTag::GenEmit, 0);
    env_.schedule(cfg_.timeouts.watchdog_us, TimerTag::Watchdog, 0);
  }

  void on_timer(TimerTag tag, long long) {
    if (tag == TimerTag::GenEmit) {
      emit();
    } else if (tag == TimerTag::Watchdog) {
      watchdog();
    }
  }

  void on_message(NodeId, const Envelope& e) {
    if (e.type == MsgType::RemoveChild || e.type == MsgType::Abort) {
      if (e.tx_seq > last_finalized_) last_finalized_ = e.tx_seq;
      maybe_done();
    }
  }

  bool done() const { return done_; }
  Seq issued() const { return state_.next_seq - 1; }
  Seq last_finalized() const { return last_finalized_; }
  const std::map<Seq, NodeId>& ownership() const { return owner_of_; }
  const GeneratorState& state() const { return state_; }

 private:
  void emit() {
    if (state_.next_seq > total_) return;
    // per-node send counter gates new traffic to the failure target
    if (cfg_.failure.enabled && !state_.dropped.count(cfg_.failure.target) &&
        state_.sent_per_node[cfg_.failure.target] >= cfg_.failure.generator_counter_threshold) {
      state_.dropped.insert(cfg_.failure.target);
      trace({now(), EventKind::Dropped, 0, kGeneratorId, cfg_.failure.target, std::nullopt, false});
    }
    Transaction tx;
    std::optional<NodeId> intended;
    if (script_) {
      const ScriptedTx& s = (*script_)[static_cast<std::size_t>(state_.next_seq - 1)];
      tx.seq = state_.next_seq++;
      tx.kind = s.kind;
      tx.delta = s.delta;
      tx.owner = s.owner;
      if (state_.dropped.count(tx.owner)) {
        intended = tx.owner;
        tx.owner = reroute_target(cfg_, state_, tx.owner);
      }
      ++state_.sent_per_node[tx.owner];
    } else {
      NodeId drawn = 0;
      tx = next_transaction_traced(drawn);
      if (drawn != tx.owner) intended = drawn;
    }
    owner_of_[tx.seq] = tx.owner;
    trace({now(), EventKind::Submitted, tx.seq, tx.owner,
           tx.kind == TxKind::Addition ? 1 : 0, tx.delta, false});
    if (intended) {
      trace({now(), EventKind::Rerouted, tx.seq, tx.owner, *intended, std::nullopt, false});
    }
    Envelope submit{kWireVersion, MsgType::Submit, kGeneratorId, tx.seq,
                    SubmitPayload{tx.owner, tx.kind, tx.delta}};
    env_.send(tx.owner, submit);
    if (state_.next_seq <= total_) env_.schedule(period_us_, TimerTag::GenEmit, 0);
  }

  Transaction next_transaction_traced(NodeId& drawn_out) {
    return next_transaction(state_, cfg_, &drawn_out);
  }

  void watchdog() {
    if (done_) return;
    Seq blocked = last_finalized_ + 1;
    bool stalled = (last_finalized_ == watchdog_mark_) && (issued() >= blocked);
    watchdog_mark_ = last_finalized_;
    if (stalled) {
      auto it = owner_of_.find(blocked);
      if (it != owner_of_.end() && state_.dropped.count(it->second)) {
        int reachable = cfg_.n() - static_cast<int>(state_.dropped.size());
        if (majority_reachable(cfg_.n(), reachable)) {
          // strand the transaction; the next owner in sequence takes over
          trace({now(), EventKind::Stranded, blocked, it->second, 0, std::nullopt, false});
          Envelope abort{kWireVersion, MsgType::Abort, kGeneratorId, blocked, EmptyPayload{}};
          for (const auto& nd : cfg_.nodes) {
            if (!state_.dropped.count(nd.id)) env_.send(nd.id, abort);
          }
          last_finalized_ = blocked;
          maybe_done();
        }
        // otherwise wait for a majority to come back online
      }
    }
    if (!done_) env_.schedule(cfg_.timeouts.watchdog_us, TimerTag::Watchdog, 0);
  }

  void maybe_done() {
    if (issued() == total_ && last_finalized_ >= total_) done_ = true;
  }

  long long now() const { return env_.now_us(); }
  void trace(TraceEvent e) {
    if (env_.trace) env_.trace->record(std::move(e));
  }

  RunConfig cfg_;
  NodeEnv env_;
  GeneratorState state_;
  std::optional<std::vector<ScriptedTx>> script_;
  Seq total_ = 0;
  long long period_us_ = 0;
  Seq last_finalized_ = 0;
  Seq watchdog_mark_ = -1;
  std::map<Seq, NodeId> owner_of_;
  bool done_ = false;
};

}  // namespace copar
