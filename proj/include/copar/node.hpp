#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>

#include "copar/counts.hpp"
#include "copar/faults.hpp"
#include "copar/message.hpp"
#include "copar/metrics.hpp"
#include "copar/optimistic.hpp"
#include "copar/pessimistic.hpp"
#include "copar/reconcile.hpp"
#include "copar/sim.hpp"
#include "copar/workload.hpp"

namespace copar {

// Substrate hooks. All node state is mutated from a single execution context
// per node (the sim event loop or the node's mailbox thread), which is the
// serialization point shared by the permanent and temporary processors.
struct NodeEnv {
  std::function<void(NodeId to, const Envelope&)> send;
  std::function<void(long long delay_us, TimerTag tag, long long aux)> schedule;
  std::function<long long()> now_us;
  std::function<long long()> draw_proc_latency;  // temporary-processor service time
  Trace* trace = nullptr;
};

// One COPAR server: a permanent processor (two-phase commit over the parent
// queue) and a temporary processor (cost-bounded grants from the child queue)
// sharing NodeCounts.
class ProtocolNode {
 public:
  ProtocolNode(NodeId id, const RunConfig& cfg, NodeEnv env)
      : id_(id), cfg_(cfg), env_(std::move(env)) {
    auto [P, T] = init_counts(cfg_.R, cfg_.n(), cfg_.c);
    counts_ = NodeCounts::make(static_cast<std::size_t>(cfg_.m));
    counts_.P = P;
    counts_.T = T;
    for (const auto& nd : cfg_.nodes) {
      active_.insert(nd.id);
      totals_.ra_per_node[nd.id].assign(static_cast<std::size_t>(cfg_.m), 0);
    }
  }

  NodeId id() const { return id_; }
  const NodeCounts& counts() const { return counts_; }
  const NodeQueues& queues() const { return queues_; }
  const std::set<NodeId>& active_set() const { return active_; }
  Seq last_finalized() const { return last_finalized_; }
  bool dropped_target() const { return target_dropped_; }
  const std::map<Seq, OwnerLedgerEntry>& ledger() const { return ledger_; }

  // entry point for both substrates
  void on_message(NodeId from, const Envelope& env) {
    if (target_dropped_ && from == cfg_.failure.target && from != id_) {
      if (env.type == MsgType::OptReport) {
        trace({now(), EventKind::Orphaned, env.tx_seq, from, 0, std::nullopt, false});
      }
      return;  // survivors no longer talk to the dropped server
    }
    switch (env.type) {
      case MsgType::Submit:
        handle_submit(env.tx_seq, std::get<SubmitPayload>(env.payload));
        break;
      case MsgType::BroadcastChild:
        handle_broadcast_child(env.tx_seq, std::get<SubmitPayload>(env.payload));
        break;
      case MsgType::Prepare:
        handle_prepare_msg(from, env.tx_seq, std::get<PreparePayload>(env.payload));
        break;
      case MsgType::Vote:
        handle_vote(from, env.tx_seq, std::get<VotePayload>(env.payload));
        break;
      case MsgType::Commit:
        handle_commit(env.tx_seq, std::get<CommitPayload>(env.payload));
        break;
      case MsgType::Redistribute:
        apply_redistribute(std::get<RedistributePayload>(env.payload));
        break;
      case MsgType::RemoveChild:
        handle_remove_child(env.tx_seq);
        break;
      case MsgType::Abort:
        handle_abort(env.tx_seq);
        break;
      case MsgType::OptReport:
        handle_opt_report_msg(from, env.tx_seq, std::get<OptReportPayload>(env.payload));
        break;
      case MsgType::OptReply:
        handle_opt_reply(env.tx_seq, std::get<OptReplyPayload>(env.payload));
        break;
      case MsgType::Ping:
        break;
    }
    // an aborted-minority round retries once traffic shows the pool changed
    if (!round_ && retry_seq_ > last_finalized_) maybe_start_round();
  }

  void on_timer(TimerTag tag, long long aux) {
    switch (tag) {
      case TimerTag::TempProcess:
        temp_process(aux);
        break;
      case TimerTag::RoundTimeout:
        if (round_ && round_->epoch == aux) complete_round();
        break;
      default:
        break;
    }
  }

 private:
  struct RoundCtx {
    Seq seq = 0;
    Transaction tx;
    long long epoch = 0;
    std::set<NodeId> participants;
    std::map<NodeId, VotePayload> votes;
  };

  // ---- temporary (optimistic) processor ----

  void kick_temp() {
    if (temp_busy_ || queues_.child.empty()) return;
    const Transaction& head = queues_.child.front();
    for (std::size_t k = 0; k < head.delta.size(); ++k) {
      if (head.delta[k] < 0 && counts_.temp_stopped[k]) return;  // wait for refresh
    }
    temp_busy_ = true;
    picked_ = head.seq;
    trace({now(), EventKind::OptPickup, head.seq, id_, 0, std::nullopt, false});
    env_.schedule(env_.draw_proc_latency(), TimerTag::TempProcess, picked_);
  }

  void temp_process(Seq picked) {
    temp_busy_ = false;
    if (queues_.child.empty() || queues_.child.front().seq != picked) {
      kick_temp();  // head was removed while in flight
      return;
    }
    const Transaction& head = queues_.child.front();
    GrantResult r = try_optimistic(counts_, head);
    if (r == GrantResult::Blocked) return;  // a refresh re-kicks
    Transaction tx = head;
    queues_.child.pop_front();
    if (r == GrantResult::Granted) {
      trace({now(), EventKind::OptGranted, tx.seq, id_, 0, tx.delta, false});
      granted_[tx.seq] = tx.delta;
      Envelope rep{kWireVersion, MsgType::OptReport, id_, tx.seq, OptReportPayload{tx.delta}};
      send_to(tx.owner, rep);
    } else {
      trace({now(), EventKind::OptDiscarded, tx.seq, id_, 0, std::nullopt, false});
    }
    kick_temp();
  }

  void handle_opt_report_msg(NodeId from, Seq seq, const OptReportPayload& p) {
    auto it = ledger_.find(seq);
    if (it == ledger_.end()) throw ProtocolError("optimistic report for unknown transaction");
    ReportAction action = handle_opt_report(it->second, OptReport{seq, from, p.delta});
    if (action == ReportAction::BackoutUndone) {
      mark_state(seq, TxState::UndoneMarked);
      trace({now(), EventKind::Undone, seq, from, 0, std::nullopt, false});
    }
    Envelope reply{kWireVersion, MsgType::OptReply, id_, seq,
                   OptReplyPayload{action == ReportAction::Keep}};
    send_to(from, reply);
  }

  void handle_opt_reply(Seq seq, const OptReplyPayload& p) {
    auto it = granted_.find(seq);
    if (it == granted_.end()) throw ProtocolError("optimistic reply without a local grant");
    if (!p.keep) {
      apply_backout(counts_, it->second);
      trace({now(), EventKind::OptBackout, seq, id_, 0, std::nullopt, false});
    }
    granted_.erase(it);
    kick_temp();
  }

  // ---- permanent (pessimistic) processor ----

  void handle_submit(Seq seq, const SubmitPayload& p) {
    if (p.owner != id_) throw ProtocolError("submission addressed to the wrong owner");
    Transaction tx{seq, id_, p.delta, p.kind, TxState::Pending};
    queues_.parent[seq] = tx;
    ledger_[seq] = OwnerLedgerEntry{seq};
    if (tx.kind == TxKind::Request) {
      queues_.child.push_back(tx);
      Envelope bc{kWireVersion, MsgType::BroadcastChild, id_, seq,
                  SubmitPayload{id_, tx.kind, tx.delta}};
      for (NodeId j : active_) {
        if (j != id_) env_.send(j, bc);
      }
      kick_temp();
    }
    maybe_start_round();
  }

  void handle_broadcast_child(Seq seq, const SubmitPayload& p) {
    if (p.kind != TxKind::Request) throw ProtocolError("additions never enter child queues");
    if (seq <= last_finalized_) return;  // already settled
    queues_.child.push_back(Transaction{seq, p.owner, p.delta, p.kind, TxState::Pending});
    kick_temp();
  }

  void handle_prepare_msg(NodeId from, Seq seq, const PreparePayload& p) {
    ++prepare_counter_;
    if (!target_dropped_ && id_ != cfg_.failure.target &&
        should_drop(prepare_counter_, cfg_.failure, from)) {
      drop_target();
      return;  // the dropped coordinator gets no vote
    }
    if (target_dropped_ && from == cfg_.failure.target) return;
    if (seq <= last_finalized_) return;  // stale
    if (seq > last_finalized_ + 1) {
      // commit traffic for seq-1 has not landed here yet; hold the prepare
      pending_prepares_[seq] = {from, p};
      return;
    }
    process_prepare(from, seq, p);
  }

  void process_prepare(NodeId from, Seq seq, const PreparePayload& p) {
    if (p.p_digest != count_digest(counts_.P)) {
      throw std::logic_error("consistency fault: permanent counts diverged from coordinator");
    }
    Transaction tx{seq, from, p.delta, p.kind, TxState::Pending};
    VoteValue v = handle_prepare(counts_, tx);
    Envelope vote{kWireVersion, MsgType::Vote, id_, seq,
                  VotePayload{v == VoteValue::Yes, counts_.ra_current}};
    env_.send(from, vote);
  }

  void maybe_start_round() {
    if (round_) return;
    Seq seq = last_finalized_ + 1;
    auto it = queues_.parent.find(seq);
    if (it == queues_.parent.end()) return;  // idle until the owner hears of it
    start_round(it->second);
  }

  void start_round(const Transaction& tx) {
    round_.emplace();
    round_->seq = tx.seq;
    round_->tx = tx;
    round_->epoch = ++round_epoch_;
    round_->participants = active_;
    trace({now(), EventKind::Prepared, tx.seq, id_, 0, std::nullopt, false});
    ++prepare_counter_;  // the coordinator notifies itself too
    Envelope prep{kWireVersion, MsgType::Prepare, id_, tx.seq,
                  PreparePayload{tx.kind, tx.delta, count_digest(counts_.P)}};
    for (NodeId j : round_->participants) {
      if (j != id_) env_.send(j, prep);
    }
    round_->votes[id_] = VotePayload{handle_prepare(counts_, tx) == VoteValue::Yes,
                                     counts_.ra_current};
    if (round_->votes.size() == round_->participants.size()) {
      complete_round();
    } else {
      env_.schedule(cfg_.timeouts.prepare_us, TimerTag::RoundTimeout, round_->epoch);
    }
  }

  void handle_vote(NodeId from, Seq seq, const VotePayload& p) {
    if (!round_ || round_->seq != seq) return;  // stale vote
    if (!round_->participants.count(from)) return;
    round_->votes[from] = p;
    if (round_->votes.size() == round_->participants.size()) complete_round();
  }

  void complete_round() {
    RoundCtx ctx = std::move(*round_);
    round_.reset();
    std::set<NodeId> responders;
    for (const auto& [j, _] : ctx.votes) responders.insert(j);
    if (!majority_reachable(cfg_.n(), static_cast<int>(responders.size()))) {
      // retried once the pool changes; the generator monitor handles a
      // permanently unreachable majority
      retry_seq_ = ctx.seq;
      return;
    }
    bool my_yes = ctx.votes.at(id_).yes;
    for (const auto& [j, v] : ctx.votes) {
      if (v.yes != my_yes) {
        throw std::logic_error("consistency fault: participants voted differently on identical P");
      }
    }
    // a timed-out minority is dropped from the pool for subsequent rounds
    active_ = responders;
    Outcome outcome =
        (ctx.tx.kind == TxKind::Addition || my_yes) ? Outcome::Committed : Outcome::Violation;
    finalize(ctx, responders, outcome);
  }

  void finalize(const RoundCtx& ctx, const std::set<NodeId>& responders, Outcome outcome) {
    const Transaction& tx = ctx.tx;
    auto& entry = ledger_.at(tx.seq);
    if (outcome == Outcome::Committed) {
      for (NodeId j : responders) {
        totals_.ra_per_node[j] =
            (j == id_) ? counts_.ra_current : ctx.votes.at(j).ra_current;
      }
      counts_.P += tx.delta;
      trace({now(), EventKind::Committed, tx.seq, id_, 0, tx.delta, false});
      mark_state(tx.seq, TxState::Committed);
      Envelope commit{kWireVersion, MsgType::Commit, id_, tx.seq,
                      CommitPayload{Outcome::Committed, tx.kind, tx.delta}};
      for (NodeId j : responders) {
        if (j != id_) env_.send(j, commit);
      }
      if (!cfg_.legacy_charge) {
        RedistributePayload rp;
        for (NodeId j : active_) rp.ra_snapshot[j] = totals_.ra_per_node[j];
        rp.targets = redistribute_all(counts_.P, cfg_.c, rp.ra_snapshot);
        trace({now(), EventKind::Redistributed, tx.seq, id_, 0, std::nullopt, false});
        Envelope redist{kWireVersion, MsgType::Redistribute, id_, tx.seq, rp};
        for (NodeId j : responders) {
          if (j != id_) env_.send(j, redist);
        }
        apply_redistribute(rp);
      } else if (tx.kind == TxKind::Request && !entry.optimistic_doer) {
        // legacy charging: the owner's budget absorbs a commit nobody granted
        for (std::size_t k = 0; k < counts_.T.size(); ++k) {
          counts_.T[k] += tx.delta[k];
          if (counts_.T[k] < 0) counts_.T[k] = 0;
        }
        trace({now(), EventKind::Charged, tx.seq, id_, 0, std::nullopt, false});
      }
    } else {
      trace({now(), EventKind::Violation, tx.seq, id_, 0, std::nullopt, false});
      mark_state(tx.seq, TxState::Violation);
      if (entry.optimistic_doer) {
        entry.undone = true;
        mark_state(tx.seq, TxState::UndoneMarked);
        trace({now(), EventKind::Undone, tx.seq, *entry.optimistic_doer, 0, std::nullopt, false});
      }
    }
    entry.permanently_done = true;
    entry.permanent_outcome = outcome;
    trace({now(), EventKind::Removed, tx.seq, id_, 0, std::nullopt, false});
    Envelope rm{kWireVersion, MsgType::RemoveChild, id_, tx.seq, EmptyPayload{}};
    for (NodeId j : active_) {
      if (j != id_) env_.send(j, rm);
    }
    env_.send(kGeneratorId, rm);
    handle_remove_child(tx.seq);
  }

  void handle_commit(Seq seq, const CommitPayload& p) {
    if (p.outcome == Outcome::Committed) {
      counts_.P += p.delta;
      if (!counts_.P.all_nonneg()) throw std::logic_error("committed delta drove P negative");
    }
  }

  void apply_redistribute(const RedistributePayload& p) {
    auto tit = p.targets.find(id_);
    auto sit = p.ra_snapshot.find(id_);
    if (tit == p.targets.end() || sit == p.ra_snapshot.end()) return;
    for (std::size_t k = 0; k < counts_.T.size(); ++k) {
      StaleAdjust sa = stale_adjust(tit->second[k], counts_.ra_current[k], sit->second[k]);
      counts_.T[k] = sa.T_new;
      counts_.temp_stopped[k] = sa.stopped;
      counts_.ra_recorded[k] = counts_.ra_current[k];
    }
    // adopt the coordinator's view of the pool and its activity snapshot
    totals_.ra_per_node.clear();
    std::set<NodeId> pool;
    for (const auto& [j, ra] : p.ra_snapshot) {
      totals_.ra_per_node[j] = ra;
      pool.insert(j);
    }
    active_ = pool;
    kick_temp();
  }

  void handle_remove_child(Seq seq) {
    if (seq > last_finalized_) last_finalized_ = seq;
    queues_.remove_child(seq);
    auto it = pending_prepares_.find(last_finalized_ + 1);
    if (it != pending_prepares_.end()) {
      auto [from, payload] = it->second;
      pending_prepares_.erase(it);
      process_prepare(from, last_finalized_ + 1, payload);
    }
    kick_temp();
    maybe_start_round();
  }

  void handle_abort(Seq seq) {
    // generator-driven strand of a transaction whose owner left the pool
    auto it = queues_.parent.find(seq);
    if (it != queues_.parent.end()) it->second.state = TxState::Stranded;
    handle_remove_child(seq);
  }

  void drop_target() {
    target_dropped_ = true;
    NodeId s = cfg_.failure.target;
    active_.erase(s);
    totals_.ra_per_node.erase(s);
    trace({now(), EventKind::Dropped, 0, id_, s, std::nullopt, false});
    // distinguished-partition restart: activity accounting resets and the
    // optimistic budget is re-split across the survivors
    counts_.T = restart_partition(active_, counts_.P, cfg_.c, cfg_.n());
    for (std::size_t k = 0; k < counts_.T.size(); ++k) {
      counts_.ra_recorded[k] = 0;
      counts_.ra_current[k] = 0;
      counts_.temp_stopped[k] = counts_.T[k] == 0;
    }
    for (auto& [j, ra] : totals_.ra_per_node) ra.assign(static_cast<std::size_t>(cfg_.m), 0);
    kick_temp();
  }

  // ---- helpers ----

  void send_to(NodeId to, const Envelope& env) {
    if (to == id_) {
      on_message(id_, env);
    } else {
      env_.send(to, env);
    }
  }

  void mark_state(Seq seq, TxState st) {
    auto it = queues_.parent.find(seq);
    if (it != queues_.parent.end()) it->second.state = st;
  }

  long long now() const { return env_.now_us(); }

  void trace(TraceEvent e) {
    if (env_.trace) env_.trace->record(std::move(e));
  }

  NodeId id_;
  RunConfig cfg_;
  NodeEnv env_;
  NodeCounts counts_;
  NodeQueues queues_;
  std::map<Seq, OwnerLedgerEntry> ledger_;
  std::map<Seq, ResourceVector> granted_;
  std::map<Seq, std::pair<NodeId, PreparePayload>> pending_prepares_;
  std::set<NodeId> active_;
  RunningTotals totals_;
  std::optional<RoundCtx> round_;
  long long round_epoch_ = 0;
  Seq last_finalized_ = 0;
  Seq retry_seq_ = 0;
  int prepare_counter_ = 0;
  bool target_dropped_ = false;
  bool temp_busy_ = false;
  Seq picked_ = 0;
};

}  // namespace copar
