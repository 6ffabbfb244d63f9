#pragma once

#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <utility>

#include "copar/message.hpp"
#include "copar/metrics.hpp"
#include "copar/workload.hpp"

namespace copar {

enum class TimerTag : int {
  TempProcess = 0,
  RoundTimeout = 1,
  GenEmit = 2,
  Watchdog = 3,
};

// Deterministic discrete-event substrate. Identical seed and configuration
// replay the exact same delivery sequence. Per-(sender,receiver) FIFO is
// enforced by clamping each delivery to the pair's previous delivery time;
// cross-pair reordering is free to happen.
class SimWorld {
 public:
  SimWorld(std::uint64_t seed, LatencyRange link) : rng_(seed), link_(link) {}

  using MessageHandler = std::function<void(NodeId from, const Envelope&)>;
  using TimerHandler = std::function<void(TimerTag, long long aux)>;

  void register_node(NodeId id, MessageHandler on_message, TimerHandler on_timer) {
    handlers_[id] = {std::move(on_message), std::move(on_timer)};
  }

  long long now_us() const { return now_us_; }

  // observer sees every send before delivery; used by checkers, never by nodes
  using SendObserver = std::function<void(NodeId from, NodeId to, const Envelope&)>;
  void set_send_observer(SendObserver obs) { observer_ = std::move(obs); }

  void send(NodeId from, NodeId to, Envelope env) {
    if (observer_) observer_(from, to, env);
    long long t = now_us_ + draw_latency();
    auto& fifo_floor = pair_clock_[{from, to}];
    if (t < fifo_floor) t = fifo_floor;
    fifo_floor = t;
    queue_.push(Event{t, next_tie_++, EventType::Deliver, from, to, std::move(env), {}, 0});
  }

  void schedule(NodeId who, long long delay_us, TimerTag tag, long long aux) {
    queue_.push(Event{now_us_ + delay_us, next_tie_++, EventType::Timer, who, who, {}, tag, aux});
  }

  void set_partitioned(NodeId a, NodeId b, bool cut) {
    if (cut) {
      partitioned_.insert({a, b});
      partitioned_.insert({b, a});
    } else {
      partitioned_.erase({a, b});
      partitioned_.erase({b, a});
    }
  }

  long long draw_proc_latency(LatencyRange r) {
    if (r.max_us <= r.min_us) return r.min_us;
    return std::uniform_int_distribution<long long>(r.min_us, r.max_us)(rng_);
  }

  // Delivers or fires the earliest pending event. Returns false on an empty
  // queue (quiescence).
  bool step(Trace* trace = nullptr) {
    if (queue_.empty()) return false;
    Event ev = queue_.top();
    queue_.pop();
    now_us_ = ev.time_us;
    if (ev.type == EventType::Deliver) {
      if (partitioned_.count({ev.from, ev.to})) {
        if (trace) {
          trace->record({now_us_, EventKind::Dropped, ev.env.tx_seq, ev.to,
                         static_cast<long long>(ev.from), std::nullopt, false});
        }
        return true;
      }
      auto it = handlers_.find(ev.to);
      if (it != handlers_.end()) it->second.on_message(ev.from, ev.env);
    } else {
      auto it = handlers_.find(ev.to);
      if (it != handlers_.end()) it->second.on_timer(ev.tag, ev.aux);
    }
    return true;
  }

  bool quiescent() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }

 private:
  enum class EventType { Deliver, Timer };
  struct Event {
    long long time_us;
    std::uint64_t tie;
    EventType type;
    NodeId from;
    NodeId to;
    Envelope env;
    TimerTag tag;
    long long aux;
  };
  struct EventOrder {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time_us != b.time_us) return a.time_us > b.time_us;
      return a.tie > b.tie;
    }
  };
  struct Handlers {
    MessageHandler on_message;
    TimerHandler on_timer;
  };

  long long draw_latency() {
    if (link_.max_us <= link_.min_us) return link_.min_us;
    return std::uniform_int_distribution<long long>(link_.min_us, link_.max_us)(rng_);
  }

  SendObserver observer_;
  std::mt19937_64 rng_;
  LatencyRange link_;
  long long now_us_ = 0;
  std::uint64_t next_tie_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
  std::map<NodeId, Handlers> handlers_;
  std::map<std::pair<NodeId, NodeId>, long long> pair_clock_;
  std::set<std::pair<NodeId, NodeId>> partitioned_;
};

}  // namespace copar
