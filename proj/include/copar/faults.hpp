#pragma once

#include <set>

#include "copar/counts.hpp"
#include "copar/types.hpp"

namespace copar {

// Scripted single-node drop: servers count pessimistic-selection notices and
// classify the target inactive once the counter passes the threshold; the
// generator has its own (lower) counter for rerouting new submissions.
struct FailurePlan {
  bool enabled = false;
  NodeId target = 0;
  int pessimistic_counter_threshold = 50;
  int generator_counter_threshold = 25;
};

inline bool should_drop(int counter, const FailurePlan& plan, NodeId sender) {
  if (!plan.enabled) return false;
  return counter >= plan.pessimistic_counter_threshold && sender == plan.target;
}

inline bool majority_reachable(int initial_n, int reachable) {
  return 2 * reachable > initial_n;
}

// New temporary counts when the distinguished partition restarts pessimistic
// processing: activity accounting resets and T becomes c*P/|survivors|.
inline ResourceVector restart_partition(const std::set<NodeId>& survivors, const ResourceVector& P,
                                        const CostBound& c, int initial_n) {
  if (!majority_reachable(initial_n, static_cast<int>(survivors.size()))) {
    throw ProtocolError("restart refused: survivors are not a majority");
  }
  auto [_, T] = init_counts(P, static_cast<int>(survivors.size()), c);
  return T;
}

}  // namespace copar
