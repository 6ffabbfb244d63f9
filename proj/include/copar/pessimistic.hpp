#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "copar/counts.hpp"
#include "copar/faults.hpp"
#include "copar/optimistic.hpp"
#include "copar/types.hpp"

namespace copar {

enum class VoteValue : std::uint8_t { Yes = 0, No = 1 };

enum class RoundOutcome : std::uint8_t {
  Committed = 0,
  Violation = 1,
  AbortedMinority = 2,
};

enum class RoundPhase : std::uint8_t { Preparing = 0, Committing = 1, Done = 2 };

// Coordinator-side state of one pessimistic commit cycle.
struct TwoPhaseRound {
  Seq tx_seq = 0;
  NodeId coordinator = 0;
  std::set<NodeId> participants;
  std::map<NodeId, VoteValue> votes;
  std::optional<RoundOutcome> outcome;
  RoundPhase phase = RoundPhase::Preparing;
  long long started_us = 0;
};

// Coordinator's view of per-node net allocations.
struct RunningTotals {
  std::map<NodeId, std::vector<Amount>> ra_per_node;

  std::vector<Amount> RA(std::size_t m) const {
    std::vector<Amount> total(m, 0);
    for (const auto& [_, ra] : ra_per_node) {
      for (std::size_t k = 0; k < m; ++k) total[k] += ra[k];
    }
    return total;
  }
};

// Owner of the next sequence number coordinates; idle if not yet generated.
inline std::optional<NodeId> next_coordinator(Seq completed_seq,
                                              const std::map<Seq, NodeId>& ownership) {
  auto it = ownership.find(completed_seq + 1);
  if (it == ownership.end()) return std::nullopt;
  return it->second;
}

// Phase-one vote: additions are always admissible; requests must keep P
// non-negative in every component.
inline VoteValue handle_prepare(const NodeCounts& node, const Transaction& tx) {
  if (tx.kind == TxKind::Addition) return VoteValue::Yes;
  return check_all_nonneg(node.P, tx.delta) ? VoteValue::Yes : VoteValue::No;
}

// FNV-1a over P entries; PREPARE carries the coordinator's digest so a
// diverged replica is caught as an implementation bug, not a wrong vote.
inline std::uint64_t count_digest(const ResourceVector& P) {
  std::uint64_t h = 1469598103934665603ull;
  for (Amount a : P.v) {
    auto u = static_cast<std::uint64_t>(a);
    for (int i = 0; i < 8; ++i) {
      h ^= (u >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace copar
