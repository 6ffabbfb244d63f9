#pragma once

#include <optional>

#include "copar/counts.hpp"
#include "copar/types.hpp"

namespace copar {

enum class Outcome : std::uint8_t { Committed = 0, Violation = 1 };

struct OptReport {
  Seq tx_seq = 0;
  NodeId doer = 0;
  ResourceVector granted_delta;
};

struct OwnerLedgerEntry {
  Seq tx_seq = 0;
  std::optional<NodeId> optimistic_doer;
  bool first_report_seen = false;
  bool permanently_done = false;
  std::optional<Outcome> permanent_outcome;
  bool undone = false;
};

enum class GrantResult : std::uint8_t {
  Granted = 0,
  Discarded = 1,
  Blocked = 2,  // head needs a stopped resource type; wait for a refresh
};

// Temporary grant against T. On success the delta is applied, net allocation
// accounting moves, and the caller emits an OptReport to the owner.
inline GrantResult try_optimistic(NodeCounts& counts, const Transaction& tx) {
  if (tx.kind != TxKind::Request) throw ProtocolError("additions are not processed optimistically");
  const auto& d = tx.delta;
  if (d.size() != counts.T.size()) throw ProtocolError("delta length mismatch");
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (d[k] < 0 && counts.temp_stopped[k]) return GrantResult::Blocked;
  }
  if (!check_all_nonneg(counts.T, d)) return GrantResult::Discarded;
  counts.T += d;
  for (std::size_t k = 0; k < d.size(); ++k) {
    counts.ra_current[k] -= d[k];
    // a pure return can revive a stopped budget before any refresh arrives
    if (d[k] > 0 && counts.temp_stopped[k] && counts.T[k] > 0) counts.temp_stopped[k] = false;
  }
  return GrantResult::Granted;
}

enum class ReportAction : std::uint8_t {
  Keep = 0,
  Backout = 1,
  BackoutUndone = 2,  // promise already retracted by a violation outcome
};

// Owner-side first-responder arbitration for one optimistic report.
inline ReportAction handle_opt_report(OwnerLedgerEntry& e, const OptReport& r) {
  if (e.tx_seq != r.tx_seq) throw ProtocolError("report for unknown transaction");
  if (e.first_report_seen) return ReportAction::Backout;
  e.first_report_seen = true;
  if (!e.permanently_done) {
    e.optimistic_doer = r.doer;
    return ReportAction::Keep;
  }
  if (e.permanent_outcome == Outcome::Committed) {
    // done permanently first: keep the grant but record no doer
    return ReportAction::Keep;
  }
  e.undone = true;
  return ReportAction::BackoutUndone;
}

// Reverses a temporary grant. A refresh between grant and backout may already
// have absorbed a returned unit into the new target, so a negative result
// clamps to zero and stops the processor, mirroring the staleness rule.
inline void apply_backout(NodeCounts& counts, const ResourceVector& delta) {
  if (delta.size() != counts.T.size()) throw ProtocolError("backout delta length mismatch");
  for (std::size_t k = 0; k < delta.size(); ++k) {
    counts.T[k] -= delta[k];
    if (counts.T[k] < 0) {
      counts.T[k] = 0;
      counts.temp_stopped[k] = true;
    }
    counts.ra_current[k] += delta[k];
  }
}

}  // namespace copar
