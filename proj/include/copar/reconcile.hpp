#pragma once

#include <map>
#include <vector>

#include "copar/types.hpp"

namespace copar {

// Redistribution weight for one node and resource type. Activity snapshots
// are clamped at zero before weighting so that a node whose returns outran
// its allocations still gets a positive share and the column sums to one.
inline Rational compute_weight(Amount ra_recorded, Amount RA, int n) {
  if (n < 1) throw ConfigError("node count must be >= 1");
  if (RA + n <= 0) throw ProtocolError("weight denominator not positive");
  return Rational(ra_recorded + 1, RA + n);
}

// Weights for one resource column over an ordered set of nodes.
inline std::vector<Rational> column_weights(const std::vector<Amount>& ra_col, int n) {
  std::vector<Amount> clamped(ra_col);
  Amount total = 0;
  for (auto& ra : clamped) {
    if (ra < 0) ra = 0;
    total += ra;
  }
  std::vector<Rational> w;
  w.reserve(clamped.size());
  for (Amount ra : clamped) w.push_back(compute_weight(ra, total, n));
  return w;
}

inline Amount redistribute_entry(Amount P_k, const Rational& c, const Rational& w) {
  return round_half_up(c * Rational(P_k) * w);
}

// Per-node temporary targets for one resource column.
inline std::vector<Amount> redistribute(Amount P_k, const CostBound& c,
                                        const std::vector<Amount>& ra_col) {
  auto w = column_weights(ra_col, static_cast<int>(ra_col.size()));
  std::vector<Amount> targets;
  targets.reserve(ra_col.size());
  for (const auto& wj : w) targets.push_back(redistribute_entry(P_k, c.c, wj));
  return targets;
}

struct StaleAdjust {
  Amount T_new = 0;
  bool stopped = false;
};

// Reconciles a broadcast target with optimistic activity that happened after
// the coordinator's snapshot. Negative results clamp to zero and stop the
// temporary processor until a refresh with positive T arrives.
inline StaleAdjust stale_adjust(Amount target, Amount ra_current, Amount ra_recorded) {
  Amount t = target - (ra_current - ra_recorded);
  StaleAdjust out;
  out.stopped = (t <= 0);
  out.T_new = t < 0 ? 0 : t;
  return out;
}

// Full redistribution across nodes and resource types.
// ra_by_node maps node id -> per-type recorded activity.
inline std::map<NodeId, ResourceVector> redistribute_all(
    const ResourceVector& P, const CostBound& c,
    const std::map<NodeId, std::vector<Amount>>& ra_by_node) {
  std::map<NodeId, ResourceVector> targets;
  for (const auto& [j, _] : ra_by_node) targets[j] = ResourceVector::zeros(P.size());
  for (std::size_t k = 0; k < P.size(); ++k) {
    std::vector<Amount> col;
    col.reserve(ra_by_node.size());
    for (const auto& [_, ra] : ra_by_node) col.push_back(ra[k]);
    auto col_targets = redistribute(P[k], c, col);
    std::size_t i = 0;
    for (const auto& [j, _] : ra_by_node) targets[j][k] = col_targets[i++];
  }
  return targets;
}

struct AdditionResult {
  ResourceVector P;
  std::map<NodeId, ResourceVector> targets;
};

// A committed addition grows P everywhere, then budgets are recomputed with
// the current weights.
inline AdditionResult apply_addition(ResourceVector P, const ResourceVector& delta,
                                     const CostBound& c,
                                     const std::map<NodeId, std::vector<Amount>>& ra_by_node) {
  if (!delta.all_nonneg()) throw ProtocolError("addition delta has a negative entry");
  P += delta;
  AdditionResult out;
  out.targets = redistribute_all(P, c, ra_by_node);
  out.P = std::move(P);
  return out;
}

}  // namespace copar
