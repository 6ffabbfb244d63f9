#pragma once

#include <utility>

#include "copar/types.hpp"

namespace copar {

// Initial counts for every node: P mirrors the pool, T is the per-node slice
// of the over-allocation budget c*R/n, rounded half-up.
inline std::pair<ResourceVector, ResourceVector> init_counts(const ResourceVector& R, int n,
                                                             const CostBound& c) {
  if (n < 1) throw ConfigError("node count must be >= 1");
  if (!R.all_nonneg()) throw ConfigError("initial resource entry is negative");
  ResourceVector T = ResourceVector::zeros(R.size());
  for (std::size_t k = 0; k < R.size(); ++k) {
    T[k] = round_half_up(c.c * Rational(R[k], n));
  }
  return {R, T};
}

// All-or-nothing admissibility: every entry of count + delta stays >= 0.
inline bool check_all_nonneg(const ResourceVector& count, const ResourceVector& delta) {
  if (count.size() != delta.size()) throw ProtocolError("count/delta length mismatch");
  for (std::size_t k = 0; k < count.size(); ++k) {
    if (count[k] + delta[k] < 0) return false;
  }
  return true;
}

}  // namespace copar
