#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "copar/rational.hpp"

namespace copar {

using NodeId = int;  // 0 is reserved for the transaction generator
using Seq = long long;
using Amount = long long;

inline constexpr NodeId kGeneratorId = 0;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One entry per resource type. Negative entries are allocations when the
// vector is a delta; counts (P, T) are always non-negative.
struct ResourceVector {
  std::vector<Amount> v;

  ResourceVector() = default;
  explicit ResourceVector(std::vector<Amount> entries) : v(std::move(entries)) {}
  ResourceVector(std::initializer_list<Amount> entries) : v(entries) {}

  std::size_t size() const { return v.size(); }
  Amount& operator[](std::size_t k) { return v[k]; }
  Amount operator[](std::size_t k) const { return v[k]; }

  bool all_nonneg() const {
    return std::all_of(v.begin(), v.end(), [](Amount a) { return a >= 0; });
  }

  ResourceVector& operator+=(const ResourceVector& o) {
    if (o.size() != size()) throw ProtocolError("resource vector length mismatch");
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += o.v[k];
    return *this;
  }
  ResourceVector& operator-=(const ResourceVector& o) {
    if (o.size() != size()) throw ProtocolError("resource vector length mismatch");
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= o.v[k];
    return *this;
  }
  friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) { return a += b; }
  friend ResourceVector operator-(ResourceVector a, const ResourceVector& b) { return a -= b; }
  friend ResourceVector operator-(ResourceVector a) {
    for (auto& e : a.v) e = -e;
    return a;
  }
  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;

  static ResourceVector zeros(std::size_t m) { return ResourceVector(std::vector<Amount>(m, 0)); }

  std::string str() const {
    std::string s = "(";
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) s += ",";
      s += std::to_string(v[k]);
    }
    return s + ")";
  }
};

enum class TxKind : std::uint8_t {
  Request = 0,   // request or return; sign of the delta decides per entry
  Addition = 1,  // donation to the pool, never enters child queues
};

enum class TxState : std::uint8_t {
  Pending = 0,
  Committed = 1,
  Violation = 2,
  UndoneMarked = 3,
  Stranded = 4,
};

struct Transaction {
  Seq seq = 0;
  NodeId owner = 0;
  ResourceVector delta;
  TxKind kind = TxKind::Request;
  TxState state = TxState::Pending;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct CostBound {
  Rational c{1};

  CostBound() = default;
  explicit CostBound(Rational value) : c(std::move(value)) {
    if (c < Rational(1)) throw ConfigError("cost bound must be >= 1");
  }
};

// Per-node count state shared by the permanent and temporary processors.
struct NodeCounts {
  ResourceVector P;
  ResourceVector T;
  std::vector<Amount> ra_recorded;  // ra as of the last redistribution applied here
  std::vector<Amount> ra_current;   // live net allocation done by this node
  std::vector<bool> temp_stopped;   // T clamped to 0 and no refresh since

  static NodeCounts make(std::size_t m) {
    NodeCounts c;
    c.P = ResourceVector::zeros(m);
    c.T = ResourceVector::zeros(m);
    c.ra_recorded.assign(m, 0);
    c.ra_current.assign(m, 0);
    c.temp_stopped.assign(m, false);
    return c;
  }

  bool counts_nonneg() const { return P.all_nonneg() && T.all_nonneg(); }
};

// Owner queue (sorted by seq) and child queue (FIFO arrival order).
struct NodeQueues {
  std::map<Seq, Transaction> parent;
  std::deque<Transaction> child;

  void remove_child(Seq seq) {
    for (auto it = child.begin(); it != child.end(); ++it) {
      if (it->seq == seq) {
        child.erase(it);
        return;
      }
    }
  }
};

}  // namespace copar
