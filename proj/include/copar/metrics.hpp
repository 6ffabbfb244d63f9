#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "copar/types.hpp"

namespace copar {

enum class EventKind : std::uint8_t {
  Submitted = 0,
  OptPickup = 1,
  OptGranted = 2,
  OptDiscarded = 3,
  OptBackout = 4,
  Prepared = 5,
  Committed = 6,
  Violation = 7,
  Undone = 8,
  Removed = 9,
  Dropped = 10,
  Rerouted = 11,
  Redistributed = 12,
  Orphaned = 13,
  Stranded = 14,
  Charged = 15,
};

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Submitted: return "submitted";
    case EventKind::OptPickup: return "opt_pickup";
    case EventKind::OptGranted: return "opt_granted";
    case EventKind::OptDiscarded: return "opt_discarded";
    case EventKind::OptBackout: return "opt_backout";
    case EventKind::Prepared: return "prepared";
    case EventKind::Committed: return "committed";
    case EventKind::Violation: return "violation";
    case EventKind::Undone: return "undone";
    case EventKind::Removed: return "removed";
    case EventKind::Dropped: return "dropped";
    case EventKind::Rerouted: return "rerouted";
    case EventKind::Redistributed: return "redistributed";
    case EventKind::Orphaned: return "orphaned";
    case EventKind::Stranded: return "stranded";
    case EventKind::Charged: return "charged";
  }
  return "?";
}

inline std::optional<EventKind> event_kind_from_name(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(EventKind::Charged); ++i) {
    auto k = static_cast<EventKind>(i);
    if (s == event_kind_name(k)) return k;
  }
  return std::nullopt;
}

struct TraceEvent {
  long long time_us = 0;
  EventKind kind = EventKind::Submitted;
  Seq tx_seq = 0;
  NodeId node = 0;
  long long aux = 0;  // kind-specific: tx kind for submitted, intended owner for rerouted
  std::optional<ResourceVector> vec;
  bool anomaly = false;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// Append-only event log with a per-transaction lifecycle guard. Out-of-order
// events are kept but flagged, never dropped.
class Trace {
 public:
  void record(TraceEvent e) {
    auto& st = lifecycle_[e.tx_seq];
    switch (e.kind) {
      case EventKind::OptGranted:
      case EventKind::Committed:
      case EventKind::Violation:
        if (!st.submitted) e.anomaly = true;
        break;
      case EventKind::Undone:
        if (!st.violated) e.anomaly = true;
        break;
      default:
        break;
    }
    if (e.kind == EventKind::Submitted) st.submitted = true;
    if (e.kind == EventKind::Violation) st.violated = true;
    events_.push_back(std::move(e));
  }

  // verbatim append, used when reloading a trace from disk
  void append_raw(TraceEvent e) { events_.push_back(std::move(e)); }

  const std::vector<TraceEvent>& events() const { return events_; }
  std::vector<std::string>& header() { return header_; }
  const std::vector<std::string>& header() const { return header_; }

 private:
  struct Lifecycle {
    bool submitted = false;
    bool violated = false;
  };
  std::vector<TraceEvent> events_;
  std::map<Seq, Lifecycle> lifecycle_;
  std::vector<std::string> header_;  // config echo, written as comment lines
};

inline void write_csv(const Trace& trace, std::ostream& out) {
  for (const auto& h : trace.header()) out << "# " << h << "\n";
  out << "time_us,kind,seq,node,aux,anomaly,vec\n";
  for (const auto& e : trace.events()) {
    out << e.time_us << ',' << event_kind_name(e.kind) << ',' << e.tx_seq << ',' << e.node << ','
        << e.aux << ',' << (e.anomaly ? 1 : 0) << ',';
    if (e.vec) {
      for (std::size_t k = 0; k < e.vec->size(); ++k) {
        if (k) out << '|';
        out << (*e.vec)[k];
      }
    }
    out << '\n';
  }
}

inline void write_csv_file(const Trace& trace, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open trace output: " + path);
  write_csv(trace, f);
}

inline Trace read_csv(std::istream& in) {
  Trace t;
  std::string line;
  bool saw_columns = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.header().push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    if (!saw_columns) {
      saw_columns = true;  // column header row
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    TraceEvent e;
    std::getline(ss, field, ',');
    e.time_us = std::stoll(field);
    std::getline(ss, field, ',');
    auto kind = event_kind_from_name(field);
    if (!kind) throw ConfigError("unknown event kind in trace: " + field);
    e.kind = *kind;
    std::getline(ss, field, ',');
    e.tx_seq = std::stoll(field);
    std::getline(ss, field, ',');
    e.node = std::stoi(field);
    std::getline(ss, field, ',');
    e.aux = std::stoll(field);
    std::getline(ss, field, ',');
    bool anomaly = field == "1";
    if (std::getline(ss, field, ',') && !field.empty()) {
      ResourceVector v;
      std::stringstream vs(field);
      std::string entry;
      while (std::getline(vs, entry, '|')) v.v.push_back(std::stoll(entry));
      e.vec = std::move(v);
    }
    e.anomaly = anomaly;
    t.append_raw(std::move(e));
  }
  return t;
}

inline Trace read_csv_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open trace input: " + path);
  return read_csv(f);
}

struct TxRow {
  Seq seq = 0;
  TxKind kind = TxKind::Request;
  NodeId owner = 0;
  std::optional<NodeId> doer;
  std::optional<long long> ot_us;
  std::optional<long long> pt_us;
  std::string outcome = "pending";
  bool done_optimistically = false;
  bool undone = false;
};

struct RunReport {
  std::vector<TxRow> rows;
  long long total_tx = 0;
  long long non_addition_tx = 0;
  long long done_optimistically = 0;
  long long undone = 0;
  long long discarded = 0;
  long long never_picked = 0;
  long long committed = 0;
  long long violations = 0;
  long long stranded = 0;
  long long orphaned_reports = 0;
  std::optional<long long> pt_min_us, pt_max_us;
  std::optional<long long> ot_min_us, ot_max_us;
  double pt_mean_us = 0;
  double ot_mean_us = 0;
  double mean_pt_ot_ratio = 0;
  bool complete = true;
};

// Pure function of the trace: re-running it on the same trace is identical.
inline RunReport summarize(const Trace& trace) {
  struct PerTx {
    bool submitted = false;
    TxKind kind = TxKind::Request;
    NodeId owner = 0;
    long long submit_us = 0;
    std::map<NodeId, long long> pickup_us;
    std::map<NodeId, long long> grant_us;  // grant time per node
    std::set<NodeId> backed_out;
    std::set<NodeId> picked;
    bool any_pickup = false;
    bool any_grant = false;
    std::optional<long long> prepared_us;
    std::optional<long long> finalized_us;
    std::string outcome = "pending";
    bool undone = false;
    bool stranded = false;
  };
  std::map<Seq, PerTx> txs;
  RunReport rep;
  for (const auto& e : trace.events()) {
    auto& t = txs[e.tx_seq];
    switch (e.kind) {
      case EventKind::Submitted:
        t.submitted = true;
        t.kind = e.aux == 1 ? TxKind::Addition : TxKind::Request;
        t.owner = e.node;
        t.submit_us = e.time_us;
        break;
      case EventKind::OptPickup:
        t.pickup_us[e.node] = e.time_us;
        t.picked.insert(e.node);
        t.any_pickup = true;
        break;
      case EventKind::OptGranted:
        t.grant_us[e.node] = e.time_us;
        t.any_grant = true;
        break;
      case EventKind::OptDiscarded:
        break;
      case EventKind::OptBackout:
        t.backed_out.insert(e.node);
        break;
      case EventKind::Prepared:
        if (!t.prepared_us) t.prepared_us = e.time_us;
        break;
      case EventKind::Committed:
        t.finalized_us = e.time_us;
        t.outcome = "committed";
        break;
      case EventKind::Violation:
        t.finalized_us = e.time_us;
        t.outcome = "violation";
        break;
      case EventKind::Undone:
        t.undone = true;
        break;
      case EventKind::Stranded:
        t.stranded = true;
        t.outcome = "stranded";
        break;
      case EventKind::Orphaned:
        ++rep.orphaned_reports;
        break;
      default:
        break;
    }
  }

  std::vector<double> ratios;
  long long pt_sum = 0, pt_n = 0, ot_sum = 0, ot_n = 0;
  for (auto& [seq, t] : txs) {
    if (!t.submitted) continue;
    TxRow row;
    row.seq = seq;
    row.kind = t.kind;
    row.owner = t.owner;
    row.outcome = t.outcome;
    ++rep.total_tx;
    if (t.outcome == "committed") ++rep.committed;
    if (t.outcome == "violation") ++rep.violations;
    if (t.stranded) ++rep.stranded;
    if (t.outcome == "pending") rep.complete = false;

    // surviving grant: granted at some node and not backed out there
    std::optional<NodeId> survivor;
    for (const auto& [node, when] : t.grant_us) {
      if (!t.backed_out.count(node)) {
        survivor = node;
        break;
      }
    }
    if (t.kind == TxKind::Request) {
      ++rep.non_addition_tx;
      // "done optimistically" = the owner answered a first report, i.e. some
      // grant was promised to a user, whether or not it later stood
      bool promised = t.any_grant;
      row.done_optimistically = promised;
      if (promised) {
        ++rep.done_optimistically;
      } else if (t.any_pickup) {
        ++rep.discarded;
      } else {
        ++rep.never_picked;
      }
      if (survivor) {
        row.doer = survivor;
        auto pick = t.pickup_us.find(*survivor);
        auto grant = t.grant_us.find(*survivor);
        if (pick != t.pickup_us.end() && grant != t.grant_us.end()) {
          row.ot_us = grant->second - pick->second;
        }
      }
    }
    if (t.undone) {
      row.undone = true;
      ++rep.undone;
    }
    if (t.prepared_us && t.finalized_us) {
      row.pt_us = *t.finalized_us - *t.prepared_us;
    }
    if (row.pt_us) {
      pt_sum += *row.pt_us;
      ++pt_n;
      rep.pt_min_us = rep.pt_min_us ? std::min(*rep.pt_min_us, *row.pt_us) : *row.pt_us;
      rep.pt_max_us = rep.pt_max_us ? std::max(*rep.pt_max_us, *row.pt_us) : *row.pt_us;
    }
    if (row.ot_us) {
      ot_sum += *row.ot_us;
      ++ot_n;
      rep.ot_min_us = rep.ot_min_us ? std::min(*rep.ot_min_us, *row.ot_us) : *row.ot_us;
      rep.ot_max_us = rep.ot_max_us ? std::max(*rep.ot_max_us, *row.ot_us) : *row.ot_us;
    }
    if (row.pt_us && row.ot_us && *row.ot_us > 0) {
      ratios.push_back(static_cast<double>(*row.pt_us) / static_cast<double>(*row.ot_us));
    }
    rep.rows.push_back(std::move(row));
  }
  if (pt_n) rep.pt_mean_us = static_cast<double>(pt_sum) / static_cast<double>(pt_n);
  if (ot_n) rep.ot_mean_us = static_cast<double>(ot_sum) / static_cast<double>(ot_n);
  if (!ratios.empty()) {
    double s = 0;
    for (double r : ratios) s += r;
    rep.mean_pt_ot_ratio = s / static_cast<double>(ratios.size());
  }
  return rep;
}

inline void print_summary(const RunReport& rep, std::ostream& out) {
  out << "transactions:        " << rep.total_tx << "\n"
      << "  requests/returns:  " << rep.non_addition_tx << "\n"
      << "  additions:         " << (rep.total_tx - rep.non_addition_tx) << "\n"
      << "committed:           " << rep.committed << "\n"
      << "violations:          " << rep.violations << "\n"
      << "stranded:            " << rep.stranded << "\n"
      << "done optimistically: " << rep.done_optimistically << "\n"
      << "undone:              " << rep.undone << "\n"
      << "discarded:           " << rep.discarded << "\n"
      << "never picked:        " << rep.never_picked << "\n";
  auto ms = [](long long us) { return static_cast<double>(us) / 1000.0; };
  if (rep.pt_min_us) {
    out << "PT min/max/mean ms:  " << ms(*rep.pt_min_us) << " / " << ms(*rep.pt_max_us) << " / "
        << rep.pt_mean_us / 1000.0 << "\n";
  }
  if (rep.ot_min_us) {
    out << "OT min/max/mean ms:  " << ms(*rep.ot_min_us) << " / " << ms(*rep.ot_max_us) << " / "
        << rep.ot_mean_us / 1000.0 << "\n";
  }
  out << "mean PT/OT ratio:    " << rep.mean_pt_ot_ratio << "\n";
  if (!rep.complete) out << "NOTE: trace incomplete, partial report\n";
}

}  // namespace copar
