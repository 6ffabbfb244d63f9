#include <doctest.h>

#include <sstream>

#include "copar/sim_runner.hpp"

using namespace copar;

namespace {

RunConfig small_config(int n, std::vector<Amount> R, const char* c, std::uint64_t seed,
                       long long total_tx = 0) {
  nlohmann::json j;
  for (int i = 1; i <= n; ++i) j["nodes"].push_back({{"id", i}});
  j["initial_resources"] = R;
  j["cost_bound"] = c;
  j["total_tx"] = total_tx;
  j["rate"] = 50;
  j["request_range"] = {2, 8};
  j["donation_range"] = {3, 10};
  j["donation_fraction"] = 0.1;
  j["return_fraction"] = 0.45;
  j["seed"] = seed;
  return parse_run_config(j);
}

// Net committed delta according to the coordinator's own trace events.
ResourceVector committed_sum(const Trace& trace, std::size_t m) {
  ResourceVector sum = ResourceVector::zeros(m);
  for (const auto& e : trace.events()) {
    if (e.kind == EventKind::Committed && e.vec) sum += *e.vec;
  }
  return sum;
}

}  // namespace

TEST_CASE("a scripted run settles every transaction and conserves the pool") {
  RunConfig cfg = small_config(2, {100}, "1", 5);
  std::vector<ScriptedTx> script{
      {1, TxKind::Request, {-10}},
      {2, TxKind::Request, {5}},
      {1, TxKind::Addition, {7}},
  };
  SimResult res = run_sim(cfg, script);
  CHECK(res.generator_done);
  CHECK(res.issued == 3);
  CHECK(res.finalized == 3);
  for (const auto& [id, counts] : res.counts) {
    CHECK(counts.P == ResourceVector{102});
    CHECK(counts.counts_nonneg());
  }
  for (const auto& [id, backlog] : res.child_backlog) CHECK(backlog == 0);
  RunReport rep = summarize(res.trace);
  CHECK(rep.complete);
  CHECK(rep.committed == 3);
  CHECK(rep.violations == 0);
}

TEST_CASE("a request the pool cannot cover becomes a violation") {
  RunConfig cfg = small_config(2, {10}, "2", 9);
  std::vector<ScriptedTx> script{
      {1, TxKind::Request, {-8}},
      {2, TxKind::Request, {-8}},
  };
  SimResult res = run_sim(cfg, script);
  CHECK(res.generator_done);
  for (const auto& [id, counts] : res.counts) CHECK(counts.P == ResourceVector{2});
  RunReport rep = summarize(res.trace);
  CHECK(rep.committed == 1);
  CHECK(rep.violations == 1);
  CHECK(rep.undone <= rep.done_optimistically);
}

TEST_CASE("single node pools work") {
  RunConfig cfg = small_config(1, {50}, "1.16", 3, 20);
  SimResult res = run_sim(cfg);
  CHECK(res.generator_done);
  CHECK(res.finalized == 20);
  CHECK(res.counts.at(1).P == ResourceVector{50} + committed_sum(res.trace, 1));
}

TEST_CASE("random runs leave identical non-negative counts everywhere") {
  for (std::uint64_t seed : {101, 202, 303, 404}) {
    RunConfig cfg = small_config(3, {80, 40}, "1.1", seed, 40);
    SimResult res = run_sim(cfg);
    CHECK(res.generator_done);
    CHECK(res.finalized == 40);
    ResourceVector expect = ResourceVector{80, 40} + committed_sum(res.trace, 2);
    for (const auto& [id, counts] : res.counts) {
      CHECK(counts.P == expect);
      CHECK(counts.counts_nonneg());
    }
    RunReport rep = summarize(res.trace);
    CHECK(rep.complete);
    CHECK(rep.stranded == 0);
    CHECK(rep.undone <= rep.done_optimistically);
  }
}

TEST_CASE("identical seeds reproduce the trace byte for byte") {
  RunConfig cfg = small_config(3, {120}, "1.16", 77, 30);
  auto render = [](const RunConfig& c) {
    SimResult res = run_sim(c);
    std::stringstream ss;
    write_csv(res.trace, ss);
    return ss.str();
  };
  std::string a = render(cfg);
  std::string b = render(cfg);
  CHECK(a == b);
  cfg.seed = 78;
  CHECK(render(cfg) != a);
}

TEST_CASE("permanent settlement follows generation order") {
  RunConfig cfg = small_config(3, {200}, "1.16", 13, 50);
  SimResult res = run_sim(cfg);
  Seq last = 0;
  for (const auto& e : res.trace.events()) {
    if (e.kind == EventKind::Committed || e.kind == EventKind::Violation) {
      CHECK(e.tx_seq == last + 1);
      last = e.tx_seq;
    }
  }
  CHECK(last == 50);
}

TEST_CASE("legacy charging disables redistribution") {
  RunConfig cfg = small_config(3, {100}, "1.16", 21, 40);
  cfg.legacy_charge = true;
  SimResult res = run_sim(cfg);
  CHECK(res.generator_done);
  bool redistributed = false;
  for (const auto& e : res.trace.events()) {
    redistributed |= e.kind == EventKind::Redistributed;
  }
  CHECK_FALSE(redistributed);
  ResourceVector expect = ResourceVector{100} + committed_sum(res.trace, 1);
  for (const auto& [id, counts] : res.counts) {
    CHECK(counts.P == expect);
    CHECK(counts.counts_nonneg());
  }
}

TEST_CASE("an empty workload terminates immediately") {
  RunConfig cfg = small_config(2, {10}, "1", 1, 0);
  SimResult res = run_sim(cfg);
  CHECK(res.generator_done);
  CHECK(res.issued == 0);
  CHECK(res.trace.events().empty());
}

TEST_CASE("additions refresh budgets pool-wide") {
  RunConfig cfg = small_config(2, {0}, "1", 2);
  std::vector<ScriptedTx> script{
      {1, TxKind::Addition, {40}},
      {2, TxKind::Request, {-10}},
  };
  SimResult res = run_sim(cfg, script);
  CHECK(res.generator_done);
  for (const auto& [id, counts] : res.counts) CHECK(counts.P == ResourceVector{30});
  RunReport rep = summarize(res.trace);
  CHECK(rep.committed == 2);
}
