#include <doctest.h>

#include <chrono>
#include <thread>

#include "copar/net.hpp"
#include "copar/sim_runner.hpp"

using namespace copar;

TEST_CASE("address parsing") {
  auto [host, port] = net::split_address("127.0.0.1:9000");
  CHECK(host == "127.0.0.1");
  CHECK(port == 9000);
  CHECK_THROWS_AS(net::split_address("no-port"), ConfigError);
}

TEST_CASE("transport delivers decoded envelopes between peers") {
  std::map<NodeId, std::string> addrs{{1, "127.0.0.1:46311"}, {2, "127.0.0.1:46312"}};
  NetTransport a(1, addrs), b(2, addrs);
  a.listen();
  b.listen();

  Envelope env{kWireVersion, MsgType::Submit, 1, 9,
               SubmitPayload{2, TxKind::Request, ResourceVector{-4, 1}}};
  a.send(2, env);
  NetTransport::Incoming in;
  REQUIRE(b.receive(&in, std::chrono::steady_clock::now() + std::chrono::seconds(5)));
  CHECK(in.from == 1);
  CHECK(in.env == env);

  // replies reuse a fresh connection in the other direction
  Envelope reply{kWireVersion, MsgType::OptReply, 2, 9, OptReplyPayload{true}};
  b.send(1, reply);
  REQUIRE(a.receive(&in, std::chrono::steady_clock::now() + std::chrono::seconds(5)));
  CHECK(in.env == reply);

  a.stop();
  b.stop();
}

TEST_CASE("messages to unreachable peers are lost silently") {
  std::map<NodeId, std::string> addrs{{1, "127.0.0.1:46321"}, {2, "127.0.0.1:46399"}};
  NetTransport a(1, addrs);
  a.listen();
  Envelope env{kWireVersion, MsgType::Ping, 1, 1, EmptyPayload{}};
  CHECK_NOTHROW(a.send(2, env));   // nobody listens on 46399
  CHECK_NOTHROW(a.send(77, env));  // unknown id
  NetTransport::Incoming in;
  CHECK_FALSE(a.receive(&in, std::chrono::steady_clock::now() + std::chrono::milliseconds(50)));
  a.stop();
}

TEST_CASE("network config requires addresses everywhere") {
  nlohmann::json j;
  j["nodes"] = {{{"id", 1}, {"address", "127.0.0.1:46331"}}, {{"id", 2}}};
  j["initial_resources"] = {10};
  j["cost_bound"] = 1;
  j["total_tx"] = 1;
  j["rate"] = 1;
  j["request_range"] = {1, 1};
  j["donation_range"] = {1, 1};
  RunConfig cfg = parse_run_config(j);
  CHECK_THROWS_AS(net::address_map(cfg), ConfigError);
}

TEST_CASE("a networked run settles the workload like the simulator") {
  nlohmann::json j;
  j["nodes"] = {{{"id", 1}, {"address", "127.0.0.1:46341"}},
                {{"id", 2}, {"address", "127.0.0.1:46342"}},
                {{"id", 3}, {"address", "127.0.0.1:46343"}}};
  j["generator_address"] = "127.0.0.1:46340";
  j["initial_resources"] = {90};
  j["cost_bound"] = "1.16";
  j["total_tx"] = 12;
  j["rate"] = 100;
  j["request_range"] = {2, 6};
  j["donation_range"] = {3, 8};
  j["donation_fraction"] = 0.1;
  j["return_fraction"] = 0.4;
  j["seed"] = 55;
  RunConfig cfg = parse_run_config(j);

  std::map<NodeId, Trace> node_traces;
  for (const auto& nd : cfg.nodes) node_traces[nd.id];  // stable slots before the threads start
  std::vector<std::thread> threads;
  for (const auto& nd : cfg.nodes) {
    threads.emplace_back([&cfg, slot = &node_traces.at(nd.id), id = nd.id] {
      *slot = run_net_node(cfg, id);
    });
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  Trace gen_trace = run_net_generator(cfg);
  for (auto& t : threads) t.join();

  Trace merged;
  merged.header() = cfg.echo();
  for (const auto& e : gen_trace.events()) merged.append_raw(e);
  for (const auto& [_, t] : node_traces) {
    for (const auto& e : t.events()) merged.append_raw(e);
  }
  RunReport rep = summarize(merged);
  CHECK(rep.total_tx == 12);
  CHECK(rep.committed + rep.violations == 12);
  CHECK(rep.complete);
  CHECK(rep.undone <= rep.done_optimistically);

  // every settled transaction matches the deterministic workload stream
  GeneratorState expect(cfg.seed);
  for (Seq s = 1; s <= 12; ++s) {
    Transaction tx = next_transaction(expect, cfg);
    bool found = false;
    for (const auto& e : gen_trace.events()) {
      if (e.kind == EventKind::Submitted && e.tx_seq == s) {
        CHECK(e.node == tx.owner);
        CHECK(e.vec == tx.delta);
        found = true;
      }
    }
    CHECK(found);
  }
}
