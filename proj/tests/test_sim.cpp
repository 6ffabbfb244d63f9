#include <doctest.h>

#include <vector>

#include "copar/sim.hpp"

using namespace copar;

namespace {

Envelope ping(NodeId sender, Seq seq) {
  return Envelope{kWireVersion, MsgType::Ping, sender, seq, EmptyPayload{}};
}

struct Delivery {
  NodeId at;
  NodeId from;
  Seq seq;
  long long time_us;
};

struct Harness {
  SimWorld world;
  std::vector<Delivery> log;

  Harness(std::uint64_t seed, LatencyRange link) : world(seed, link) {}

  void add_node(NodeId id) {
    world.register_node(
        id,
        [this, id](NodeId from, const Envelope& e) {
          log.push_back({id, from, e.tx_seq, world.now_us()});
        },
        [](TimerTag, long long) {});
  }

  void drain() {
    while (world.step()) {
    }
  }
};

}  // namespace

TEST_CASE("delivery latency stays inside the configured range") {
  Harness h(1, {2'000, 9'000});
  h.add_node(1);
  h.add_node(2);
  for (Seq s = 1; s <= 100; ++s) h.world.send(1, 2, ping(1, s));
  h.drain();
  REQUIRE(h.log.size() == 100);
  long long prev = 0;
  for (const auto& d : h.log) {
    CHECK(d.time_us >= 2'000);
    CHECK(d.time_us >= prev);  // FIFO per pair
    prev = d.time_us;
  }
}

TEST_CASE("per-pair order is preserved even when draws would invert it") {
  Harness h(3, {0, 50'000});
  h.add_node(1);
  h.add_node(2);
  for (Seq s = 1; s <= 200; ++s) h.world.send(1, 2, ping(1, s));
  h.drain();
  REQUIRE(h.log.size() == 200);
  for (std::size_t i = 0; i < h.log.size(); ++i) {
    CHECK(h.log[i].seq == static_cast<Seq>(i + 1));
  }
}

TEST_CASE("cross-pair reordering does happen") {
  Harness h(5, {0, 50'000});
  h.add_node(1);
  h.add_node(2);
  h.add_node(3);
  for (Seq s = 1; s <= 100; ++s) {
    h.world.send(1, 3, ping(1, s));
    h.world.send(2, 3, ping(2, s));
  }
  h.drain();
  bool interleaved = false;
  for (std::size_t i = 1; i < h.log.size(); ++i) {
    if (h.log[i].from != h.log[i - 1].from) interleaved = true;
  }
  CHECK(interleaved);
}

TEST_CASE("same seed replays the identical delivery sequence") {
  auto run = [](std::uint64_t seed) {
    Harness h(seed, {1'000, 20'000});
    h.add_node(1);
    h.add_node(2);
    h.add_node(3);
    for (Seq s = 1; s <= 60; ++s) {
      h.world.send(1, 2, ping(1, s));
      h.world.send(2, 3, ping(2, s));
      h.world.send(3, 1, ping(3, s));
    }
    h.drain();
    return h.log;
  };
  auto a = run(11), b = run(11), c = run(12);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].at == b[i].at);
    CHECK(a[i].from == b[i].from);
    CHECK(a[i].seq == b[i].seq);
    CHECK(a[i].time_us == b[i].time_us);
  }
  bool different = a.size() != c.size();
  for (std::size_t i = 0; !different && i < a.size(); ++i) {
    different = a[i].time_us != c[i].time_us || a[i].seq != c[i].seq;
  }
  CHECK(different);
}

TEST_CASE("timers fire in order with their payload") {
  SimWorld w(1, {0, 0});
  std::vector<std::pair<TimerTag, long long>> fired;
  w.register_node(
      1, [](NodeId, const Envelope&) {},
      [&fired](TimerTag tag, long long aux) { fired.push_back({tag, aux}); });
  w.schedule(1, 500, TimerTag::RoundTimeout, 7);
  w.schedule(1, 100, TimerTag::TempProcess, 3);
  w.schedule(1, 300, TimerTag::GenEmit, 0);
  while (w.step()) {
  }
  REQUIRE(fired.size() == 3);
  CHECK(fired[0] == std::pair{TimerTag::TempProcess, 3ll});
  CHECK(fired[1] == std::pair{TimerTag::GenEmit, 0ll});
  CHECK(fired[2] == std::pair{TimerTag::RoundTimeout, 7ll});
}

TEST_CASE("partitioned links drop and trace instead of delivering") {
  Harness h(9, {1'000, 1'000});
  h.add_node(1);
  h.add_node(2);
  h.world.set_partitioned(1, 2, true);
  Trace t;
  h.world.send(1, 2, ping(1, 5));
  h.world.send(2, 1, ping(2, 6));
  while (h.world.step(&t)) {
  }
  CHECK(h.log.empty());
  REQUIRE(t.events().size() == 2);
  CHECK(t.events()[0].kind == EventKind::Dropped);
  h.world.set_partitioned(1, 2, false);
  h.world.send(1, 2, ping(1, 7));
  h.drain();
  REQUIRE(h.log.size() == 1);
  CHECK(h.log[0].seq == 7);
}
