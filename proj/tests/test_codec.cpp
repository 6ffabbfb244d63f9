#include <doctest.h>

#include <random>

#include "copar/message.hpp"

using namespace copar;

namespace {

Envelope sample(MsgType t) {
  Envelope e;
  e.type = t;
  e.sender = 3;
  e.tx_seq = 42;
  switch (t) {
    case MsgType::Submit:
    case MsgType::BroadcastChild:
      e.payload = SubmitPayload{2, TxKind::Request, ResourceVector{-5, 7}};
      break;
    case MsgType::Prepare:
      e.payload = PreparePayload{TxKind::Addition, ResourceVector{4}, 0xdeadbeefcafef00dull};
      break;
    case MsgType::Vote:
      e.payload = VotePayload{true, {10, -3}};
      break;
    case MsgType::Commit:
      e.payload = CommitPayload{Outcome::Violation, TxKind::Request, ResourceVector{-8}};
      break;
    case MsgType::OptReport:
      e.payload = OptReportPayload{ResourceVector{-6, 0, 2}};
      break;
    case MsgType::OptReply:
      e.payload = OptReplyPayload{true};
      break;
    case MsgType::Redistribute: {
      RedistributePayload p;
      p.targets[1] = ResourceVector{22};
      p.targets[2] = ResourceVector{15};
      p.ra_snapshot[1] = {30};
      p.ra_snapshot[2] = {19};
      e.payload = p;
      break;
    }
    default:
      e.payload = EmptyPayload{};
      break;
  }
  return e;
}

const MsgType kAllTypes[] = {
    MsgType::Submit,    MsgType::BroadcastChild, MsgType::Prepare,  MsgType::Vote,
    MsgType::Commit,    MsgType::Abort,          MsgType::RemoveChild, MsgType::OptReport,
    MsgType::OptReply,  MsgType::Redistribute,   MsgType::Ping,
};

}  // namespace

TEST_CASE("every message type round-trips exactly") {
  for (MsgType t : kAllTypes) {
    Envelope e = sample(t);
    auto frame = encode_message(e);
    Envelope back = decode_message(frame);
    CHECK(back == e);
    // canonical: re-encoding the decoded envelope is byte identical
    CHECK(encode_message(back) == frame);
  }
}

TEST_CASE("frame layout is versioned and length prefixed") {
  auto frame = encode_message(sample(MsgType::Ping));
  REQUIRE(frame.size() >= 4);
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | frame[i];
  CHECK(len + 4 == frame.size());
  CHECK(frame[4] == kWireVersion);
}

TEST_CASE("malformed frames are rejected, never misparsed") {
  auto frame = encode_message(sample(MsgType::Vote));
  SUBCASE("truncated") {
    for (std::size_t cut = 0; cut < frame.size(); ++cut) {
      std::vector<std::uint8_t> partial(frame.begin(), frame.begin() + cut);
      CHECK_THROWS_AS(decode_message(partial), CodecError);
    }
  }
  SUBCASE("trailing garbage") {
    auto extended = frame;
    extended.push_back(0xff);
    CHECK_THROWS_AS(decode_message(extended), CodecError);
  }
  SUBCASE("wrong version") {
    auto bad = frame;
    bad[4] = kWireVersion + 1;
    CHECK_THROWS_AS(decode_message(bad), CodecError);
  }
  SUBCASE("unknown message type") {
    auto bad = frame;
    bad[5] = 0;
    CHECK_THROWS_AS(decode_message(bad), CodecError);
    bad[5] = 200;
    CHECK_THROWS_AS(decode_message(bad), CodecError);
  }
  SUBCASE("absurd vector length") {
    Envelope e = sample(MsgType::OptReport);
    auto f = encode_message(e);
    // vector count sits right after version, type, sender, tx_seq
    std::size_t count_at = 4 + 1 + 1 + 4 + 8;
    f[count_at] = 0xff;
    f[count_at + 1] = 0xff;
    f[count_at + 2] = 0xff;
    f[count_at + 3] = 0xff;
    CHECK_THROWS_AS(decode_message(f), CodecError);
  }
}

TEST_CASE("random byte soup never escapes as a valid envelope silently") {
  std::mt19937_64 rng(67);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::size_t> len(0, 64);
  int rejected = 0;
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> junk(len(rng));
    for (auto& b : junk) b = static_cast<std::uint8_t>(byte(rng));
    try {
      Envelope e = decode_message(junk);
      // the rare survivor must still re-encode to the same bytes
      CHECK(encode_message(e) == junk);
    } catch (const CodecError&) {
      ++rejected;
    }
  }
  CHECK(rejected > 1900);
}

TEST_CASE("fuzzed envelopes round-trip") {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<Amount> amt(-1'000'000, 1'000'000);
  std::uniform_int_distribution<std::size_t> dim(0, 5);
  std::uniform_int_distribution<int> pick(0, 10);
  for (int i = 0; i < 500; ++i) {
    Envelope e = sample(kAllTypes[pick(rng)]);
    e.sender = static_cast<NodeId>(amt(rng) % 100);
    e.tx_seq = amt(rng);
    if (auto* p = std::get_if<SubmitPayload>(&e.payload)) {
      p->delta = ResourceVector::zeros(dim(rng));
      for (std::size_t k = 0; k < p->delta.size(); ++k) p->delta[k] = amt(rng);
    }
    auto frame = encode_message(e);
    CHECK(decode_message(frame) == e);
  }
}
