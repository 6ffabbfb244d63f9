#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "copar/optimistic.hpp"
#include "copar/types.hpp"

namespace copar {

struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

enum class MsgType : std::uint8_t {
  Submit = 1,
  BroadcastChild = 2,
  Prepare = 3,
  Vote = 4,
  Commit = 5,
  Abort = 6,
  RemoveChild = 7,
  OptReport = 8,
  OptReply = 9,
  Redistribute = 10,
  Ping = 11,
};

struct SubmitPayload {
  NodeId owner = 0;
  TxKind kind = TxKind::Request;
  ResourceVector delta;
  friend bool operator==(const SubmitPayload&, const SubmitPayload&) = default;
};

struct PreparePayload {
  TxKind kind = TxKind::Request;
  ResourceVector delta;
  std::uint64_t p_digest = 0;
  friend bool operator==(const PreparePayload&, const PreparePayload&) = default;
};

struct VotePayload {
  bool yes = false;
  std::vector<Amount> ra_current;
  friend bool operator==(const VotePayload&, const VotePayload&) = default;
};

struct CommitPayload {
  Outcome outcome = Outcome::Committed;
  TxKind kind = TxKind::Request;
  ResourceVector delta;
  friend bool operator==(const CommitPayload&, const CommitPayload&) = default;
};

struct OptReportPayload {
  ResourceVector delta;
  friend bool operator==(const OptReportPayload&, const OptReportPayload&) = default;
};

struct OptReplyPayload {
  bool keep = false;
  friend bool operator==(const OptReplyPayload&, const OptReplyPayload&) = default;
};

struct RedistributePayload {
  std::map<NodeId, ResourceVector> targets;
  std::map<NodeId, std::vector<Amount>> ra_snapshot;
  friend bool operator==(const RedistributePayload&, const RedistributePayload&) = default;
};

struct EmptyPayload {
  friend bool operator==(const EmptyPayload&, const EmptyPayload&) = default;
};

using Payload = std::variant<EmptyPayload, SubmitPayload, PreparePayload, VotePayload,
                             CommitPayload, OptReportPayload, OptReplyPayload,
                             RedistributePayload>;

struct Envelope {
  std::uint8_t version = kWireVersion;
  MsgType type = MsgType::Ping;
  NodeId sender = 0;
  Seq tx_seq = 0;
  Payload payload;
  friend bool operator==(const Envelope&, const Envelope&) = default;
};

namespace wire {

// Fixed-width big-endian fields; vectors are a u32 count plus i64 entries.
inline void put_u8(std::vector<std::uint8_t>& b, std::uint8_t v) { b.push_back(v); }
inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_i32(std::vector<std::uint8_t>& b, std::int32_t v) {
  put_u32(b, static_cast<std::uint32_t>(v));
}
inline void put_i64(std::vector<std::uint8_t>& b, std::int64_t v) {
  put_u64(b, static_cast<std::uint64_t>(v));
}
inline void put_amounts(std::vector<std::uint8_t>& b, const std::vector<Amount>& v) {
  put_u32(b, static_cast<std::uint32_t>(v.size()));
  for (Amount a : v) put_i64(b, a);
}
inline void put_vec(std::vector<std::uint8_t>& b, const ResourceVector& v) {
  put_amounts(b, v.v);
}

struct Reader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw CodecError("truncated frame");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data[pos++];
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data[pos++];
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  std::vector<Amount> amounts() {
    std::uint32_t n = u32();
    if (n > kMaxFrameBytes / 8) throw CodecError("vector length exceeds frame limit");
    std::vector<Amount> v(n);
    for (auto& a : v) a = i64();
    return v;
  }
  ResourceVector vec() { return ResourceVector(amounts()); }
};

}  // namespace wire

// Canonical length-prefixed encoding; equal envelopes produce identical bytes.
inline std::vector<std::uint8_t> encode_message(const Envelope& e) {
  std::vector<std::uint8_t> body;
  wire::put_u8(body, e.version);
  wire::put_u8(body, static_cast<std::uint8_t>(e.type));
  wire::put_i32(body, e.sender);
  wire::put_i64(body, e.tx_seq);
  switch (e.type) {
    case MsgType::Submit:
    case MsgType::BroadcastChild: {
      const auto& p = std::get<SubmitPayload>(e.payload);
      wire::put_i32(body, p.owner);
      wire::put_u8(body, static_cast<std::uint8_t>(p.kind));
      wire::put_vec(body, p.delta);
      break;
    }
    case MsgType::Prepare: {
      const auto& p = std::get<PreparePayload>(e.payload);
      wire::put_u8(body, static_cast<std::uint8_t>(p.kind));
      wire::put_vec(body, p.delta);
      wire::put_u64(body, p.p_digest);
      break;
    }
    case MsgType::Vote: {
      const auto& p = std::get<VotePayload>(e.payload);
      wire::put_u8(body, p.yes ? 1 : 0);
      wire::put_amounts(body, p.ra_current);
      break;
    }
    case MsgType::Commit: {
      const auto& p = std::get<CommitPayload>(e.payload);
      wire::put_u8(body, static_cast<std::uint8_t>(p.outcome));
      wire::put_u8(body, static_cast<std::uint8_t>(p.kind));
      wire::put_vec(body, p.delta);
      break;
    }
    case MsgType::OptReport: {
      wire::put_vec(body, std::get<OptReportPayload>(e.payload).delta);
      break;
    }
    case MsgType::OptReply: {
      wire::put_u8(body, std::get<OptReplyPayload>(e.payload).keep ? 1 : 0);
      break;
    }
    case MsgType::Redistribute: {
      const auto& p = std::get<RedistributePayload>(e.payload);
      wire::put_u32(body, static_cast<std::uint32_t>(p.targets.size()));
      for (const auto& [j, t] : p.targets) {
        wire::put_i32(body, j);
        wire::put_vec(body, t);
      }
      wire::put_u32(body, static_cast<std::uint32_t>(p.ra_snapshot.size()));
      for (const auto& [j, ra] : p.ra_snapshot) {
        wire::put_i32(body, j);
        wire::put_amounts(body, ra);
      }
      break;
    }
    case MsgType::Abort:
    case MsgType::RemoveChild:
    case MsgType::Ping:
      break;
  }
  if (body.size() > kMaxFrameBytes) throw CodecError("payload exceeds frame limit");
  std::vector<std::uint8_t> frame;
  frame.reserve(body.size() + 4);
  wire::put_u32(frame, static_cast<std::uint32_t>(body.size()));
  frame.insert(frame.end(), body.begin(), body.end());
  return frame;
}

inline TxKind decode_kind(std::uint8_t b) {
  if (b > 1) throw CodecError("unknown transaction kind");
  return static_cast<TxKind>(b);
}

inline Envelope decode_message(std::span<const std::uint8_t> frame) {
  wire::Reader r{frame};
  std::uint32_t len = r.u32();
  if (len > kMaxFrameBytes) throw CodecError("frame length exceeds limit");
  if (frame.size() != len + 4u) throw CodecError("frame length mismatch");
  Envelope e;
  e.version = r.u8();
  if (e.version != kWireVersion) throw CodecError("unknown wire version");
  std::uint8_t t = r.u8();
  if (t < 1 || t > static_cast<std::uint8_t>(MsgType::Ping)) throw CodecError("unknown msg type");
  e.type = static_cast<MsgType>(t);
  e.sender = r.i32();
  e.tx_seq = r.i64();
  switch (e.type) {
    case MsgType::Submit:
    case MsgType::BroadcastChild: {
      SubmitPayload p;
      p.owner = r.i32();
      p.kind = decode_kind(r.u8());
      p.delta = r.vec();
      e.payload = std::move(p);
      break;
    }
    case MsgType::Prepare: {
      PreparePayload p;
      p.kind = decode_kind(r.u8());
      p.delta = r.vec();
      p.p_digest = r.u64();
      e.payload = std::move(p);
      break;
    }
    case MsgType::Vote: {
      VotePayload p;
      p.yes = r.u8() != 0;
      p.ra_current = r.amounts();
      e.payload = std::move(p);
      break;
    }
    case MsgType::Commit: {
      CommitPayload p;
      std::uint8_t o = r.u8();
      if (o > 1) throw CodecError("unknown outcome");
      p.outcome = static_cast<Outcome>(o);
      p.kind = decode_kind(r.u8());
      p.delta = r.vec();
      e.payload = std::move(p);
      break;
    }
    case MsgType::OptReport: {
      OptReportPayload p;
      p.delta = r.vec();
      e.payload = std::move(p);
      break;
    }
    case MsgType::OptReply: {
      OptReplyPayload p;
      p.keep = r.u8() != 0;
      e.payload = std::move(p);
      break;
    }
    case MsgType::Redistribute: {
      RedistributePayload p;
      std::uint32_t nt = r.u32();
      for (std::uint32_t i = 0; i < nt; ++i) {
        NodeId j = r.i32();
        p.targets[j] = r.vec();
      }
      std::uint32_t ns = r.u32();
      for (std::uint32_t i = 0; i < ns; ++i) {
        NodeId j = r.i32();
        p.ra_snapshot[j] = r.amounts();
      }
      e.payload = std::move(p);
      break;
    }
    case MsgType::Abort:
    case MsgType::RemoveChild:
    case MsgType::Ping:
      e.payload = EmptyPayload{};
      break;
  }
  if (r.pos != frame.size()) throw CodecError("trailing bytes in frame");
  return e;
}

}  // namespace copar
