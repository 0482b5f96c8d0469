#include "pob/wire.h"

#include <algorithm>
#include <bit>
#include <cstring>

namespace pob::wire {
namespace {

constexpr std::size_t kEntryBytes = 4 + crypto::kSignatureBytes;

class Writer {
 public:
  explicit Writer(std::size_t reserve = 0) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v));
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v >> 32));
    u32(static_cast<std::uint32_t>(v));
  }
  void raw(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void zeros(std::size_t n) { out_.insert(out_.end(), n, 0); }
  void preamble(MessageType t, std::uint16_t extra = 0) {
    u8(static_cast<std::uint8_t>(t));
    u8(kVersion);
    u16(extra);
  }
  void proof(const crypto::MerkleProof& p) {
    if (p.siblings.size() > 0xff) throw InputError("merkle proof has too many siblings");
    u32(p.leaf_index);
    u8(static_cast<std::uint8_t>(p.siblings.size()));
    for (const auto& s : p.siblings) raw(s.bytes);
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }
  void need(std::size_t n, const char* field) const {
    if (remaining() < n) throw DecodeError(field, "truncated input");
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return in_[pos_++];
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* field) {
    std::uint32_t hi = u16(field);
    return (hi << 16) | u16(field);
  }
  std::uint64_t u64(const char* field) {
    std::uint64_t hi = u32(field);
    return (hi << 32) | u32(field);
  }
  template <std::size_t N>
  void copy(std::array<std::uint8_t, N>& dst, const char* field) {
    need(N, field);
    std::memcpy(dst.data(), in_.data() + pos_, N);
    pos_ += N;
  }
  ByteView view(std::size_t n, const char* field) {
    need(n, field);
    auto v = in_.subspan(pos_, n);
    pos_ += n;
    return v;
  }
  void expect_zeros(std::size_t n, const char* field) {
    auto v = view(n, field);
    if (std::any_of(v.begin(), v.end(), [](auto b) { return b != 0; })) throw DecodeError(field, "must be zero");
  }
  crypto::MerkleProof proof() {
    crypto::MerkleProof p;
    p.leaf_index = u32("merkle_proof.leaf_index");
    const std::size_t count = u8("merkle_proof.sibling_count");
    p.siblings.resize(count);
    for (auto& s : p.siblings) copy(s.bytes, "merkle_proof.siblings");
    return p;
  }
  void finish() const {
    if (remaining() != 0) throw DecodeError("length", "over-long input (" + std::to_string(remaining()) + " trailing bytes)");
  }

 private:
  ByteView in_;
  std::size_t pos_ = 0;
};

void check_exact(ByteView bytes, std::size_t expected, const char* what) {
  if (bytes.size() != expected) {
    throw DecodeError("length", std::string(what) + " must be " + std::to_string(expected) + " bytes, got " +
                                    std::to_string(bytes.size()));
  }
}

ChallengePacket decode_challenge(ByteView bytes) {
  check_exact(bytes, kChallengePayloadBytes, "challenge packet");
  Reader r(bytes);
  r.u8("type");
  r.u8("version");
  const std::size_t count = r.u16("count");
  if (count == 0 || count > kMaxSignaturesPerPacket) {
    throw DecodeError("count", "signature count " + std::to_string(count) + " outside [1, 22]");
  }
  ChallengePacket m;
  m.challenger_id = r.u32("challenger_id");
  m.base_seq = r.u32("base_seq");
  r.copy(m.nonce, "nonce");
  r.expect_zeros(kChallengeHeaderBytes - 20, "header_padding");
  m.signatures.resize(count);
  for (auto& s : m.signatures) r.copy(s.bytes, "signatures");
  r.expect_zeros((kMaxSignaturesPerPacket - count) * crypto::kSignatureBytes, "unused_slots");
  if (static_cast<std::uint64_t>(m.base_seq) + count - 1 > 0xffffffffULL) {
    throw DecodeError("base_seq", "sequence range overflows 32 bits");
  }
  return m;
}

ResponsePacket decode_response(Reader& r) {
  ResponsePacket m;
  r.copy(m.receipt.bytes, "receipt");
  r.copy(m.merkle_root.bytes, "merkle_root");
  r.copy(m.prover_signature.bytes, "prover_signature");
  return m;
}

VerificationMessage decode_verification(Reader& r) {
  VerificationMessage m;
  m.challenger_id = r.u32("challenger_id");
  const std::size_t bits = r.u32("bitmap.bit_count");
  const std::size_t pop = r.u32("bitmap.popcount");
  const std::size_t nbytes = (bits + 7) / 8;
  m.bitmap = Bitmap::from_bytes(bits, r.view(nbytes, "bitmap"));
  if (m.bitmap.popcount() != pop) throw DecodeError("bitmap.popcount", "does not match the bitmap contents");
  m.merkle_proof = r.proof();
  return m;
}

ChallengerReport decode_report(Reader& r) {
  ChallengerReport m;
  m.challenger_id = r.u32("challenger_id");
  m.prover_id = r.u32("prover_id");
  const auto status = r.u8("status");
  if (status > 1) throw DecodeError("status", "unknown report status " + std::to_string(status));
  m.status = static_cast<ReportStatus>(status);
  r.copy(m.merkle_root_seen.bytes, "merkle_root_seen");
  m.rtt_ns = r.u64("rtt_ns");
  if (m.status == ReportStatus::ok && m.rtt_ns == 0) throw DecodeError("rtt_ns", "must be positive");
  m.packets_acknowledged = r.u32("packets_acknowledged");
  return m;
}

ProverReport decode_prover_report(Reader& r) {
  ProverReport m;
  m.prover_id = r.u32("prover_id");
  r.copy(m.merkle_root.bytes, "merkle_root");
  const std::size_t n = r.u32("challenger_count");
  if (n * 4 != r.remaining()) throw DecodeError("acknowledged", "length does not match challenger_count");
  m.acknowledged.resize(n);
  for (auto& a : m.acknowledged) a = r.u32("acknowledged");
  return m;
}

DisputeSubmission decode_dispute(Reader& r) {
  DisputeSubmission m;
  m.challenger_id = r.u32("challenger_id");
  const std::size_t count = r.u32("packet_count");
  if (count > r.remaining() / kEntryBytes) throw DecodeError("packets", "packet_count exceeds message length");
  m.packets.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    m.packets[i].seq = r.u32("packets.seq");
    r.copy(m.packets[i].signature.bytes, "packets.signature");
    if (i > 0 && m.packets[i].seq <= m.packets[i - 1].seq) {
      throw DecodeError("packets.seq", "sequence numbers must be strictly increasing");
    }
  }
  m.merkle_proof = r.proof();
  return m;
}

}  // namespace

bool Bitmap::test(std::size_t j) const {
  if (j >= bits_) throw InputError("bitmap index out of range");
  return (bytes_[j / 8] & (0x80U >> (j % 8))) != 0;
}

void Bitmap::set(std::size_t j, bool value) {
  if (j >= bits_) throw InputError("bitmap index out of range");
  const auto mask = static_cast<std::uint8_t>(0x80U >> (j % 8));
  if (value) {
    bytes_[j / 8] |= mask;
  } else {
    bytes_[j / 8] &= static_cast<std::uint8_t>(~mask);
  }
}

std::size_t Bitmap::popcount() const noexcept {
  std::size_t n = 0;
  for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

Bitmap Bitmap::from_bytes(std::size_t bits, ByteView bytes) {
  if (bytes.size() != (bits + 7) / 8) throw DecodeError("bitmap", "byte length does not match bit count");
  Bitmap bm(bits);
  std::copy(bytes.begin(), bytes.end(), bm.bytes_.begin());
  if (bits % 8 != 0) {
    const auto tail_mask = static_cast<std::uint8_t>(0xffU >> (bits % 8));
    if ((bm.bytes_.back() & tail_mask) != 0) throw DecodeError("bitmap", "bits beyond bit_count are set");
  }
  return bm;
}

Bytes encode(const ChallengePacket& m) {
  const std::size_t count = m.signatures.size();
  if (count == 0 || count > kMaxSignaturesPerPacket) throw InputError("challenge packet carries 1..22 signatures");
  Writer w(kChallengePayloadBytes);
  w.preamble(MessageType::challenge, static_cast<std::uint16_t>(count));
  w.u32(m.challenger_id);
  w.u32(m.base_seq);
  w.raw(m.nonce);
  w.zeros(kChallengeHeaderBytes - 20);
  for (const auto& s : m.signatures) w.raw(s.bytes);
  w.zeros((kMaxSignaturesPerPacket - count) * crypto::kSignatureBytes);
  return w.take();
}

Bytes encode(const ResponsePacket& m) {
  Writer w(kPreambleBytes + kResponseBodyBytes);
  w.preamble(MessageType::response);
  w.raw(m.receipt.bytes);
  w.raw(m.merkle_root.bytes);
  w.raw(m.prover_signature.bytes);
  return w.take();
}

Bytes encode(const VerificationMessage& m) {
  Writer w;
  w.preamble(MessageType::verification);
  w.u32(m.challenger_id);
  w.u32(static_cast<std::uint32_t>(m.bitmap.size()));
  w.u32(static_cast<std::uint32_t>(m.bitmap.popcount()));
  w.raw(m.bitmap.bytes());
  w.proof(m.merkle_proof);
  return w.take();
}

Bytes encode(const ChallengerReport& m) {
  Writer w(kPreambleBytes + 53);
  w.preamble(MessageType::report);
  w.u32(m.challenger_id);
  w.u32(m.prover_id);
  w.u8(static_cast<std::uint8_t>(m.status));
  w.raw(m.merkle_root_seen.bytes);
  w.u64(m.rtt_ns);
  w.u32(m.packets_acknowledged);
  return w.take();
}

Bytes encode(const ProverReport& m) {
  Writer w;
  w.preamble(MessageType::prover_report);
  w.u32(m.prover_id);
  w.raw(m.merkle_root.bytes);
  w.u32(static_cast<std::uint32_t>(m.acknowledged.size()));
  for (auto a : m.acknowledged) w.u32(a);
  return w.take();
}

Bytes encode(const DisputeRequest& m) {
  Writer w;
  w.preamble(MessageType::dispute_request);
  w.u32(m.challenger_id);
  return w.take();
}

Bytes encode(const DisputeSubmission& m) {
  std::vector<crypto::SignedEntry> sorted = m.packets;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].seq == sorted[i - 1].seq) throw InputError("dispute submission repeats a sequence number");
  }
  Writer w;
  w.preamble(MessageType::dispute_submission);
  w.u32(m.challenger_id);
  w.u32(static_cast<std::uint32_t>(sorted.size()));
  for (const auto& e : sorted) {
    w.u32(e.seq);
    w.raw(e.signature.bytes);
  }
  w.proof(m.merkle_proof);
  return w.take();
}

namespace {
Bytes encode_echo(MessageType t, std::uint64_t token) {
  Writer w(kPingPayloadBytes);
  w.preamble(t);
  w.u64(token);
  w.zeros(kPingPayloadBytes - kPreambleBytes - 8);
  return w.take();
}
}  // namespace

Bytes encode(const Ping& m) { return encode_echo(MessageType::ping, m.token); }
Bytes encode(const Pong& m) { return encode_echo(MessageType::pong, m.token); }

Bytes encode(const Message& m) {
  return std::visit([](const auto& v) { return encode(v); }, m);
}

Message decode(ByteView bytes) {
  if (bytes.size() < kPreambleBytes) throw DecodeError("length", "shorter than the message preamble");
  const auto tag = bytes[0];
  if (tag < static_cast<std::uint8_t>(MessageType::challenge) || tag > static_cast<std::uint8_t>(MessageType::pong)) {
    throw DecodeError("type", "unknown message type " + std::to_string(tag));
  }
  if (bytes[1] != kVersion) throw DecodeError("version", "unsupported version " + std::to_string(bytes[1]));
  if (tag == static_cast<std::uint8_t>(MessageType::challenge)) return decode_challenge(bytes);

  Reader r(bytes);
  r.u8("type");
  r.u8("version");
  if (r.u16("reserved") != 0) throw DecodeError("reserved", "must be zero");
  Message out;
  switch (static_cast<MessageType>(tag)) {
    case MessageType::response:
      check_exact(bytes, kPreambleBytes + kResponseBodyBytes, "response packet");
      out = decode_response(r);
      break;
    case MessageType::verification:
      out = decode_verification(r);
      break;
    case MessageType::report:
      check_exact(bytes, kPreambleBytes + 53, "challenger report");
      out = decode_report(r);
      break;
    case MessageType::prover_report:
      out = decode_prover_report(r);
      break;
    case MessageType::dispute_request:
      check_exact(bytes, kPreambleBytes + 4, "dispute request");
      out = DisputeRequest{r.u32("challenger_id")};
      break;
    case MessageType::dispute_submission:
      out = decode_dispute(r);
      break;
    case MessageType::ping:
    case MessageType::pong: {
      check_exact(bytes, kPingPayloadBytes, "echo");
      const auto token = r.u64("token");
      r.expect_zeros(kPingPayloadBytes - kPreambleBytes - 8, "padding");
      if (static_cast<MessageType>(tag) == MessageType::ping) {
        out = Ping{token};
      } else {
        out = Pong{token};
      }
      break;
    }
    default:
      break;
  }
  r.finish();
  return out;
}

MessageType type_of(const Message& m) {
  static constexpr MessageType kTypes[] = {
      MessageType::challenge,      MessageType::response,           MessageType::verification,
      MessageType::report,         MessageType::prover_report,      MessageType::dispute_request,
      MessageType::dispute_submission, MessageType::ping,           MessageType::pong};
  return kTypes[m.index()];
}

std::size_t on_wire_size(std::size_t encoded_bytes) { return encoded_bytes + kLowerLayerHeaderBytes; }

}  // namespace pob::wire
