#pragma once

// Byte layouts of every protocol message. All integers are big-endian and every
// message has exactly one valid encoding.
//
// Common preamble (bytes 0..3): type tag, format version, then two bytes that
// are the signature count for challenge packets and zero for everything else.
//
//   ChallengePacket    1472 bytes: 64-byte header + 22 signature slots
//     [4..8)  challenger_id   [8..12) base_seq   [12..20) nonce   [20..64) zero
//     [64..)  signature slot j covers sequence number base_seq + j; unused slots zero
//   ResponsePacket     4 + 128:  receipt(32) root(32) prover_signature(64)
//   VerificationMessage 4 + 12 + ceil(bits/8) + proof:
//     challenger_id, bit_count, popcount, bitmap (MSB-first), proof
//   ChallengerReport   4 + 53:   challenger_id prover_id status root(32) rtt_ns(u64) acknowledged
//   ProverReport       4 + 40 + 4n: prover_id root(32) n acknowledged[n]
//   DisputeRequest     4 + 4:    challenger_id
//   DisputeSubmission  4 + 8 + 68m + proof: challenger_id m entries(seq, sig) proof
//   Ping / Pong        56 bytes: 4 + token(u64) + 44 zero (98 bytes on the wire)
//   MerkleProof        leaf_index(u32) sibling_count(u8) siblings(32 each)

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pob/crypto.h"
#include "pob/types.h"

namespace pob::wire {

inline constexpr std::size_t kPacketBytes = 1514;         // b, on the wire
inline constexpr std::size_t kLowerLayerHeaderBytes = 42;  // Ethernet + IPv4 + UDP
inline constexpr std::size_t kChallengePayloadBytes = 1472;
inline constexpr std::size_t kChallengeHeaderBytes = 64;
inline constexpr std::size_t kMaxSignaturesPerPacket = 22;
inline constexpr std::size_t kPreambleBytes = 4;
inline constexpr std::size_t kResponseBodyBytes = 128;
inline constexpr std::size_t kPingPayloadBytes = 98 - kLowerLayerHeaderBytes;
inline constexpr std::uint8_t kVersion = 1;

enum class MessageType : std::uint8_t {
  challenge = 0x01,
  response = 0x02,
  verification = 0x03,
  report = 0x04,
  prover_report = 0x05,
  dispute_submission = 0x06,
  dispute_request = 0x07,
  ping = 0x08,
  pong = 0x09,
};

/// Decoding failure; `field()` names the offending field.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string field, const std::string& what)
      : std::runtime_error("decode error in " + field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Fixed-length bit set, bit j stored at byte j/8 under mask 0x80 >> (j % 8).
class Bitmap {
 public:
  Bitmap() = default;
  explicit Bitmap(std::size_t bits) : bits_(bits), bytes_((bits + 7) / 8, 0) {}

  std::size_t size() const noexcept { return bits_; }
  bool test(std::size_t j) const;
  void set(std::size_t j, bool value = true);
  std::size_t popcount() const noexcept;
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  /// Rebuilds from raw bytes; throws DecodeError when trailing bits are set.
  static Bitmap from_bytes(std::size_t bits, ByteView bytes);

  bool operator==(const Bitmap&) const = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint8_t> bytes_;
};

struct ChallengePacket {
  std::uint32_t challenger_id = 0;
  std::uint32_t base_seq = 0;
  std::array<std::uint8_t, 8> nonce{};
  std::vector<crypto::Signature> signatures;  // 1..22
  bool operator==(const ChallengePacket&) const = default;
};

struct ResponsePacket {
  crypto::Digest receipt;
  crypto::Digest merkle_root;
  crypto::Signature prover_signature;
  bool operator==(const ResponsePacket&) const = default;
};

struct VerificationMessage {
  std::uint32_t challenger_id = 0;
  Bitmap bitmap;
  crypto::MerkleProof merkle_proof;
  bool operator==(const VerificationMessage&) const = default;
};

enum class ReportStatus : std::uint8_t { ok = 0, verification_failed = 1 };

struct ChallengerReport {
  std::uint32_t challenger_id = 0;
  std::uint32_t prover_id = 0;
  ReportStatus status = ReportStatus::ok;
  crypto::Digest merkle_root_seen;
  std::uint64_t rtt_ns = 0;
  std::uint32_t packets_acknowledged = 0;
  bool operator==(const ChallengerReport&) const = default;
};

/// Report(h) from the prover, with the per-challenger acknowledged probe
/// counts implied by the bitmaps it sent out.
struct ProverReport {
  std::uint32_t prover_id = 0;
  crypto::Digest merkle_root;
  std::vector<std::uint32_t> acknowledged;
  bool operator==(const ProverReport&) const = default;
};

struct DisputeRequest {
  std::uint32_t challenger_id = 0;
  bool operator==(const DisputeRequest&) const = default;
};

struct DisputeSubmission {
  std::uint32_t challenger_id = 0;
  std::vector<crypto::SignedEntry> packets;
  crypto::MerkleProof merkle_proof;
  bool operator==(const DisputeSubmission&) const = default;
};

struct Ping {
  std::uint64_t token = 0;
  bool operator==(const Ping&) const = default;
};

struct Pong {
  std::uint64_t token = 0;
  bool operator==(const Pong&) const = default;
};

using Message = std::variant<ChallengePacket, ResponsePacket, VerificationMessage, ChallengerReport, ProverReport,
                             DisputeRequest, DisputeSubmission, Ping, Pong>;

Bytes encode(const ChallengePacket& m);
Bytes encode(const ResponsePacket& m);
Bytes encode(const VerificationMessage& m);
Bytes encode(const ChallengerReport& m);
Bytes encode(const ProverReport& m);
Bytes encode(const DisputeRequest& m);
Bytes encode(const DisputeSubmission& m);
Bytes encode(const Ping& m);
Bytes encode(const Pong& m);
Bytes encode(const Message& m);

Message decode(ByteView bytes);

/// Decodes and requires the message to be of type T.
template <typename T>
T decode_as(ByteView bytes) {
  auto msg = decode(bytes);
  if (auto* p = std::get_if<T>(&msg)) return std::move(*p);
  throw DecodeError("type", "unexpected message type");
}

MessageType type_of(const Message& m);

/// Bytes a message occupies on the wire including lower-layer headers.
std::size_t on_wire_size(std::size_t encoded_bytes);

}  // namespace pob::wire
