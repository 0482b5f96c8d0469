#pragma once

// Signatures, canonical packet-set hashing and the Merkle commitment used by
// the prover to bind itself to exactly the probes it received.
//
// Ed25519 and SHA-256 come from libsodium. Everything here is a pure function.

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pob/types.h"

namespace pob::crypto {

inline constexpr std::size_t kDigestBytes = 32;
inline constexpr std::size_t kSignatureBytes = 64;
inline constexpr std::size_t kKeyBytes = 32;
inline constexpr std::size_t kSeedBytes = 32;

struct Digest {
  std::array<std::uint8_t, kDigestBytes> bytes{};
  auto operator<=>(const Digest&) const = default;
  std::string hex() const;
};

struct Signature {
  std::array<std::uint8_t, kSignatureBytes> bytes{};
  auto operator<=>(const Signature&) const = default;
};

struct PublicKey {
  std::array<std::uint8_t, kKeyBytes> bytes{};
  auto operator<=>(const PublicKey&) const = default;
};

/// The 32-byte signing seed; the expanded Ed25519 key is rebuilt per call.
struct SecretKey {
  std::array<std::uint8_t, kKeyBytes> bytes{};
  auto operator<=>(const SecretKey&) const = default;
};

struct KeyPair {
  SecretKey secret_key;
  PublicKey public_key;
  bool operator==(const KeyPair&) const = default;
};

/// One probe signature together with the sequence number it covers.
struct SignedEntry {
  std::uint32_t seq = 0;
  Signature signature;
  bool operator==(const SignedEntry&) const = default;
};

/// Inclusion proof for one leaf. Siblings are ordered from the leaf level up.
struct MerkleProof {
  std::uint32_t leaf_index = 0;
  std::vector<Digest> siblings;
  bool operator==(const MerkleProof&) const = default;
};

/// Deterministic keypair from 32 bytes of seed material. Throws InputError on
/// any other length.
KeyPair keygen(ByteView seed);

Signature sign(const SecretKey& sk, ByteView message);

/// Holds the expanded signing key so bulk signing skips the per-call
/// key derivation done by sign().
class Signer {
 public:
  explicit Signer(const SecretKey& sk);
  ~Signer();
  Signer(const Signer&) = delete;
  Signer& operator=(const Signer&) = delete;
  Signature sign(ByteView message) const;

 private:
  std::array<std::uint8_t, 64> expanded_{};
};

/// Accepts any byte span so truncated or over-long signatures simply fail.
bool verify(const PublicKey& pk, ByteView message, ByteView signature);
bool verify(const PublicKey& pk, ByteView message, const Signature& signature);

Digest sha256(ByteView data);

/// Canonical serialization of a packet set: entries sorted by sequence number,
/// each written as a 4-byte big-endian seq followed by the 64-byte signature.
/// Throws InputError on duplicate sequence numbers.
Bytes serialize_packet_set(std::span<const SignedEntry> entries);

/// SHA-256 of serialize_packet_set(entries).
Digest hash_packet_set(std::span<const SignedEntry> entries);

/// hash_packet_set built up one entry at a time, for entries that arrive in
/// increasing sequence order. digest() may be called repeatedly.
class PacketSetHasher {
 public:
  PacketSetHasher();
  /// Throws InputError unless seq exceeds every sequence number added so far.
  void add(std::uint32_t seq, const Signature& signature);
  Digest digest() const;
  std::size_t size() const { return size_; }

 private:
  alignas(8) std::array<std::uint8_t, 104> state_{};  // crypto_hash_sha256_state
  std::uint32_t last_seq_ = 0;
  std::size_t size_ = 0;
};

Digest merkle_leaf_hash(const Digest& leaf);
Digest merkle_node_hash(const Digest& left, const Digest& right);

/// Root over `leaves` padded to a power of two by repeating the last leaf.
/// Leaves are hashed with prefix 0x00 and internal nodes with prefix 0x01.
Digest merkle_root(std::span<const Digest> leaves);
MerkleProof merkle_prove(std::span<const Digest> leaves, std::size_t index);
bool merkle_verify(const Digest& root, const Digest& leaf, const MerkleProof& proof);

/// Message a challenger signs for sequence number `seq`: seq (big-endian) || m0.
Bytes probe_message(std::uint32_t seq, std::span<const std::uint8_t, kSeedBytes> m0);

/// Message the prover signs for a receipt: h_1i || h_2.
Bytes receipt_message(const Digest& receipt, const Digest& root);

}  // namespace pob::crypto
