#include "pob/crypto.h"

#include <sodium.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>

namespace pob::crypto {
namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

void put_be32(std::uint8_t* out, std::uint32_t v) {
  out[0] = static_cast<std::uint8_t>(v >> 24);
  out[1] = static_cast<std::uint8_t>(v >> 16);
  out[2] = static_cast<std::uint8_t>(v >> 8);
  out[3] = static_cast<std::uint8_t>(v);
}

std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> expand(const SecretKey& sk) {
  std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES> pk{};
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> expanded{};
  crypto_sign_seed_keypair(pk.data(), expanded.data(), sk.bytes.data());
  return expanded;
}

Digest prefixed_hash(std::uint8_t prefix, const Digest& a, const Digest* b) {
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  crypto_hash_sha256_update(&st, &prefix, 1);
  crypto_hash_sha256_update(&st, a.bytes.data(), a.bytes.size());
  if (b != nullptr) crypto_hash_sha256_update(&st, b->bytes.data(), b->bytes.size());
  Digest out;
  crypto_hash_sha256_final(&st, out.bytes.data());
  return out;
}

// Bottom level of the tree (already leaf-hashed), padded to a power of two.
std::vector<Digest> leaf_level(std::span<const Digest> leaves) {
  if (leaves.empty()) throw InputError("merkle tree needs at least one leaf");
  std::vector<Digest> level;
  const std::size_t width = std::bit_ceil(leaves.size());
  level.reserve(width);
  for (const auto& leaf : leaves) level.push_back(merkle_leaf_hash(leaf));
  while (level.size() < width) level.push_back(level.back());
  return level;
}

std::vector<Digest> parent_level(const std::vector<Digest>& level) {
  std::vector<Digest> up;
  up.reserve(level.size() / 2);
  for (std::size_t i = 0; i + 1 < level.size(); i += 2) up.push_back(merkle_node_hash(level[i], level[i + 1]));
  return up;
}

}  // namespace

std::string Digest::hex() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

KeyPair keygen(ByteView seed) {
  if (seed.size() != kSeedBytes) {
    throw InputError("keygen seed must be 32 bytes, got " + std::to_string(seed.size()));
  }
  ensure_sodium();
  KeyPair kp;
  std::copy(seed.begin(), seed.end(), kp.secret_key.bytes.begin());
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> expanded{};
  crypto_sign_seed_keypair(kp.public_key.bytes.data(), expanded.data(), kp.secret_key.bytes.data());
  sodium_memzero(expanded.data(), expanded.size());
  return kp;
}

Signature sign(const SecretKey& sk, ByteView message) {
  ensure_sodium();
  auto expanded = expand(sk);
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(), expanded.data());
  sodium_memzero(expanded.data(), expanded.size());
  return sig;
}

Signer::Signer(const SecretKey& sk) {
  ensure_sodium();
  expanded_ = expand(sk);
}

Signer::~Signer() { sodium_memzero(expanded_.data(), expanded_.size()); }

Signature Signer::sign(ByteView message) const {
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(), expanded_.data());
  return sig;
}

bool verify(const PublicKey& pk, ByteView message, ByteView signature) {
  if (signature.size() != kSignatureBytes) return false;
  ensure_sodium();
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(), pk.bytes.data()) == 0;
}

bool verify(const PublicKey& pk, ByteView message, const Signature& signature) {
  return verify(pk, message, ByteView(signature.bytes));
}

Digest sha256(ByteView data) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
  return d;
}

Bytes serialize_packet_set(std::span<const SignedEntry> entries) {
  std::vector<const SignedEntry*> sorted;
  sorted.reserve(entries.size());
  for (const auto& e : entries) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->seq < b->seq; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->seq == sorted[i - 1]->seq) {
      throw InputError("duplicate sequence number " + std::to_string(sorted[i]->seq) + " in packet set");
    }
  }
  Bytes out(sorted.size() * (4 + kSignatureBytes));
  std::uint8_t* p = out.data();
  for (const auto* e : sorted) {
    put_be32(p, e->seq);
    std::memcpy(p + 4, e->signature.bytes.data(), kSignatureBytes);
    p += 4 + kSignatureBytes;
  }
  return out;
}

Digest hash_packet_set(std::span<const SignedEntry> entries) { return sha256(serialize_packet_set(entries)); }

static_assert(sizeof(crypto_hash_sha256_state) == 104);

PacketSetHasher::PacketSetHasher() {
  ensure_sodium();
  crypto_hash_sha256_init(reinterpret_cast<crypto_hash_sha256_state*>(state_.data()));
}

void PacketSetHasher::add(std::uint32_t seq, const Signature& signature) {
  if (size_ > 0 && seq <= last_seq_) {
    throw InputError("packet set entries must arrive in increasing sequence order");
  }
  std::array<std::uint8_t, 4 + kSignatureBytes> buf;
  put_be32(buf.data(), seq);
  std::memcpy(buf.data() + 4, signature.bytes.data(), kSignatureBytes);
  crypto_hash_sha256_update(reinterpret_cast<crypto_hash_sha256_state*>(state_.data()), buf.data(), buf.size());
  last_seq_ = seq;
  ++size_;
}

Digest PacketSetHasher::digest() const {
  auto copy = state_;
  Digest d;
  crypto_hash_sha256_final(reinterpret_cast<crypto_hash_sha256_state*>(copy.data()), d.bytes.data());
  return d;
}

Digest merkle_leaf_hash(const Digest& leaf) {
  ensure_sodium();
  return prefixed_hash(0x00, leaf, nullptr);
}

Digest merkle_node_hash(const Digest& left, const Digest& right) {
  ensure_sodium();
  return prefixed_hash(0x01, left, &right);
}

Digest merkle_root(std::span<const Digest> leaves) {
  auto level = leaf_level(leaves);
  while (level.size() > 1) level = parent_level(level);
  return level.front();
}

MerkleProof merkle_prove(std::span<const Digest> leaves, std::size_t index) {
  if (index >= leaves.size()) {
    throw InputError("merkle proof index " + std::to_string(index) + " out of range for " +
                     std::to_string(leaves.size()) + " leaves");
  }
  MerkleProof proof;
  proof.leaf_index = static_cast<std::uint32_t>(index);
  auto level = leaf_level(leaves);
  std::size_t pos = index;
  while (level.size() > 1) {
    proof.siblings.push_back(level[pos ^ 1U]);
    level = parent_level(level);
    pos >>= 1;
  }
  return proof;
}

bool merkle_verify(const Digest& root, const Digest& leaf, const MerkleProof& proof) {
  if (proof.siblings.size() >= 32) return false;
  // The index must address a slot of a tree this tall.
  if ((static_cast<std::uint64_t>(proof.leaf_index) >> proof.siblings.size()) != 0) return false;
  Digest node = merkle_leaf_hash(leaf);
  std::uint32_t pos = proof.leaf_index;
  for (const auto& sibling : proof.siblings) {
    node = (pos & 1U) ? merkle_node_hash(sibling, node) : merkle_node_hash(node, sibling);
    pos >>= 1;
  }
  return node == root;
}

Bytes probe_message(std::uint32_t seq, std::span<const std::uint8_t, kSeedBytes> m0) {
  Bytes msg(4 + kSeedBytes);
  put_be32(msg.data(), seq);
  std::copy(m0.begin(), m0.end(), msg.begin() + 4);
  return msg;
}

Bytes receipt_message(const Digest& receipt, const Digest& root) {
  Bytes msg(2 * kDigestBytes);
  std::copy(receipt.bytes.begin(), receipt.bytes.end(), msg.begin());
  std::copy(root.bytes.begin(), root.bytes.end(), msg.begin() + kDigestBytes);
  return msg;
}

}  // namespace pob::crypto
