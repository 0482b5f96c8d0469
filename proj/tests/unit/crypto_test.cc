#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pob/crypto.h"
#include "pob/random.h"

using namespace pob;
using namespace pob::crypto;

namespace {

Bytes from_hex(const std::string& hex) {
  Bytes out;
  for (std::size_t i = 0; i < hex.size(); i += 2) out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  return out;
}

std::string hex(ByteView b) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (auto c : b) {
    s += digits[c >> 4];
    s += digits[c & 15];
  }
  return s;
}

Signature filled(std::uint8_t v) {
  Signature s;
  s.bytes.fill(v);
  return s;
}

Digest digest_of(std::uint8_t v) { return sha256(Bytes{v}); }

}  // namespace

// Reference values below come from Python's hashlib and the `cryptography`
// package's Ed25519, computed independently of this code.

TEST(Crypto, Rfc8032FirstVector) {
  const auto kp = keygen(from_hex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"));
  EXPECT_EQ(hex(kp.public_key.bytes), "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
  const auto sig = sign(kp.secret_key, {});
  EXPECT_EQ(hex(sig.bytes),
            "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b");
}

TEST(Crypto, ProbeSignatureMatchesReference) {
  Bytes seed(32);
  for (int i = 0; i < 32; ++i) seed[i] = static_cast<std::uint8_t>(i);
  const auto kp = keygen(seed);
  EXPECT_EQ(hex(kp.public_key.bytes), "03a107bff3ce10be1d70dd18e74bc09967e4d6309ba50d5f1ddc8664125531b8");
  std::array<std::uint8_t, 32> m0;
  m0.fill(0xaa);
  const auto msg = probe_message(7, m0);
  ASSERT_EQ(msg.size(), 36u);
  EXPECT_EQ(msg[3], 7);
  const auto sig = sign(kp.secret_key, msg);
  EXPECT_EQ(hex(sig.bytes),
            "4f98b11fe53e1aa90f1356e7fb2fb782917cec6f3c6b90e158ca633d5e59a669a2f544b3df5f076422ced384342ac350b12e60e4400424135a4eea8064adba0b");
  EXPECT_EQ(Signer(kp.secret_key).sign(msg), sig);
}

TEST(Crypto, KeygenDeterministicAndSeedLengthChecked) {
  Bytes seed(32, 9);
  EXPECT_EQ(keygen(seed), keygen(seed));
  Bytes other(32, 10);
  EXPECT_NE(keygen(seed).public_key, keygen(other).public_key);
  EXPECT_THROW(keygen(Bytes(31)), InputError);
  EXPECT_THROW(keygen(Bytes(33)), InputError);
}

TEST(Crypto, SignVerifyRoundTripAndRejections) {
  Rng rng(11);
  const auto kp = keygen(rng.bytes32());
  const auto other = keygen(rng.bytes32());
  for (int i = 0; i < 100; ++i) {
    Bytes msg(rng.below(200));
    for (auto& b : msg) b = static_cast<std::uint8_t>(rng.below(256));
    const auto sig = sign(kp.secret_key, msg);
    ASSERT_TRUE(verify(kp.public_key, msg, sig));
    ASSERT_FALSE(verify(other.public_key, msg, sig));
    Bytes wrong = msg;
    wrong.push_back(1);
    ASSERT_FALSE(verify(kp.public_key, wrong, sig));
  }
  const Bytes msg = {1, 2, 3};
  const auto sig = sign(kp.secret_key, msg);
  ByteView truncated(sig.bytes.data(), 63);
  EXPECT_FALSE(verify(kp.public_key, msg, truncated));
  for (std::size_t bit = 0; bit < 512; ++bit) {
    auto bad = sig;
    bad.bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    ASSERT_FALSE(verify(kp.public_key, msg, bad)) << "bit " << bit;
  }
}

TEST(Crypto, PacketSetHash) {
  EXPECT_EQ(hash_packet_set({}).hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  std::vector<SignedEntry> entries = {{3, filled(3)}, {1, filled(1)}};
  EXPECT_EQ(hash_packet_set(entries).hex(), "99d4bcbc7b992b5c39ffa67046aced42ed04193af324e4a9f4e36e7659c0ee7c");

  std::vector<SignedEntry> many;
  for (std::uint32_t s = 1; s <= 40; ++s) many.push_back({s * 3, filled(static_cast<std::uint8_t>(s))});
  const auto ref = hash_packet_set(many);
  std::mt19937 gen(5);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(many.begin(), many.end(), gen);
    ASSERT_EQ(hash_packet_set(many), ref);
  }
  many.push_back(many.front());
  EXPECT_THROW(hash_packet_set(many), InputError);
}

TEST(Crypto, IncrementalHasherMatchesBatch) {
  std::vector<SignedEntry> entries;
  PacketSetHasher h;
  EXPECT_EQ(h.digest(), hash_packet_set(entries));
  for (std::uint32_t s = 1; s <= 50; ++s) {
    entries.push_back({s * 2, filled(static_cast<std::uint8_t>(s))});
    h.add(s * 2, entries.back().signature);
    ASSERT_EQ(h.digest(), hash_packet_set(entries));
  }
  EXPECT_THROW(h.add(100, filled(0)), InputError);
}

TEST(Crypto, MerkleRoots) {
  const auto d0 = digest_of(0);
  EXPECT_EQ(merkle_root(std::vector<Digest>{d0}).hex(), "d9de27625445003d8a9739a851e3ff8d41c0683630b4d63a88327a6aaa37c409");
  EXPECT_EQ(merkle_root(std::vector<Digest>{d0}), merkle_leaf_hash(d0));
  const auto h = merkle_leaf_hash(d0);
  EXPECT_EQ(merkle_root(std::vector<Digest>{d0, d0}), merkle_node_hash(h, h));
  std::vector<Digest> three = {digest_of(0), digest_of(1), digest_of(2)};
  EXPECT_EQ(merkle_root(three).hex(), "bd1176fdb3a24eed1bfd6a843e3607292fd2cc7407416428e0e46b0d5c721798");
  std::vector<Digest> five;
  for (std::uint8_t i = 0; i < 5; ++i) five.push_back(digest_of(i));
  EXPECT_EQ(merkle_root(five).hex(), "5052e51773345c9d319e4b27b57d30d0c4f9745eea41fa08540bc6fdf527d196");
  EXPECT_THROW(merkle_root(std::vector<Digest>{}), InputError);
}

TEST(Crypto, MerkleProofs) {
  EXPECT_TRUE(merkle_prove(std::vector<Digest>{digest_of(1)}, 0).siblings.empty());
  std::vector<Digest> two = {digest_of(0), digest_of(1)};
  const auto p = merkle_prove(two, 0);
  ASSERT_EQ(p.siblings.size(), 1u);
  EXPECT_EQ(p.siblings[0], merkle_leaf_hash(two[1]));

  for (std::size_t size : {3u, 8u, 13u}) {
    std::vector<Digest> leaves;
    for (std::size_t i = 0; i < size; ++i) leaves.push_back(digest_of(static_cast<std::uint8_t>(i + 40)));
    const auto root = merkle_root(leaves);
    for (std::size_t i = 0; i < size; ++i) {
      const auto proof = merkle_prove(leaves, i);
      ASSERT_TRUE(merkle_verify(root, leaves[i], proof)) << size << "/" << i;
      auto swapped = proof;
      swapped.leaf_index ^= 1u;
      if (leaves[i] != leaves[std::min(size - 1, i ^ 1u)]) {
        ASSERT_FALSE(merkle_verify(root, leaves[i], swapped));
      }
    }
    EXPECT_THROW(merkle_prove(leaves, size), InputError);
  }
}

TEST(Crypto, MerkleTamperFuzz) {
  std::vector<Digest> leaves;
  for (std::uint8_t i = 0; i < 10; ++i) leaves.push_back(digest_of(i));
  const auto root = merkle_root(leaves);
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto idx = rng.below(leaves.size());
    auto proof = merkle_prove(leaves, idx);
    auto& sib = proof.siblings[rng.below(proof.siblings.size())];
    sib.bytes[rng.below(32)] ^= static_cast<std::uint8_t>(1u << rng.below(8));
    ASSERT_FALSE(merkle_verify(root, leaves[idx], proof));
  }
}

TEST(Crypto, ReceiptMessageIsConcatenation) {
  const auto a = digest_of(1), b = digest_of(2);
  const auto m = receipt_message(a, b);
  ASSERT_EQ(m.size(), 64u);
  EXPECT_TRUE(std::equal(a.bytes.begin(), a.bytes.end(), m.begin()));
  EXPECT_TRUE(std::equal(b.bytes.begin(), b.bytes.end(), m.begin() + 32));
}
