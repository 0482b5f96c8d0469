#include <gtest/gtest.h>

#include <fstream>

#include "pob/random.h"
#include "pob/wire.h"

using namespace pob;
using namespace pob::wire;

namespace {

Bytes read_hex(const std::string& name) {
  std::ifstream in(std::string(POB_FIXTURE_DIR) + "/" + name);
  std::string hex;
  in >> hex;
  Bytes out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

crypto::Signature sig_of(std::uint8_t v) {
  crypto::Signature s;
  s.bytes.fill(v);
  return s;
}

crypto::Digest random_digest(Rng& rng) { return crypto::Digest{rng.bytes32()}; }

crypto::Signature random_sig(Rng& rng) {
  crypto::Signature s;
  for (auto& b : s.bytes) b = static_cast<std::uint8_t>(rng.below(256));
  return s;
}

crypto::MerkleProof random_proof(Rng& rng) {
  crypto::MerkleProof p;
  p.leaf_index = static_cast<std::uint32_t>(rng.below(1000));
  const auto depth = rng.below(8);
  for (std::uint64_t i = 0; i < depth; ++i) p.siblings.push_back(random_digest(rng));
  return p;
}

Message random_message(Rng& rng, int type) {
  switch (type) {
    case 0: {
      ChallengePacket m;
      m.challenger_id = static_cast<std::uint32_t>(rng.below(100));
      const auto count = 1 + rng.below(22);
      m.base_seq = static_cast<std::uint32_t>(1 + rng.below(1u << 20));
      for (int i = 0; i < 8; ++i) m.nonce[i] = static_cast<std::uint8_t>(rng.below(256));
      for (std::uint64_t i = 0; i < count; ++i) m.signatures.push_back(random_sig(rng));
      return m;
    }
    case 1:
      return ResponsePacket{random_digest(rng), random_digest(rng), random_sig(rng)};
    case 2: {
      VerificationMessage m;
      m.challenger_id = static_cast<std::uint32_t>(rng.below(100));
      m.bitmap = Bitmap(rng.below(400));
      for (std::size_t j = 0; j < m.bitmap.size(); ++j) {
        if (rng.bernoulli(0.7)) m.bitmap.set(j);
      }
      m.merkle_proof = random_proof(rng);
      return m;
    }
    case 3: {
      ChallengerReport m;
      m.challenger_id = static_cast<std::uint32_t>(rng.below(100));
      m.prover_id = static_cast<std::uint32_t>(rng.below(4));
      m.status = rng.bernoulli(0.5) ? ReportStatus::ok : ReportStatus::verification_failed;
      m.merkle_root_seen = random_digest(rng);
      m.rtt_ns = 1 + rng.below(1'000'000'000);
      m.packets_acknowledged = static_cast<std::uint32_t>(rng.below(5000));
      return m;
    }
    case 4: {
      ProverReport m;
      m.prover_id = static_cast<std::uint32_t>(rng.below(4));
      m.merkle_root = random_digest(rng);
      const auto n = rng.below(20);
      for (std::uint64_t i = 0; i < n; ++i) m.acknowledged.push_back(static_cast<std::uint32_t>(rng.below(5000)));
      return m;
    }
    case 5:
      return DisputeRequest{static_cast<std::uint32_t>(rng.below(100))};
    case 6: {
      DisputeSubmission m;
      m.challenger_id = static_cast<std::uint32_t>(rng.below(100));
      std::uint32_t seq = 0;
      const auto count = rng.below(50);
      for (std::uint64_t i = 0; i < count; ++i) {
        seq += static_cast<std::uint32_t>(1 + rng.below(5));
        m.packets.push_back({seq, random_sig(rng)});
      }
      m.merkle_proof = random_proof(rng);
      return m;
    }
    case 7:
      return Ping{rng.next()};
    default:
      return Pong{rng.next()};
  }
}

}  // namespace

TEST(Wire, GoldenChallengePacket) {
  ChallengePacket m;
  m.challenger_id = 3;
  m.base_seq = 45;
  m.nonce = {1, 2, 3, 4, 5, 6, 7, 8};
  for (std::uint8_t k = 1; k <= 22; ++k) m.signatures.push_back(sig_of(k));
  const auto golden = read_hex("golden_challenge.hex");
  ASSERT_EQ(golden.size(), kChallengePayloadBytes);
  EXPECT_EQ(encode(m), golden);
  EXPECT_EQ(decode_as<ChallengePacket>(golden), m);
  EXPECT_EQ(on_wire_size(golden.size()), kPacketBytes);
}

TEST(Wire, GoldenPartialChallengePacketZeroPadded) {
  ChallengePacket m;
  m.base_seq = 1;
  m.signatures = {sig_of(0xab), sig_of(0xcd)};
  EXPECT_EQ(encode(m), read_hex("golden_challenge_partial.hex"));
}

TEST(Wire, GoldenChallengerReport) {
  ChallengerReport m;
  m.challenger_id = 2;
  m.status = ReportStatus::verification_failed;
  m.merkle_root_seen.bytes.fill(0x5a);
  m.rtt_ns = 100'000'000;
  m.packets_acknowledged = 206;
  const auto golden = read_hex("golden_report.hex");
  EXPECT_EQ(encode(m), golden);
  EXPECT_EQ(decode_as<ChallengerReport>(golden), m);
}

TEST(Wire, ChallengePayloadAlways1472) {
  for (std::size_t count = 1; count <= 22; ++count) {
    ChallengePacket m;
    m.base_seq = 1;
    m.signatures.assign(count, sig_of(1));
    ASSERT_EQ(encode(m).size(), 1472u);
  }
}

TEST(Wire, ZeroResponseIsZeroBody) {
  const auto bytes = encode(ResponsePacket{});
  ASSERT_EQ(bytes.size(), kPreambleBytes + kResponseBodyBytes);
  EXPECT_EQ(bytes[0], static_cast<std::uint8_t>(MessageType::response));
  for (std::size_t i = kPreambleBytes; i < bytes.size(); ++i) ASSERT_EQ(bytes[i], 0) << i;
}

TEST(Wire, PingIs98BytesOnWire) { EXPECT_EQ(on_wire_size(encode(Ping{1}).size()), 98u); }

TEST(Wire, RandomRoundTrips) {
  Rng rng(2024);
  for (int type = 0; type < 9; ++type) {
    for (int i = 0; i < 10000; ++i) {
      const auto m = random_message(rng, type);
      const auto bytes = encode(m);
      const auto back = decode(bytes);
      ASSERT_EQ(back, m) << "type " << type << " iteration " << i;
      ASSERT_EQ(encode(back), bytes);
    }
  }
}

TEST(Wire, DecodeErrorsNameTheField) {
  auto expect_field = [](const Bytes& bytes, const std::string& field) {
    try {
      decode(bytes);
      FAIL() << "expected a decode error on " << field;
    } catch (const DecodeError& e) {
      EXPECT_EQ(e.field(), field) << e.what();
    }
  };
  auto pkt = read_hex("golden_challenge.hex");
  auto bad = pkt;
  bad[3] = 23;
  expect_field(bad, "count");
  bad = pkt;
  bad[0] = 0x42;
  expect_field(bad, "type");
  bad = pkt;
  bad.pop_back();
  expect_field(bad, "length");
  bad = pkt;
  bad.push_back(0);
  expect_field(bad, "length");
  bad = pkt;
  bad[1] = 9;
  expect_field(bad, "version");

  VerificationMessage v;
  v.bitmap = Bitmap(10);
  v.bitmap.set(3);
  auto vb = encode(v);
  vb[4 + 4 + 4 + 3] = 2;  // popcount field low byte
  expect_field(vb, "bitmap.popcount");

  ChallengerReport r;
  r.rtt_ns = 5;
  auto rb = encode(r);
  rb[12] = 7;
  expect_field(rb, "status");
}

TEST(Wire, BitmapRejectsTrailingBits) {
  EXPECT_THROW(Bitmap::from_bytes(3, Bytes{0x10}), DecodeError);
  EXPECT_EQ(Bitmap::from_bytes(3, Bytes{0xa0}).popcount(), 2u);
  Bitmap b(9);
  b.set(0);
  b.set(8);
  EXPECT_EQ(b.bytes(), (std::vector<std::uint8_t>{0x80, 0x80}));
}
