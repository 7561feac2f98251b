#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "caco/checkpoint.hpp"
#include "caco/errors.hpp"

using namespace caco;
namespace fs = std::filesystem;

namespace {

Checkpoint sample_checkpoint() {
  const std::vector<std::size_t> dims{5, 6, 3};
  Checkpoint c;
  c.query = make_encoder(dims, 1);
  c.key = make_encoder(dims, 2);
  c.key.role = EncoderRole::key;
  c.bank = init_bank({}, 7, 3, 9);
  for (std::size_t i = 0; i < c.bank.velocity.values().size(); ++i) {
    c.bank.velocity.values()[i] = 0.01 * static_cast<double>(i);
  }
  quantize_to_f32(c);
  return c;
}

void expect_same(const Checkpoint& a, const Checkpoint& b) {
  EXPECT_EQ(a.bank.entries, b.bank.entries);
  EXPECT_EQ(a.bank.velocity, b.bank.velocity);
  EXPECT_EQ(a.query.layers, b.query.layers);
  EXPECT_EQ(a.key.layers, b.key.layers);
}

}  // namespace

TEST(Checkpoint, EncodeDecodeIsExact) {
  const Checkpoint c = sample_checkpoint();
  const auto bytes = encode_checkpoint(c);
  expect_same(decode_checkpoint(bytes), c);
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);
}

TEST(Checkpoint, LayoutHeader) {
  const Checkpoint c = sample_checkpoint();
  const auto bytes = encode_checkpoint(c);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CACO");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 7);
  EXPECT_EQ(bytes[12], 3);
  const std::size_t expect = 16 + 2 * 7 * 3 * 4 + 4 + 2 * 8 + 2 * 4 * (6 * 5 + 6 + 3 * 6 + 3);
  EXPECT_EQ(bytes.size(), expect);
}

TEST(Checkpoint, UnquantizedValuesRoundToFloat) {
  Checkpoint c = sample_checkpoint();
  c.bank.entries(0, 0) = 0.1;
  const Checkpoint back = decode_checkpoint(encode_checkpoint(c));
  EXPECT_EQ(back.bank.entries(0, 0), static_cast<double>(0.1f));
}

TEST(Checkpoint, BadMagicAndVersion) {
  auto bytes = encode_checkpoint(sample_checkpoint());
  auto wrong = bytes;
  wrong[0] = 'X';
  EXPECT_THROW(decode_checkpoint(wrong), CheckpointError);
  wrong = bytes;
  wrong[4] = 2;
  try {
    decode_checkpoint(wrong);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Checkpoint, TruncationDetectedEverywhere) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  for (std::size_t len = 0; len < bytes.size(); len += 7) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(len));
    EXPECT_THROW(decode_checkpoint(cut), CheckpointError) << len;
  }
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(decode_checkpoint(longer), CheckpointError);
}

TEST(Checkpoint, HugeDeclaredSizesRejectedWithoutAllocating) {
  auto bytes = encode_checkpoint(sample_checkpoint());
  bytes[8] = 0xFF;
  bytes[9] = 0xFF;
  bytes[10] = 0xFF;
  EXPECT_THROW(decode_checkpoint(bytes), CheckpointError);
}

TEST(Checkpoint, FileRoundTripIsAtomic) {
  const fs::path dir = fs::temp_directory_path() / "caco_ckpt_test";
  fs::create_directories(dir);
  const fs::path p = dir / "state.bin";
  const Checkpoint c = sample_checkpoint();
  save_checkpoint(c, p);
  EXPECT_FALSE(fs::exists(dir / "state.bin.tmp"));
  expect_same(load_checkpoint(p), c);
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), CheckpointError);
}

TEST(Checkpoint, MismatchedEncodersRejected) {
  Checkpoint c = sample_checkpoint();
  const std::vector<std::size_t> dims{5, 4, 3};
  c.key = make_encoder(dims, 0);
  EXPECT_THROW(encode_checkpoint(c), ConsistencyError);
}
