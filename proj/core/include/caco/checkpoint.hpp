#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "caco/bank.hpp"
#include "caco/encoder.hpp"

namespace caco {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  MemoryBank bank;
  EncoderParams query;
  EncoderParams key;
};

// Little-endian layout:
//   "CACO" u32 version u32 K u32 D
//   f32 entries[K*D] f32 velocity[K*D]
//   u32 layers, then u32 out, u32 in per layer
//   query weights then key weights, each layer as f32 W[out*in] then f32 b[out]
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError on bad magic, unknown version, truncation or
// inconsistent shapes. The bank mode is not stored and comes back as caco.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

// Written to a temporary sibling and renamed into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rounds every stored value to float so that a save/load round trip is exact.
void quantize_to_f32(Checkpoint& ckpt);
void quantize_to_f32(MemoryBank& bank);
void quantize_to_f32(EncoderParams& params);

}  // namespace caco
