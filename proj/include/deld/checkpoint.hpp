#pragma once

// Versioned binary container for encoder weights, prompt banks and the
// classifier head.
//
//   magic    8 bytes  "DELDCKPT"
//   version  u32      currently 1
//   sections u8 flags (1 = encoder, 2 = prompt bank, 4 = classifier)
//   encoder  config header (u32 d, layers, heads, ffn_dim, vocab_size, n_max,
//            prompt_capacity; u64 seed; f64 layer_norm_eps; u8 frozen), then
//            every parameter in declaration order as u64 count + f64 values
//   bank     u8 position (0 prepend, 1 append), u32 prompt count, then per
//            prompt: u32 byte length + UTF-8 generator id, u32 m, u32 d,
//            u8 frozen, f64 values
//   head     u32 d, f64 weights, f64 bias
//
// All integers and floats are little-endian regardless of host order.

#include <filesystem>
#include <optional>
#include <string>

#include "deld/encoder.hpp"
#include "deld/prompt_bank.hpp"
#include "deld/trainer.hpp"

namespace deld {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::optional<EncoderState> encoder;
  std::optional<PromptBank> bank;
  std::optional<Classifier> classifier;
};

std::string serialize(const Checkpoint& checkpoint);
Checkpoint deserialize(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace deld
