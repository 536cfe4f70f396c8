#pragma once

// Miniature pre-LN transformer encoder that stands in for the frozen
// pre-trained language model. Rows of the input are token (or prompt)
// embeddings; learned positional encodings are added inside encode().

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deld/autograd.hpp"
#include "deld/tensor.hpp"

namespace deld {

inline constexpr int kPadId = 0;
inline constexpr int kMaskId = 1;
inline constexpr int kUnkId = 2;
inline constexpr std::size_t kSpecialTokens = 3;

struct EncoderConfig {
  std::size_t d = 64;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t vocab_size = 2000;
  std::size_t n_max = 128;
  // Extra positional rows reserved for prompts (max generators x max length).
  std::size_t prompt_capacity = 8 * 20;
  std::uint64_t seed = 1234;
  double layer_norm_eps = 1e-12;

  std::size_t head_dim() const { return d / heads; }
  std::size_t positional_rows() const { return n_max + prompt_capacity; }

  // Throws ConfigError naming every violated constraint.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct EncoderLayer {
  Parameter wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter ln1_gamma, ln1_beta;
  Parameter w1, b1, w2, b2;
  Parameter ln2_gamma, ln2_beta;
};

struct EncoderState {
  EncoderConfig config;
  Parameter token_embeddings;  // [vocab_size x d]
  Parameter positional;        // [positional_rows x d]
  std::vector<EncoderLayer> layers;
  Parameter final_gamma, final_beta;
  bool frozen = false;

  // Every parameter in declaration order (the serialization order).
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
};

EncoderState init_encoder(const EncoderConfig& config);

// Marks every parameter non-trainable. Idempotent.
void freeze(EncoderState& state);
// Inverse of freeze(), used when a baseline fine-tunes a copy of the backbone.
void unfreeze(EncoderState& state);

// Runs the encoder over a composed sequence. `mask[i] == false` marks a PAD
// row: it neither attends nor is attended to. Throws CapacityError when the
// sequence is longer than the positional table.
Var encode(Graph& graph, const EncoderState& state, Var x_prime, const std::vector<bool>& mask);
Tensor encode(const EncoderState& state, const Tensor& x_prime, const std::vector<bool>& mask);

// Rows [begin, begin + count) of a composed sequence hold the article.
struct ArticleSpan {
  std::size_t begin = 0;
  std::size_t count = 0;
};

// Mean of the hidden rows inside `span` whose mask entry is true.
Var pool(Var h, ArticleSpan span, const std::vector<bool>& mask);
Tensor pool(const Tensor& h, ArticleSpan span, const std::vector<bool>& mask);

struct PretrainOptions {
  std::size_t steps = 500;
  double mask_prob = 0.15;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  std::uint64_t seed = 7;
};

// Masked-token prediction over token-id sequences (PAD-free or PAD-padded;
// PAD ids are ignored). Updates `state` in place and returns the loss of every
// step. The prediction head is tied to the token embeddings plus a bias that
// is discarded afterwards. Throws ContractError on a frozen state.
std::vector<double> pretrain_backbone(EncoderState& state,
                                      std::span<const std::vector<int>> corpus,
                                      const PretrainOptions& options);

}  // namespace deld
