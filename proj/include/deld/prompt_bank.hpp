#pragma once

// Per-generator soft prompts and their composition with an article.
//
// The bank keeps prompts in learning order P_1..P_k. Composition emits them
// newest first, so a prepend-mode sequence reads [P_k; P_{k-1}; ...; P_1; X]
// and an append-mode sequence reads [X; P_k; ...; P_1].

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "deld/autograd.hpp"
#include "deld/encoder.hpp"

namespace deld {

enum class PositionMode { kPrepend, kAppend };

std::string_view to_string(PositionMode mode);
PositionMode parse_position_mode(std::string_view text);

struct SoftPrompt {
  std::string generator_id;
  Parameter matrix;  // [m x d]
  bool frozen = false;

  std::size_t length() const { return matrix.value.rows(); }
  std::size_t width() const { return matrix.value.cols(); }
};

// Rows are copies of token-embedding rows drawn uniformly (excluding the
// special ids when the vocabulary has other tokens). Throws ConfigError for
// m < 1.
SoftPrompt init_prompt(std::string generator_id, std::size_t m, const EncoderState& encoder,
                       std::uint64_t seed);

class PromptBank {
 public:
  explicit PromptBank(PositionMode mode = PositionMode::kPrepend) : mode_(mode) {}

  // Appends a new (unfrozen) prompt. Every existing prompt must already be
  // frozen and generator ids must be unique; violations raise ContractError.
  SoftPrompt& add(SoftPrompt prompt);

  // Freezes `generator_id`. Only the newest prompt may be frozen; freezing an
  // already-frozen prompt is a no-op. Unknown ids raise ContractError.
  void freeze(std::string_view generator_id);

  bool empty() const { return prompts_.empty(); }
  std::size_t size() const { return prompts_.size(); }
  PositionMode position_mode() const { return mode_; }
  std::size_t total_rows() const;

  const std::vector<SoftPrompt>& prompts() const { return prompts_; }
  // Mutable access in learning order (0 == P_1).
  SoftPrompt& at(std::size_t index) { return prompts_.at(index); }
  const SoftPrompt& at(std::size_t index) const { return prompts_.at(index); }
  SoftPrompt* newest() { return prompts_.empty() ? nullptr : &prompts_.back(); }

  bool all_frozen() const;
  bool all_but_newest_frozen() const;

 private:
  std::vector<SoftPrompt> prompts_;
  PositionMode mode_;
};

void freeze_prompt(PromptBank& bank, std::string_view generator_id);

struct ComposedInput {
  Tensor rows;
  ArticleSpan article;
  std::vector<bool> mask;
};

struct ComposedVar {
  Var rows;
  ArticleSpan article;
  std::vector<bool> mask;
};

// Stacks the bank's prompts around the article embedding. `article_mask`
// marks non-PAD article rows (empty means all real). Prompt rows are always
// unmasked. With an empty bank the output equals the article.
ComposedInput compose_input(const PromptBank& bank, const Tensor& article_embed,
                            const std::vector<bool>& article_mask = {});
ComposedVar compose_input(Graph& graph, const PromptBank& bank, Var article_embed,
                          const std::vector<bool>& article_mask = {});

}  // namespace deld
