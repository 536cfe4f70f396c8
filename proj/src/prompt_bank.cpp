#include "deld/prompt_bank.hpp"

#include <random>

#include "deld/error.hpp"

namespace deld {

std::string_view to_string(PositionMode mode) {
  return mode == PositionMode::kPrepend ? "prepend" : "append";
}

PositionMode parse_position_mode(std::string_view text) {
  if (text == "prepend") return PositionMode::kPrepend;
  if (text == "append") return PositionMode::kAppend;
  throw ConfigError("position must be prepend or append, got '" + std::string(text) + "'");
}

SoftPrompt init_prompt(std::string generator_id, std::size_t m, const EncoderState& encoder,
                       std::uint64_t seed) {
  if (m < 1) throw ConfigError("prompt length must be >= 1");
  const Tensor& table = encoder.token_embeddings.value;
  const std::size_t vocab = table.rows();
  const std::size_t first = vocab > kSpecialTokens ? kSpecialTokens : 0;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(first, vocab - 1);
  Tensor matrix({m, table.cols()}, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const auto src = table.row(pick(rng));
    std::copy(src.begin(), src.end(), matrix.row(r).begin());
  }
  SoftPrompt prompt;
  prompt.generator_id = generator_id;
  prompt.matrix = Parameter("prompt." + generator_id, std::move(matrix), true);
  return prompt;
}

SoftPrompt& PromptBank::add(SoftPrompt prompt) {
  for (const SoftPrompt& p : prompts_) {
    if (p.generator_id == prompt.generator_id) {
      throw ContractError("prompt bank already holds generator '" + prompt.generator_id + "'");
    }
  }
  if (!all_frozen()) {
    throw ContractError("cannot add prompt '" + prompt.generator_id +
                        "' before the newest prompt is frozen");
  }
  if (!prompts_.empty() && prompts_.front().width() != prompt.width()) {
    throw DimensionError("prompt width " + std::to_string(prompt.width()) +
                         " does not match bank width " + std::to_string(prompts_.front().width()));
  }
  prompt.frozen = false;
  prompt.matrix.trainable = true;
  prompts_.push_back(std::move(prompt));
  return prompts_.back();
}

void PromptBank::freeze(std::string_view generator_id) {
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    SoftPrompt& p = prompts_[i];
    if (p.generator_id != generator_id) continue;
    if (p.frozen) return;
    if (i + 1 != prompts_.size()) {
      throw ContractError("prompt '" + std::string(generator_id) +
                          "' is not the most recently added prompt");
    }
    p.frozen = true;
    p.matrix.trainable = false;
    return;
  }
  throw ContractError("no prompt for generator '" + std::string(generator_id) + "'");
}

std::size_t PromptBank::total_rows() const {
  std::size_t n = 0;
  for (const SoftPrompt& p : prompts_) n += p.length();
  return n;
}

bool PromptBank::all_frozen() const {
  for (const SoftPrompt& p : prompts_) {
    if (!p.frozen || p.matrix.trainable) return false;
  }
  return true;
}

bool PromptBank::all_but_newest_frozen() const {
  for (std::size_t i = 0; i + 1 < prompts_.size(); ++i) {
    if (!prompts_[i].frozen || prompts_[i].matrix.trainable) return false;
  }
  return true;
}

void freeze_prompt(PromptBank& bank, std::string_view generator_id) { bank.freeze(generator_id); }

namespace {

std::vector<bool> article_mask_or_default(const std::vector<bool>& mask, std::size_t n) {
  if (mask.empty()) return std::vector<bool>(n, true);
  if (mask.size() != n) {
    throw DimensionError("article mask of length " + std::to_string(mask.size()) + " for " +
                         std::to_string(n) + " article rows");
  }
  return mask;
}

void check_widths(const PromptBank& bank, std::size_t d) {
  for (const SoftPrompt& p : bank.prompts()) {
    if (p.width() != d) {
      throw DimensionError("prompt '" + p.generator_id + "' has d=" + std::to_string(p.width()) +
                           " but article rows have d=" + std::to_string(d));
    }
  }
}

// Layout shared by the tensor and graph paths.
template <typename Part, typename MakePrompt>
std::vector<Part> ordered_parts(const PromptBank& bank, Part article, MakePrompt make_prompt) {
  std::vector<Part> parts;
  parts.reserve(bank.size() + 1);
  if (bank.position_mode() == PositionMode::kAppend) parts.push_back(article);
  for (auto it = bank.prompts().rbegin(); it != bank.prompts().rend(); ++it) {
    parts.push_back(make_prompt(*it));
  }
  if (bank.position_mode() == PositionMode::kPrepend) parts.push_back(article);
  return parts;
}

void finish_layout(const PromptBank& bank, std::size_t n, const std::vector<bool>& article_mask,
                   ArticleSpan& span, std::vector<bool>& mask) {
  const std::size_t prompt_rows = bank.total_rows();
  span.begin = bank.position_mode() == PositionMode::kPrepend ? prompt_rows : 0;
  span.count = n;
  mask.assign(prompt_rows + n, true);
  for (std::size_t i = 0; i < n; ++i) mask[span.begin + i] = article_mask[i];
}

}  // namespace

ComposedInput compose_input(const PromptBank& bank, const Tensor& article_embed,
                            const std::vector<bool>& article_mask) {
  const std::size_t n = article_embed.rows();
  const std::size_t d = article_embed.cols();
  check_widths(bank, d);
  const std::vector<bool> amask = article_mask_or_default(article_mask, n);

  ComposedInput out;
  const auto parts = ordered_parts<const Tensor*>(
      bank, &article_embed, [](const SoftPrompt& p) { return &p.matrix.value; });
  out.rows = Tensor({bank.total_rows() + n, d}, 0.0);
  auto dst = out.rows.data.begin();
  for (const Tensor* part : parts) dst = std::copy(part->data.begin(), part->data.end(), dst);
  finish_layout(bank, n, amask, out.article, out.mask);
  return out;
}

ComposedVar compose_input(Graph& graph, const PromptBank& bank, Var article_embed,
                          const std::vector<bool>& article_mask) {
  const std::size_t n = article_embed.rows();
  check_widths(bank, article_embed.cols());
  const std::vector<bool> amask = article_mask_or_default(article_mask, n);

  ComposedVar out;
  if (bank.empty()) {
    out.rows = article_embed;
  } else {
    const auto parts = ordered_parts<Var>(
        bank, article_embed, [&graph](const SoftPrompt& p) { return graph.param(p.matrix); });
    out.rows = concat_rows(parts);
  }
  finish_layout(bank, n, amask, out.article, out.mask);
  return out;
}

}  // namespace deld
