#pragma once

// News examples grouped by generator, the synthetic multi-generator corpus,
// JSONL ingestion, word-level tokenization and stratified 80/20 splits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace deld {

struct NewsExample {
  std::string text;
  int label = 0;  // 0 = true news, 1 = disinformation
  std::string generator;

  friend bool operator==(const NewsExample&, const NewsExample&) = default;
};

struct GeneratorDataset {
  std::string generator;
  std::vector<NewsExample> examples;

  std::size_t size() const { return examples.size(); }
  std::size_t count_label(int label) const;

  friend bool operator==(const GeneratorDataset&, const GeneratorDataset&) = default;
};

// ---- synthetic corpus -------------------------------------------------------

// A family of marker tokens with two poles. Every occurrence in an example
// draws from the pole equal to the label with probability (1 + correlation)/2
// and from the opposite pole otherwise, so correlation +1 makes the pole a
// perfect label indicator, -1 a perfectly inverted one and 0 pure noise.
struct MarkerRule {
  std::string family;
  double correlation = 0.0;
  std::size_t occurrences = 1;
};

struct GeneratorSpec {
  std::string id;
  std::size_t true_count = 500;
  std::size_t fake_count = 500;
  // Generator-specific vocabulary bias: each filler slot is drawn from the
  // generator's own style pool with probability `style_rate`.
  std::size_t style_pool = 40;
  double style_rate = 0.3;
  std::vector<MarkerRule> markers;
  std::size_t min_length = 12;
  std::size_t max_length = 20;
};

struct SynthSpec {
  std::uint64_t seed = 42;
  std::size_t filler_vocab = 300;
  std::size_t family_size = 4;  // tokens per pole
  std::vector<GeneratorSpec> generators;

  // Throws ConfigError listing every violated constraint.
  void validate() const;
};

// The four generators with the class counts of the reference datasets
// (human 2500/2500, vicuna 500/326, llama 501/557, chatgpt 501/587), no
// markers attached.
std::vector<GeneratorSpec> reference_generators();

// Conflict preset: a moderate generator-invariant cue shared by every generator
// plus a strong marker family whose correlation flips sign between
// consecutive generators. `scale` multiplies every class count (minimum 10).
SynthSpec conflict_preset(std::uint64_t seed, double scale = 1.0);

// Every marker correlation set to zero; labels are unpredictable from text.
SynthSpec null_preset(std::uint64_t seed, double scale = 1.0);

std::vector<GeneratorDataset> synth_generate(const SynthSpec& spec);

// Pole tokens of a marker family: pole 0 indicates true news and pole 1
// disinformation when the correlation is positive.
std::vector<std::string> marker_tokens(const SynthSpec& spec, std::string_view family, int pole);

// ---- JSONL ingestion -------------------------------------------------------

// One JSON object per line with keys text (string), label (0/1) and
// generator (string). Blank lines are skipped. Datasets come back in order of
// first appearance with examples in file order.
std::vector<GeneratorDataset> load_jsonl(const std::filesystem::path& path);
std::vector<GeneratorDataset> parse_jsonl(std::string_view content);
void write_jsonl(const std::filesystem::path& path, const std::vector<GeneratorDataset>& datasets);

// ---- tokenization ------------------------------------------------------------

class Vocabulary {
 public:
  Vocabulary();

  // Most frequent corpus tokens (ties broken lexicographically), capped so the
  // vocabulary including PAD/MASK/UNK holds at most `vocab_size` entries.
  static Vocabulary build(const std::vector<GeneratorDataset>& datasets, std::size_t vocab_size);

  int id(std::string_view token) const;  // UNK when absent
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }

  // Two-column text file: token<TAB>id, one entry per line in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  int add(const std::string& token);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

// Lowercased words split on every non-alphanumeric ASCII character.
std::vector<std::string> split_words(std::string_view text);

struct TokenizedText {
  std::vector<int> ids;    // length n_max, PAD-padded
  std::vector<bool> mask;  // true for real tokens
  std::size_t length() const;  // number of real tokens
};

TokenizedText tokenize(std::string_view text, const Vocabulary& vocab, std::size_t n_max);

// ---- splits --------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified 80/20 split, deterministic in (seed, repeat_index). The train
// size is round(0.8 N) and each class keeps within one example of 80%.
// Throws ContractError for N < 5.
Split split_80_20(const GeneratorDataset& dataset, std::size_t repeat_index, std::uint64_t seed);

}  // namespace deld
