#include "deld/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#include "deld/encoder.hpp"
#include "deld/error.hpp"

namespace deld {

std::size_t GeneratorDataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count_if(
      examples.begin(), examples.end(), [label](const NewsExample& e) { return e.label == label; }));
}

// ---- synthetic corpus -------------------------------------------------------------

void SynthSpec::validate() const {
  std::vector<std::string> problems;
  if (generators.empty()) problems.push_back("no generators");
  if (filler_vocab == 0) problems.push_back("filler_vocab must be positive");
  if (family_size == 0) problems.push_back("family_size must be positive");
  std::vector<std::string> seen;
  for (const GeneratorSpec& g : generators) {
    const std::string tag = "generator '" + g.id + "': ";
    if (g.id.empty()) problems.push_back("generator with empty id");
    if (std::find(seen.begin(), seen.end(), g.id) != seen.end()) {
      problems.push_back(tag + "duplicate id");
    }
    seen.push_back(g.id);
    if (g.true_count + g.fake_count < 10) problems.push_back(tag + "fewer than 10 examples");
    if (g.min_length < 1 || g.min_length > g.max_length) {
      problems.push_back(tag + "length range must satisfy 1 <= min <= max");
    }
    if (g.style_rate < 0.0 || g.style_rate > 1.0) problems.push_back(tag + "style_rate outside [0,1]");
    if (g.style_rate > 0.0 && g.style_pool == 0) problems.push_back(tag + "empty style pool");
    for (const MarkerRule& m : g.markers) {
      if (!(m.correlation >= -1.0 && m.correlation <= 1.0)) {
        problems.push_back(tag + "marker '" + m.family + "' correlation outside [-1,1]");
      }
      if (m.family.empty()) problems.push_back(tag + "marker with empty family name");
    }
  }
  if (problems.empty()) return;
  std::string msg = "invalid synthetic corpus spec:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw ConfigError(msg);
}

namespace {

constexpr std::array<std::string_view, 20> kSyllables = {
    "ba", "ce", "di", "fo", "gu", "ha", "ke", "li", "mo", "nu",
    "pa", "re", "si", "to", "vu", "wa", "xe", "yo", "za", "qi"};

// Distinct pronounceable pseudo-word for an index.
std::string pseudo_word(std::size_t index, std::size_t syllables) {
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += kSyllables[index % kSyllables.size()];
    index /= kSyllables.size();
  }
  return w;
}

std::string lowercase_alnum(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

std::vector<std::string> filler_words(std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pseudo_word(i, 3));
  return out;
}

std::vector<std::string> style_words(std::string_view generator, std::size_t n) {
  std::vector<std::string> out;
  const std::string stem = lowercase_alnum(generator);
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + pseudo_word(i, 2));
  return out;
}

}  // namespace

std::vector<std::string> marker_tokens(const SynthSpec& spec, std::string_view family, int pole) {
  std::vector<std::string> out;
  const std::string stem = lowercase_alnum(family) + (pole == 1 ? "x" : "o");
  for (std::size_t i = 0; i < spec.family_size; ++i) out.push_back(stem + pseudo_word(i, 1));
  return out;
}

std::vector<GeneratorSpec> reference_generators() {
  auto make = [](std::string id, std::size_t t, std::size_t f) {
    GeneratorSpec g;
    g.id = std::move(id);
    g.true_count = t;
    g.fake_count = f;
    return g;
  };
  return {make("human", 2500, 2500), make("vicuna", 500, 326), make("llama", 501, 557),
          make("chatgpt", 501, 587)};
}

namespace {

SynthSpec scaled_reference(std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw ConfigError("corpus scale must be positive");
  SynthSpec spec;
  spec.seed = seed;
  spec.generators = reference_generators();
  for (GeneratorSpec& g : spec.generators) {
    g.true_count = std::max<std::size_t>(5, static_cast<std::size_t>(std::lround(g.true_count * scale)));
    g.fake_count = std::max<std::size_t>(5, static_cast<std::size_t>(std::lround(g.fake_count * scale)));
  }
  return spec;
}

}  // namespace

SynthSpec conflict_preset(std::uint64_t seed, double scale) {
  SynthSpec spec = scaled_reference(seed, scale);
  for (std::size_t i = 0; i < spec.generators.size(); ++i) {
    GeneratorSpec& g = spec.generators[i];
    g.markers = {MarkerRule{"cue", 0.6, 4},
                 MarkerRule{"flip", i % 2 == 0 ? 1.0 : -1.0, 1}};
  }
  return spec;
}

SynthSpec null_preset(std::uint64_t seed, double scale) {
  SynthSpec spec = scaled_reference(seed, scale);
  for (GeneratorSpec& g : spec.generators) g.markers = {MarkerRule{"cue", 0.0, 2}};
  return spec;
}

std::vector<GeneratorDataset> synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::vector<std::string> filler = filler_words(spec.filler_vocab);
  std::vector<double> weights(filler.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = 1.0 / std::pow(static_cast<double>(i + 1), 0.8);
  }

  std::vector<GeneratorDataset> out;
  for (std::size_t gi = 0; gi < spec.generators.size(); ++gi) {
    const GeneratorSpec& g = spec.generators[gi];
    std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), static_cast<std::uint64_t>(gi)};
    std::mt19937_64 rng(seq);
    std::discrete_distribution<std::size_t> filler_pick(weights.begin(), weights.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> length_pick(g.min_length, g.max_length);
    const std::vector<std::string> style = style_words(g.id, g.style_pool);

    std::vector<int> labels(g.true_count, 0);
    labels.insert(labels.end(), g.fake_count, 1);
    std::shuffle(labels.begin(), labels.end(), rng);

    GeneratorDataset ds;
    ds.generator = g.id;
    ds.examples.reserve(labels.size());
    for (int label : labels) {
      std::vector<std::string> words;
      const std::size_t len = length_pick(rng);
      for (std::size_t i = 0; i < len; ++i) {
        if (!style.empty() && unit(rng) < g.style_rate) {
          words.push_back(style[std::uniform_int_distribution<std::size_t>(0, style.size() - 1)(rng)]);
        } else {
          words.push_back(filler[filler_pick(rng)]);
        }
      }
      for (const MarkerRule& m : g.markers) {
        for (std::size_t k = 0; k < m.occurrences; ++k) {
          const bool agree = unit(rng) < (1.0 + m.correlation) / 2.0;
          const int pole = agree ? label : 1 - label;
          const auto tokens = marker_tokens(spec, m.family, pole);
          const auto& tok = tokens[std::uniform_int_distribution<std::size_t>(0, tokens.size() - 1)(rng)];
          const auto pos = std::uniform_int_distribution<std::size_t>(0, words.size())(rng);
          words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), tok);
        }
      }
      std::string text;
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) text.push_back(' ');
        text += words[i];
      }
      ds.examples.push_back(NewsExample{std::move(text), label, g.id});
    }
    out.push_back(std::move(ds));
  }
  return out;
}

// ---- JSONL ---------------------------------------------------------------------------

std::vector<GeneratorDataset> parse_jsonl(std::string_view content) {
  std::vector<GeneratorDataset> out;
  std::map<std::string, std::size_t, std::less<>> index;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t end = std::min(content.find('\n', pos), content.size());
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == content.size()) break;
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (!obj.is_object()) throw ParseError(where + "expected a JSON object");
    if (!obj.contains("text") || !obj["text"].is_string()) {
      throw ValidationError(where + "missing string field 'text'");
    }
    if (!obj.contains("generator") || !obj["generator"].is_string()) {
      throw ValidationError(where + "missing string field 'generator'");
    }
    if (!obj.contains("label") || !obj["label"].is_number_integer()) {
      throw ValidationError(where + "label must be the integer 0 or 1");
    }
    const auto label = obj["label"].get<long long>();
    if (label != 0 && label != 1) {
      throw ValidationError(where + "label must be 0 or 1, got " + std::to_string(label));
    }
    NewsExample ex{obj["text"].get<std::string>(), static_cast<int>(label),
                   obj["generator"].get<std::string>()};
    if (ex.text.empty()) throw ValidationError(where + "empty text");
    auto it = index.find(ex.generator);
    if (it == index.end()) {
      it = index.emplace(ex.generator, out.size()).first;
      out.push_back(GeneratorDataset{ex.generator, {}});
    }
    out[it->second].examples.push_back(std::move(ex));
    if (end == content.size()) break;
  }
  return out;
}

std::vector<GeneratorDataset> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str());
}

void write_jsonl(const std::filesystem::path& path, const std::vector<GeneratorDataset>& datasets) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const GeneratorDataset& ds : datasets) {
    for (const NewsExample& e : ds.examples) {
      nlohmann::ordered_json obj;
      obj["text"] = e.text;
      obj["label"] = e.label;
      obj["generator"] = e.generator;
      out << obj.dump() << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---- tokenization ------------------------------------------------------------

Vocabulary::Vocabulary() {
  add("[PAD]");
  add("[MASK]");
  add("[UNK]");
}

int Vocabulary::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.find(token) != ids_.end(); }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ContractError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::build(const std::vector<GeneratorDataset>& datasets, std::size_t vocab_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ds : datasets) {
    for (const auto& e : ds.examples) {
      for (auto& w : split_words(e.text)) ++counts[std::move(w)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  const std::size_t cap = vocab_size > kSpecialTokens ? vocab_size - kSpecialTokens : 0;
  for (std::size_t i = 0; i < ranked.size() && i < cap; ++i) v.add(ranked[i].first);
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Vocabulary v;
  v.tokens_.clear();
  v.ids_.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": expected token<TAB>id");
    }
    const std::string token = line.substr(0, tab);
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": bad id");
    }
    if (id != v.tokens_.size()) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": ids must be dense");
    }
    v.add(token);
  }
  if (v.tokens_.size() < kSpecialTokens || v.tokens_[0] != "[PAD]" || v.tokens_[1] != "[MASK]" ||
      v.tokens_[2] != "[UNK]") {
    throw ParseError("vocabulary file must start with [PAD], [MASK], [UNK]");
  }
  return v;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::size_t TokenizedText::length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

TokenizedText tokenize(std::string_view text, const Vocabulary& vocab, std::size_t n_max) {
  TokenizedText out;
  out.ids.assign(n_max, kPadId);
  out.mask.assign(n_max, false);
  const auto words = split_words(text);
  for (std::size_t i = 0; i < words.size() && i < n_max; ++i) {
    out.ids[i] = vocab.id(words[i]);
    out.mask[i] = true;
  }
  return out;
}

// ---- splits --------------------------------------------------------------------

Split split_80_20(const GeneratorDataset& dataset, std::size_t repeat_index, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n < 5) {
    throw ContractError("split_80_20: dataset '" + dataset.generator + "' has " +
                        std::to_string(n) + " examples, need at least 5");
  }
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[dataset.examples[i].label == 1 ? 1 : 0].push_back(i);

  std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(repeat_index),
                    std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  for (auto& idx : by_class) std::shuffle(idx.begin(), idx.end(), rng);

  // Largest-remainder allocation keeps |train| = round(0.8 N) while each
  // class stays within one example of its own 80% share.
  const auto target = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> frac{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = 0.8 * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::array<int, 2> order = {0, 1};
  if (frac[1] > frac[0]) std::swap(order[0], order[1]);
  for (int c : order) {
    if (assigned < target && quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  Split split;
  for (int c = 0; c < 2; ++c) {
    const auto& idx = by_class[c];
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(quota[c]), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace deld
