#pragma once

// Experiment orchestration behind the `deld` command line: configuration,
// backbone preparation, the regime runners, ablations, training orders,
// prompt characterization and forward-pass benchmarks. Every subcommand writes
// its reports atomically into the output directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deld/corpus.hpp"
#include "deld/encoder.hpp"
#include "deld/llm_client.hpp"
#include "deld/metrics.hpp"
#include "deld/trainer.hpp"
#include "json.hpp"

namespace deld {

enum class Regime { kDeldSeq, kFtSeq, kFtAll, kFtPer, kZeroShot };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view name);  // ConfigError on unknown names

struct DataSource {
  std::string kind = "synthetic";  // synthetic | jsonl
  std::string preset = "conflict";  // conflict | null
  double scale = 1.0;
  std::filesystem::path path;  // jsonl only
};

struct RunConfig {
  std::uint64_t seed = 42;
  EncoderConfig encoder = desk_encoder();
  PretrainOptions pretrain;
  TrainConfig train;
  Regime regime = Regime::kDeldSeq;
  bool with_deld = false;
  DataSource data;
  std::vector<std::string> order;  // empty keeps dataset order
  std::size_t repeats = 1;
  std::filesystem::path out_dir = "runs";
  std::optional<std::filesystem::path> backbone;  // checkpoint from `pretrain`
  ZeroShotConfig zero_shot;
  std::vector<std::size_t> ablation_lengths{4, 8, 12, 16, 20};
  std::vector<PositionMode> ablation_positions{PositionMode::kPrepend, PositionMode::kAppend};
  std::vector<Regime> order_regimes{Regime::kDeldSeq, Regime::kFtSeq};
  std::vector<std::pair<std::size_t, std::size_t>> bench_sizes{{128, 2}, {128, 4}, {256, 2}};
  std::size_t bench_d = 64;
  std::size_t top_n = 10;

  // Encoder used by experiments: d=32, 2 layers, 2 heads, ffn 64.
  static EncoderConfig desk_encoder();

  // Propagates the master seed into the component configs.
  void resolve();
  // Throws ConfigError listing every violated constraint.
  void validate() const;

  // Fully resolved configuration, minus the output directory.
  nlohmann::ordered_json to_json() const;
  // Missing keys keep their defaults; unknown keys and type errors are
  // reported together as one ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

// The four training orders of the order-robustness study.
struct NamedOrder {
  std::string name;
  std::vector<std::string> generators;
};
const std::vector<NamedOrder>& study_orders();

// Datasets rearranged to `order`; ConfigError unless `order` is a
// permutation of the dataset ids. An empty order returns the input.
std::vector<GeneratorDataset> apply_order(const std::vector<GeneratorDataset>& datasets,
                                          const std::vector<std::string>& order);

std::vector<GeneratorDataset> load_datasets(const RunConfig& cfg);

// Vocabulary plus a pre-trained, frozen backbone.
struct Backbone {
  Vocabulary vocab;
  EncoderState encoder;
  std::vector<double> pretrain_losses;
};
Backbone prepare_backbone(const RunConfig& cfg, const std::vector<GeneratorDataset>& datasets);

// One regime over `datasets` (already ordered), averaged over cfg.repeats
// 80/20 splits. Split repeat r trains with seed cfg.seed + r.
struct RegimeOutcome {
  ExperimentReport report;
  std::optional<SequentialResult> last_run;  // sequential regimes only
};
RegimeOutcome run_regime(const RunConfig& cfg, Regime regime, bool with_deld,
                         const Backbone& backbone, const std::vector<GeneratorDataset>& datasets);

std::vector<AblationCell> ablate_prompts(const RunConfig& cfg, const Backbone& backbone,
                                         const std::vector<GeneratorDataset>& datasets);

struct OrdersOutcome {
  std::vector<std::string> regimes;  // report labels
  std::vector<std::vector<OrderResult>> results;  // [regime][order]
  std::vector<OrderRobustness> robustness;  // per regime
};
OrdersOutcome run_orders(const RunConfig& cfg, const Backbone& backbone,
                         const std::vector<GeneratorDataset>& datasets);

struct TokenScore {
  std::string token;
  double similarity = 0.0;
};
struct GeneratorTokens {
  std::string generator;
  std::vector<TokenScore> tokens;  // non-increasing similarity
};
struct CharacterizationReport {
  std::vector<GeneratorTokens> generators;
  nlohmann::ordered_json to_json() const;
};

// Ranks vocabulary tokens (special tokens excluded) by their best cosine
// similarity to any row of each prompt. Throws ContractError for top_n < 1 or
// an empty bank.
CharacterizationReport characterize(const PromptBank& bank, const EncoderState& encoder,
                                    const Vocabulary& vocab, std::size_t top_n);

struct BenchCell {
  std::size_t n = 0;
  std::size_t layers = 0;
  double median_seconds = 0.0;
};

// Median of five timed forward passes for each (n, layers) size at the
// width of `base`. Throws ContractError for n = 0 and CapacityError when n
// exceeds the positional capacity.
std::vector<BenchCell> bench_forward(const EncoderConfig& base,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& sizes);
std::string bench_csv(const std::vector<BenchCell>& cells);

// Writes `content` to a sibling temporary file, then renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);

// Subcommands. Each returns the path of its primary JSON report.
std::filesystem::path cmd_synth(const RunConfig& cfg);
std::filesystem::path cmd_pretrain(const RunConfig& cfg);
std::filesystem::path cmd_run(const RunConfig& cfg);
std::filesystem::path cmd_ablate(const RunConfig& cfg);
std::filesystem::path cmd_orders(const RunConfig& cfg);
std::filesystem::path cmd_zero_shot(const RunConfig& cfg);
std::filesystem::path cmd_bench(const RunConfig& cfg);
std::filesystem::path cmd_characterize(const RunConfig& cfg);

}  // namespace deld
