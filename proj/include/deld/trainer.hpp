#pragma once

// Continual prompt tuning over a frozen encoder plus the full fine-tuning
// baselines it is compared against.
//
// DELD stage k: append a fresh prompt for D_k, train it jointly with the
// classifier, freeze it, then re-tune the classifier alone on D_k. Inference
// always runs the whole bank; the generator of a test article is never used.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deld/autograd.hpp"
#include "deld/corpus.hpp"
#include "deld/encoder.hpp"
#include "deld/metrics.hpp"
#include "deld/prompt_bank.hpp"

namespace deld {

struct Classifier {
  Parameter weight;  // [1 x d]
  Parameter bias;    // [1]

  static Classifier zeros(std::size_t d);
  std::size_t dim() const { return weight.value.cols(); }
};

// sigmoid(W . pooled + b); `pooled` is a single row.
Var classify(Var pooled, const Classifier& clf);
double classify(const Tensor& pooled, const Classifier& clf);

// -[y log p + (1 - y) log(1 - p)] with p clamped to [1e-12, 1 - 1e-12].
double bce_loss(double probability, int label);

inline constexpr std::size_t kStandardPromptLengths[] = {4, 8, 12, 16, 20};

struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::size_t prompt_len = 12;
  PositionMode position = PositionMode::kPrepend;
  std::uint64_t seed = 2024;
  // Permits prompt lengths outside {4, 8, 12, 16, 20} (tests, tiny models).
  bool allow_any_prompt_len = false;

  void validate() const;
};

struct ModelState {
  EncoderState encoder;
  PromptBank bank;
  Classifier classifier;
};

// A tokenized article reduced to its non-PAD prefix. Trailing PAD rows never
// influence real rows or the pooled output, so dropping them is exact.
struct EncodedExample {
  std::vector<int> ids;
  int label = 0;
};

struct TaskData {
  std::string generator;
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> test;
};

EncodedExample encode_example(const NewsExample& example, const Vocabulary& vocab, std::size_t n_max);

// Tokenizes every dataset and applies split_80_20(dataset, repeat, seed).
std::vector<TaskData> prepare_tasks(const std::vector<GeneratorDataset>& datasets,
                                    const Vocabulary& vocab, std::size_t n_max,
                                    std::size_t repeat, std::uint64_t seed);

Var forward_probability(Graph& graph, const ModelState& model, const std::vector<int>& ids);
// Pooled article representation under the current bank.
Tensor pooled_features(const ModelState& model, const std::vector<int>& ids);
double predict_probability(const ModelState& model, const std::vector<int>& ids);

// Predicted labels with threshold 0.5 (a probability of exactly 0.5 maps to 1).
std::vector<int> predict(const ModelState& model, std::span<const EncodedExample> examples);
double evaluate(const ModelState& model, std::span<const EncodedExample> examples);

struct PhaseLog {
  std::string phase;
  std::string generator;
  std::vector<double> epoch_losses;  // mean bce per epoch
};

// Trains the newest prompt and the classifier on `task.train`. Requires a
// frozen encoder, an unfrozen newest prompt and every earlier prompt frozen.
PhaseLog train_prompt_for_task(ModelState& model, const TaskData& task, const TrainConfig& cfg,
                               std::uint64_t phase_seed);

// Re-tunes only the classifier on `task.train`. Requires the encoder and
// every prompt frozen.
PhaseLog finetune_classifier(ModelState& model, const TaskData& task, const TrainConfig& cfg,
                             std::uint64_t phase_seed);

// Full fine-tuning of encoder and classifier (baselines). The encoder must be
// unfrozen and the bank empty.
PhaseLog finetune_full(ModelState& model, std::span<const EncodedExample> train,
                       const std::string& generator, const TrainConfig& cfg,
                       std::uint64_t phase_seed);

struct StageEvent {
  std::size_t stage;  // 0-based
  const ModelState& model;
  const TaskData& task;
  const AccuracyMatrix& matrix;
};
using StageHook = std::function<void(const StageEvent&)>;

struct SequentialResult {
  ModelState model;
  AccuracyMatrix matrix;
  std::vector<PhaseLog> logs;
  std::vector<std::string> order;
};

// Both runs start from a copy of `backbone`. DELD freezes its copy; FT-Seq
// unfreezes its copy and trains everything. After every stage all test splits
// are evaluated and written to column k of the matrix.
SequentialResult run_deld_seq(const EncoderState& backbone, const std::vector<TaskData>& tasks,
                              const TrainConfig& cfg, const StageHook& hook = {});
SequentialResult run_ft_seq(const EncoderState& backbone, const std::vector<TaskData>& tasks,
                            const TrainConfig& cfg, const StageHook& hook = {});

struct PooledResult {
  std::vector<double> accuracies;  // per task, own test split
  std::vector<PhaseLog> logs;
  std::size_t train_examples = 0;
  bool encoder_changed = false;
};

// One model on the union of all training splits. with_deld trains a single
// prompt over the frozen encoder instead of fine-tuning it.
PooledResult run_ft_all(const EncoderState& backbone, const std::vector<TaskData>& tasks,
                        const TrainConfig& cfg, bool with_deld);

// An independent model per task. with_deld trains one prompt per task over the
// shared frozen encoder.
PooledResult run_ft_per(const EncoderState& backbone, const std::vector<TaskData>& tasks,
                        const TrainConfig& cfg, bool with_deld);

}  // namespace deld
