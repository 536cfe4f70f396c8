#include "deld/trainer.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include "deld/error.hpp"
#include "deld/optim.hpp"

namespace deld {

Classifier Classifier::zeros(std::size_t d) {
  return Classifier{Parameter("classifier.weight", Tensor({1, d}, 0.0)),
                    Parameter("classifier.bias", Tensor({1}, 0.0))};
}

Var classify(Var pooled, const Classifier& clf) {
  if (pooled.rows() != 1 || pooled.cols() != clf.dim()) {
    throw DimensionError("classify: pooled " + shape_string(pooled.value().shape) +
                         " vs classifier width " + std::to_string(clf.dim()));
  }
  Graph& g = pooled.graph();
  return sigmoid(add_row(matmul_nt(pooled, g.param(clf.weight)), g.param(clf.bias)));
}

double classify(const Tensor& pooled, const Classifier& clf) {
  Graph g;
  return classify(g.constant(pooled), clf).value().data[0];
}

double bce_loss(double probability, int label) { return bce_value(probability, label); }

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (!(lr > 0.0)) problems.push_back("lr must be positive");
  if (batch_size == 0) problems.push_back("batch_size must be positive");
  if (prompt_len == 0) problems.push_back("prompt_len must be >= 1");
  const bool standard_len = std::find(std::begin(kStandardPromptLengths), std::end(kStandardPromptLengths),
                                   prompt_len) != std::end(kStandardPromptLengths);
  if (!standard_len && !allow_any_prompt_len) {
    problems.push_back("prompt_len " + std::to_string(prompt_len) +
                       " not in {4,8,12,16,20} (set allow_any_prompt_len to override)");
  }
  if (problems.empty()) return;
  std::string msg = "invalid train config:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw ConfigError(msg);
}

EncodedExample encode_example(const NewsExample& example, const Vocabulary& vocab,
                              std::size_t n_max) {
  const TokenizedText t = tokenize(example.text, vocab, n_max);
  EncodedExample out;
  out.label = example.label;
  out.ids.assign(t.ids.begin(), t.ids.begin() + static_cast<std::ptrdiff_t>(t.length()));
  // An article with no word characters still needs one row to pool over.
  if (out.ids.empty()) out.ids.push_back(kUnkId);
  return out;
}

std::vector<TaskData> prepare_tasks(const std::vector<GeneratorDataset>& datasets,
                                    const Vocabulary& vocab, std::size_t n_max,
                                    std::size_t repeat, std::uint64_t seed) {
  std::vector<TaskData> tasks;
  for (const GeneratorDataset& ds : datasets) {
    const Split split = split_80_20(ds, repeat, seed);
    TaskData task;
    task.generator = ds.generator;
    for (std::size_t i : split.train) task.train.push_back(encode_example(ds.examples[i], vocab, n_max));
    for (std::size_t i : split.test) task.test.push_back(encode_example(ds.examples[i], vocab, n_max));
    tasks.push_back(std::move(task));
  }
  return tasks;
}

namespace {

Var pooled_var(Graph& g, const ModelState& model, const std::vector<int>& ids) {
  Var article = gather_rows(g.param(model.encoder.token_embeddings), ids);
  ComposedVar cx = compose_input(g, model.bank, article);
  Var h = encode(g, model.encoder, cx.rows, cx.mask);
  return pool(h, cx.article, cx.mask);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{base, a, b};
  std::uint64_t out = 0;
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  out = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return out;
}

// Minibatch Adam over `count` examples for cfg.epochs epochs. `forward` builds
// the predicted probability of example i on a fresh graph.
PhaseLog run_epochs(const std::string& phase, const std::string& generator,
                    std::vector<Parameter*> params, std::size_t count, const std::vector<int>& labels,
                    const TrainConfig& cfg, std::uint64_t seed,
                    const std::function<Var(Graph&, std::size_t)>& forward) {
  PhaseLog log{phase, generator, {}};
  if (cfg.epochs == 0 || count == 0) return log;
  Adam adam(std::move(params), AdamOptions{cfg.lr});
  adam.zero_grad();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < count; start += cfg.batch_size) {
      const std::size_t end = std::min(count, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        Graph g;
        Var loss = bce_loss(forward(g, i), labels[i]);
        total += loss.value().data[0];
        g.backward(scale(loss, inv));
      }
      adam.step();
      adam.zero_grad();
    }
    log.epoch_losses.push_back(total / static_cast<double>(count));
  }
  return log;
}

std::vector<int> labels_of(std::span<const EncodedExample> examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

bool encoder_fully_frozen(const EncoderState& e) {
  if (!e.frozen) return false;
  for (const Parameter* p : e.parameters()) {
    if (p->trainable) return false;
  }
  return true;
}

}  // namespace

Var forward_probability(Graph& g, const ModelState& model, const std::vector<int>& ids) {
  return classify(pooled_var(g, model, ids), model.classifier);
}

Tensor pooled_features(const ModelState& model, const std::vector<int>& ids) {
  Graph g;
  return pooled_var(g, model, ids).value();
}

double predict_probability(const ModelState& model, const std::vector<int>& ids) {
  Graph g;
  return forward_probability(g, model, ids).value().data[0];
}

std::vector<int> predict(const ModelState& model, std::span<const EncodedExample> examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(predict_probability(model, e.ids) >= 0.5 ? 1 : 0);
  return out;
}

double evaluate(const ModelState& model, std::span<const EncodedExample> examples) {
  return accuracy(predict(model, examples), labels_of(examples));
}

PhaseLog train_prompt_for_task(ModelState& model, const TaskData& task, const TrainConfig& cfg,
                               std::uint64_t phase_seed) {
  if (!encoder_fully_frozen(model.encoder)) {
    throw ContractError("train_prompt_for_task: encoder must be frozen");
  }
  SoftPrompt* newest = model.bank.newest();
  if (newest == nullptr || newest->frozen || !newest->matrix.trainable) {
    throw ContractError("train_prompt_for_task: bank needs a fresh unfrozen prompt for '" +
                        task.generator + "'");
  }
  if (!model.bank.all_but_newest_frozen()) {
    throw ContractError("train_prompt_for_task: an earlier prompt is not frozen");
  }
  const auto labels = labels_of(task.train);
  return run_epochs("prompt", task.generator,
                    {&newest->matrix, &model.classifier.weight, &model.classifier.bias},
                    task.train.size(), labels, cfg, phase_seed,
                    [&](Graph& g, std::size_t i) {
                      return forward_probability(g, model, task.train[i].ids);
                    });
}

PhaseLog finetune_classifier(ModelState& model, const TaskData& task, const TrainConfig& cfg,
                             std::uint64_t phase_seed) {
  if (!encoder_fully_frozen(model.encoder)) {
    throw ContractError("finetune_classifier: encoder must be frozen");
  }
  if (!model.bank.all_frozen()) throw ContractError("finetune_classifier: a prompt is not frozen");
  if (cfg.epochs == 0) return PhaseLog{"classifier", task.generator, {}};

  // Everything upstream of the classifier is frozen, so pooled features are
  // computed once and reused for every epoch.
  std::vector<Tensor> features;
  features.reserve(task.train.size());
  for (const auto& e : task.train) features.push_back(pooled_features(model, e.ids));
  const auto labels = labels_of(task.train);
  return run_epochs("classifier", task.generator,
                    {&model.classifier.weight, &model.classifier.bias}, features.size(), labels,
                    cfg, phase_seed, [&](Graph& g, std::size_t i) {
                      return classify(g.constant(features[i]), model.classifier);
                    });
}

PhaseLog finetune_full(ModelState& model, std::span<const EncodedExample> train,
                       const std::string& generator, const TrainConfig& cfg,
                       std::uint64_t phase_seed) {
  if (model.encoder.frozen) throw ContractError("finetune_full: encoder is frozen");
  if (!model.bank.empty()) throw ContractError("finetune_full: baselines run without prompts");
  std::vector<Parameter*> params = model.encoder.parameters();
  params.push_back(&model.classifier.weight);
  params.push_back(&model.classifier.bias);
  const auto labels = labels_of(train);
  return run_epochs("full", generator, std::move(params), train.size(), labels, cfg, phase_seed,
                    [&](Graph& g, std::size_t i) {
                      return forward_probability(g, model, train[i].ids);
                    });
}

namespace {

void check_tasks(const std::vector<TaskData>& tasks, const char* who) {
  if (tasks.empty()) throw ContractError(std::string(who) + ": need at least one dataset");
  for (const auto& t : tasks) {
    if (t.train.empty() || t.test.empty()) {
      throw ContractError(std::string(who) + ": dataset '" + t.generator + "' has an empty split");
    }
  }
}

void evaluate_stage(const ModelState& model, const std::vector<TaskData>& tasks, std::size_t stage,
                    AccuracyMatrix& matrix) {
  for (std::size_t i = 0; i < tasks.size(); ++i) matrix.set(i, stage, evaluate(model, tasks[i].test));
}

ModelState fresh_model(const EncoderState& backbone, const TrainConfig& cfg, bool frozen) {
  ModelState model{backbone, PromptBank(cfg.position), Classifier::zeros(backbone.config.d)};
  if (frozen) {
    freeze(model.encoder);
  } else {
    unfreeze(model.encoder);
  }
  return model;
}

}  // namespace

SequentialResult run_deld_seq(const EncoderState& backbone, const std::vector<TaskData>& tasks,
                              const TrainConfig& cfg, const StageHook& hook) {
  cfg.validate();
  check_tasks(tasks, "run_deld_seq");
  SequentialResult result{fresh_model(backbone, cfg, true), AccuracyMatrix(tasks.size()), {}, {}};
  ModelState& model = result.model;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const TaskData& task = tasks[k];
    result.order.push_back(task.generator);
    model.bank.add(init_prompt(task.generator, cfg.prompt_len, model.encoder,
                               derive_seed(cfg.seed, k, 1)));
    result.logs.push_back(train_prompt_for_task(model, task, cfg, derive_seed(cfg.seed, k, 2)));
    freeze_prompt(model.bank, task.generator);
    result.logs.push_back(finetune_classifier(model, task, cfg, derive_seed(cfg.seed, k, 3)));
    evaluate_stage(model, tasks, k, result.matrix);
    if (hook) hook(StageEvent{k, model, task, result.matrix});
  }
  return result;
}

SequentialResult run_ft_seq(const EncoderState& backbone, const std::vector<TaskData>& tasks,
                            const TrainConfig& cfg, const StageHook& hook) {
  cfg.validate();
  check_tasks(tasks, "run_ft_seq");
  SequentialResult result{fresh_model(backbone, cfg, false), AccuracyMatrix(tasks.size()), {}, {}};
  ModelState& model = result.model;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const TaskData& task = tasks[k];
    result.order.push_back(task.generator);
    result.logs.push_back(
        finetune_full(model, task.train, task.generator, cfg, derive_seed(cfg.seed, k, 4)));
    evaluate_stage(model, tasks, k, result.matrix);
    if (hook) hook(StageEvent{k, model, task, result.matrix});
  }
  return result;
}

namespace {

bool encoder_differs(const EncoderState& a, const EncoderState& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!bit_identical(pa[i]->value, pb[i]->value)) return true;
  }
  return false;
}

// Trains one model on `train` under the chosen regime.
ModelState train_single(const EncoderState& backbone, const TaskData& task, const TrainConfig& cfg,
                        bool with_deld, std::uint64_t stream, std::vector<PhaseLog>& logs) {
  ModelState model = fresh_model(backbone, cfg, with_deld);
  if (with_deld) {
    model.bank.add(init_prompt(task.generator, cfg.prompt_len, model.encoder,
                               derive_seed(cfg.seed, stream, 1)));
    logs.push_back(train_prompt_for_task(model, task, cfg, derive_seed(cfg.seed, stream, 2)));
    freeze_prompt(model.bank, task.generator);
    logs.push_back(finetune_classifier(model, task, cfg, derive_seed(cfg.seed, stream, 3)));
  } else {
    logs.push_back(finetune_full(model, task.train, task.generator, cfg,
                                 derive_seed(cfg.seed, stream, 4)));
  }
  return model;
}

}  // namespace

PooledResult run_ft_all(const EncoderState& backbone, const std::vector<TaskData>& tasks,
                        const TrainConfig& cfg, bool with_deld) {
  cfg.validate();
  check_tasks(tasks, "run_ft_all");
  TaskData pooled;
  pooled.generator = "all";
  for (const auto& t : tasks) pooled.train.insert(pooled.train.end(), t.train.begin(), t.train.end());
  PooledResult result;
  result.train_examples = pooled.train.size();
  const ModelState model = train_single(backbone, pooled, cfg, with_deld, 0, result.logs);
  for (const auto& t : tasks) result.accuracies.push_back(evaluate(model, t.test));
  result.encoder_changed = encoder_differs(model.encoder, backbone);
  return result;
}

PooledResult run_ft_per(const EncoderState& backbone, const std::vector<TaskData>& tasks,
                        const TrainConfig& cfg, bool with_deld) {
  cfg.validate();
  check_tasks(tasks, "run_ft_per");
  PooledResult result;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    result.train_examples += tasks[k].train.size();
    const ModelState model = train_single(backbone, tasks[k], cfg, with_deld, k, result.logs);
    result.accuracies.push_back(evaluate(model, tasks[k].test));
    result.encoder_changed = result.encoder_changed || encoder_differs(model.encoder, backbone);
  }
  return result;
}

}  // namespace deld
