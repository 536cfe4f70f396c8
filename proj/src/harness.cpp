#include "deld/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "deld/checkpoint.hpp"
#include "deld/error.hpp"

namespace deld {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::kDeldSeq: return "deld-seq";
    case Regime::kFtSeq: return "ft-seq";
    case Regime::kFtAll: return "ft-all";
    case Regime::kFtPer: return "ft-per";
    case Regime::kZeroShot: return "zero-shot";
  }
  return "?";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::kDeldSeq, Regime::kFtSeq, Regime::kFtAll, Regime::kFtPer,
                   Regime::kZeroShot}) {
    if (to_string(r) == name) return r;
  }
  throw ConfigError("unknown regime '" + std::string(name) +
                    "' (expected deld-seq, ft-seq, ft-all, ft-per or zero-shot)");
}

// ---- configuration -------------------------------------------------------------

EncoderConfig RunConfig::desk_encoder() {
  EncoderConfig c;
  c.d = 32;
  c.layers = 2;
  c.heads = 2;
  c.ffn_dim = 64;
  return c;
}

void RunConfig::resolve() {
  encoder.seed = seed;
  pretrain.seed = seed;
  train.seed = seed;
  if (regime == Regime::kDeldSeq) with_deld = true;
}

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto collect = [&](auto&& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  };
  collect([&] { encoder.validate(); });
  collect([&] { train.validate(); });
  collect([&] { zero_shot.validate(); });
  if (repeats < 1) problems.push_back("repeats must be >= 1");
  if (data.kind != "synthetic" && data.kind != "jsonl") {
    problems.push_back("data.source must be synthetic or jsonl");
  }
  if (data.kind == "synthetic") {
    if (data.preset != "conflict" && data.preset != "null") {
      problems.push_back("data.preset must be conflict or null");
    }
    if (!(data.scale > 0.0)) problems.push_back("data.scale must be positive");
  }
  if (data.kind == "jsonl" && data.path.empty()) problems.push_back("data.path is required for jsonl");
  if (std::set<std::string>(order.begin(), order.end()).size() != order.size()) {
    problems.push_back("order lists a dataset more than once");
  }
  if (!(pretrain.mask_prob >= 0.0 && pretrain.mask_prob <= 1.0)) {
    problems.push_back("pretrain.mask_prob must lie in [0, 1]");
  }
  if (pretrain.batch_size < 1) problems.push_back("pretrain.batch_size must be >= 1");
  if (ablation_lengths.empty()) problems.push_back("ablation.lengths is empty");
  if (ablation_positions.empty()) problems.push_back("ablation.positions is empty");
  for (std::size_t len : ablation_lengths) {
    if (len < 1) problems.push_back("ablation lengths must be >= 1");
  }
  if (order_regimes.empty()) problems.push_back("orders.regimes is empty");
  for (Regime r : order_regimes) {
    if (r != Regime::kDeldSeq && r != Regime::kFtSeq) {
      problems.push_back("orders.regimes accepts only deld-seq and ft-seq");
    }
  }
  if (bench_d < 1 || encoder.heads == 0 || bench_d % encoder.heads != 0) {
    problems.push_back("bench.d must be a positive multiple of encoder.heads");
  }
  for (const auto& [n, layers] : bench_sizes) {
    if (n < 1) problems.push_back("bench sizes need n >= 1");
    if (layers < 1) problems.push_back("bench sizes need layers >= 1");
  }
  if (top_n < 1) problems.push_back("characterize.top_n must be >= 1");
  if (problems.empty()) return;
  std::string msg = "invalid run config:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}

ojson RunConfig::to_json() const {
  ojson j;
  j["seed"] = seed;
  j["regime"] = std::string(to_string(regime));
  j["with_deld"] = with_deld;
  j["order"] = order;
  j["repeats"] = repeats;
  j["backbone"] = backbone ? ojson(backbone->string()) : ojson(nullptr);
  j["encoder"] = {{"d", encoder.d},
                  {"layers", encoder.layers},
                  {"heads", encoder.heads},
                  {"ffn_dim", encoder.ffn_dim},
                  {"vocab_size", encoder.vocab_size},
                  {"n_max", encoder.n_max},
                  {"prompt_capacity", encoder.prompt_capacity},
                  {"layer_norm_eps", encoder.layer_norm_eps}};
  j["pretrain"] = {{"steps", pretrain.steps},
                   {"mask_prob", pretrain.mask_prob},
                   {"batch_size", pretrain.batch_size},
                   {"lr", pretrain.lr}};
  j["train"] = {{"lr", train.lr},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"prompt_len", train.prompt_len},
                {"position", std::string(deld::to_string(train.position))},
                {"allow_any_prompt_len", train.allow_any_prompt_len}};
  if (data.kind == "jsonl") {
    j["data"] = {{"source", data.kind}, {"path", data.path.string()}};
  } else {
    j["data"] = {{"source", data.kind}, {"preset", data.preset}, {"scale", data.scale}};
  }
  j["zero_shot"] = {{"endpoint", zero_shot.endpoint},
                    {"model", zero_shot.model},
                    {"api_key_env", zero_shot.api_key_env},
                    {"timeout_seconds", zero_shot.timeout_seconds},
                    {"max_retries", zero_shot.max_retries},
                    {"backoff_seconds", zero_shot.backoff_seconds},
                    {"parallelism", zero_shot.parallelism}};
  auto positions = ojson::array();
  for (PositionMode p : ablation_positions) positions.push_back(std::string(deld::to_string(p)));
  j["ablation"] = {{"lengths", ablation_lengths}, {"positions", positions}};
  auto regimes = ojson::array();
  for (Regime r : order_regimes) regimes.push_back(std::string(to_string(r)));
  j["orders"] = {{"regimes", regimes}};
  auto sizes = ojson::array();
  for (const auto& [n, layers] : bench_sizes) sizes.push_back({n, layers});
  j["bench"] = {{"d", bench_d}, {"sizes", sizes}};
  j["characterize"] = {{"top_n", top_n}};
  return j;
}

namespace {

// Reads the keys of one JSON object into a config section, recording unknown
// keys and type errors instead of stopping at the first one.
class Section {
 public:
  Section(const nlohmann::json& j, std::string prefix, std::vector<std::string>& problems)
      : j_(j), prefix_(std::move(prefix)), problems_(problems) {
    if (!j_.is_object()) problems_.push_back((prefix_.empty() ? "config" : prefix_) + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      problems_.push_back(prefix_ + key + " has the wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key);
  }
  const nlohmann::json& at(const char* key) const { return j_.at(key); }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) problems_.push_back("unknown key " + prefix_ + k);
    }
  }

 private:
  const nlohmann::json& j_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  std::vector<std::string> problems;
  Section top(j, "", problems);
  top.read("seed", c.seed);
  if (top.has("regime")) {
    try {
      c.regime = parse_regime(j.at("regime").get<std::string>());
    } catch (const std::exception& e) {
      problems.push_back(std::string("regime: ") + e.what());
    }
  }
  top.read("with_deld", c.with_deld);
  top.read("order", c.order);
  top.read("repeats", c.repeats);
  std::string out;
  top.read("out", out);
  if (!out.empty()) c.out_dir = out;
  if (top.has("backbone") && !j.at("backbone").is_null()) {
    std::string b;
    top.read("backbone", b);
    c.backbone = b;
  }
  if (top.has("encoder")) {
    Section s(j.at("encoder"), "encoder.", problems);
    s.read("d", c.encoder.d);
    s.read("layers", c.encoder.layers);
    s.read("heads", c.encoder.heads);
    s.read("ffn_dim", c.encoder.ffn_dim);
    s.read("vocab_size", c.encoder.vocab_size);
    s.read("n_max", c.encoder.n_max);
    s.read("prompt_capacity", c.encoder.prompt_capacity);
    s.read("layer_norm_eps", c.encoder.layer_norm_eps);
    s.finish();
  }
  if (top.has("pretrain")) {
    Section s(j.at("pretrain"), "pretrain.", problems);
    s.read("steps", c.pretrain.steps);
    s.read("mask_prob", c.pretrain.mask_prob);
    s.read("batch_size", c.pretrain.batch_size);
    s.read("lr", c.pretrain.lr);
    s.finish();
  }
  if (top.has("train")) {
    Section s(j.at("train"), "train.", problems);
    s.read("lr", c.train.lr);
    s.read("epochs", c.train.epochs);
    s.read("batch_size", c.train.batch_size);
    s.read("prompt_len", c.train.prompt_len);
    s.read("allow_any_prompt_len", c.train.allow_any_prompt_len);
    if (s.has("position")) {
      try {
        c.train.position = parse_position_mode(s.at("position").get<std::string>());
      } catch (const std::exception& e) {
        problems.push_back(std::string("train.position: ") + e.what());
      }
    }
    s.finish();
  }
  if (top.has("data")) {
    Section s(j.at("data"), "data.", problems);
    s.read("source", c.data.kind);
    s.read("preset", c.data.preset);
    s.read("scale", c.data.scale);
    std::string path;
    s.read("path", path);
    c.data.path = path;
    s.finish();
  }
  if (top.has("zero_shot")) {
    Section s(j.at("zero_shot"), "zero_shot.", problems);
    s.read("endpoint", c.zero_shot.endpoint);
    s.read("model", c.zero_shot.model);
    s.read("api_key_env", c.zero_shot.api_key_env);
    s.read("timeout_seconds", c.zero_shot.timeout_seconds);
    s.read("max_retries", c.zero_shot.max_retries);
    s.read("backoff_seconds", c.zero_shot.backoff_seconds);
    s.read("parallelism", c.zero_shot.parallelism);
    s.finish();
  }
  if (top.has("ablation")) {
    Section s(j.at("ablation"), "ablation.", problems);
    s.read("lengths", c.ablation_lengths);
    if (s.has("positions")) {
      c.ablation_positions.clear();
      try {
        for (const auto& p : s.at("positions")) {
          c.ablation_positions.push_back(parse_position_mode(p.get<std::string>()));
        }
      } catch (const std::exception& e) {
        problems.push_back(std::string("ablation.positions: ") + e.what());
      }
    }
    s.finish();
  }
  if (top.has("orders")) {
    Section s(j.at("orders"), "orders.", problems);
    if (s.has("regimes")) {
      c.order_regimes.clear();
      try {
        for (const auto& r : s.at("regimes")) c.order_regimes.push_back(parse_regime(r.get<std::string>()));
      } catch (const std::exception& e) {
        problems.push_back(std::string("orders.regimes: ") + e.what());
      }
    }
    s.finish();
  }
  if (top.has("bench")) {
    Section s(j.at("bench"), "bench.", problems);
    s.read("d", c.bench_d);
    s.read("sizes", c.bench_sizes);
    s.finish();
  }
  if (top.has("characterize")) {
    Section s(j.at("characterize"), "characterize.", problems);
    s.read("top_n", c.top_n);
    s.finish();
  }
  top.finish();
  if (!problems.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

// ---- data and backbone ---------------------------------------------------------

const std::vector<NamedOrder>& study_orders() {
  static const std::vector<NamedOrder> orders{
      {"Order-1", {"human", "vicuna", "llama", "chatgpt"}},
      {"Order-2", {"vicuna", "human", "chatgpt", "llama"}},
      {"Order-3", {"llama", "chatgpt", "human", "vicuna"}},
      {"Order-4", {"chatgpt", "llama", "vicuna", "human"}},
  };
  return orders;
}

std::vector<GeneratorDataset> apply_order(const std::vector<GeneratorDataset>& datasets,
                                          const std::vector<std::string>& order) {
  if (order.empty()) return datasets;
  std::vector<std::string> have;
  for (const auto& d : datasets) have.push_back(d.generator);
  std::vector<std::string> want = order;
  std::sort(have.begin(), have.end());
  std::sort(want.begin(), want.end());
  if (have != want) {
    std::string msg = "order is not a permutation of the dataset ids (datasets:";
    for (const auto& d : datasets) msg += " " + d.generator;
    msg += "; order:";
    for (const auto& o : order) msg += " " + o;
    throw ConfigError(msg + ")");
  }
  std::vector<GeneratorDataset> out;
  for (const auto& id : order) {
    out.push_back(*std::find_if(datasets.begin(), datasets.end(),
                                [&](const GeneratorDataset& d) { return d.generator == id; }));
  }
  return out;
}

std::vector<GeneratorDataset> load_datasets(const RunConfig& cfg) {
  if (cfg.data.kind == "jsonl") return load_jsonl(cfg.data.path);
  const SynthSpec spec = cfg.data.preset == "null" ? null_preset(cfg.seed, cfg.data.scale)
                                                   : conflict_preset(cfg.seed, cfg.data.scale);
  return synth_generate(spec);
}

namespace {

fs::path vocab_path_for(const fs::path& checkpoint) {
  return checkpoint.parent_path() / "vocab.tsv";
}

}  // namespace

Backbone prepare_backbone(const RunConfig& cfg, const std::vector<GeneratorDataset>& datasets) {
  if (cfg.backbone) {
    Checkpoint ck = load_checkpoint(*cfg.backbone);
    if (!ck.encoder) throw IoError(cfg.backbone->string() + " holds no encoder");
    Backbone b{Vocabulary::load(vocab_path_for(*cfg.backbone)), std::move(*ck.encoder), {}};
    freeze(b.encoder);
    return b;
  }
  Backbone b{Vocabulary::build(datasets, cfg.encoder.vocab_size), init_encoder(cfg.encoder), {}};
  std::vector<std::vector<int>> corpus;
  for (const auto& d : datasets) {
    for (const auto& e : d.examples) corpus.push_back(encode_example(e, b.vocab, cfg.encoder.n_max).ids);
  }
  b.pretrain_losses = pretrain_backbone(b.encoder, corpus, cfg.pretrain);
  freeze(b.encoder);
  return b;
}

// ---- regimes ---------------------------------------------------------------------

namespace {

ojson logs_json(const std::vector<PhaseLog>& logs, std::size_t repeat) {
  auto out = ojson::array();
  for (const auto& l : logs) {
    out.push_back({{"repeat", repeat},
                   {"phase", l.phase},
                   {"generator", l.generator},
                   {"epoch_losses", l.epoch_losses}});
  }
  return out;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

RegimeOutcome run_regime(const RunConfig& cfg, Regime regime, bool with_deld,
                         const Backbone& backbone, const std::vector<GeneratorDataset>& datasets) {
  if (regime == Regime::kZeroShot) throw ConfigError("zero-shot runs through the zero-shot command");
  if (regime == Regime::kDeldSeq) with_deld = true;
  const bool sequential = regime == Regime::kDeldSeq || regime == Regime::kFtSeq;

  RegimeOutcome out;
  ExperimentReport& report = out.report;
  report.regime = std::string(to_string(regime));
  report.with_deld = with_deld;
  report.seed = cfg.seed;
  report.config = cfg.to_json();
  report.config["regime"] = report.regime;
  report.config["with_deld"] = with_deld;
  for (const auto& d : datasets) report.datasets.push_back(d.generator);

  std::vector<AccuracyMatrix> matrices;
  std::vector<double> fgts;
  std::vector<std::vector<double>> pooled;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const auto tasks = prepare_tasks(datasets, backbone.vocab, cfg.encoder.n_max, r, cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + r;
    if (sequential) {
      SequentialResult res = with_deld ? run_deld_seq(backbone.encoder, tasks, tc)
                                       : run_ft_seq(backbone.encoder, tasks, tc);
      for (auto& l : logs_json(res.logs, r)) report.logs.push_back(std::move(l));
      matrices.push_back(res.matrix);
      if (tasks.size() >= 2) fgts.push_back(forgetting(res.matrix));
      out.last_run = std::move(res);
    } else {
      PooledResult res = regime == Regime::kFtAll ? run_ft_all(backbone.encoder, tasks, tc, with_deld)
                                                  : run_ft_per(backbone.encoder, tasks, tc, with_deld);
      for (auto& l : logs_json(res.logs, r)) report.logs.push_back(std::move(l));
      pooled.push_back(res.accuracies);
    }
  }
  if (sequential) {
    report.matrix = average(matrices);
    report.accuracies = report.matrix->final_row();
    if (!fgts.empty()) report.fgt = mean(fgts);
  } else {
    report.accuracies.assign(datasets.size(), 0.0);
    for (const auto& accs : pooled) {
      for (std::size_t i = 0; i < accs.size(); ++i) report.accuracies[i] += accs[i];
    }
    for (double& a : report.accuracies) a /= static_cast<double>(pooled.size());
  }
  return out;
}

std::vector<AblationCell> ablate_prompts(const RunConfig& cfg, const Backbone& backbone,
                                         const std::vector<GeneratorDataset>& datasets) {
  std::vector<AblationCell> cells;
  for (std::size_t len : cfg.ablation_lengths) {
    for (PositionMode pos : cfg.ablation_positions) {
      RunConfig c = cfg;
      c.train.prompt_len = len;
      c.train.position = pos;
      const RegimeOutcome o = run_regime(c, Regime::kDeldSeq, true, backbone, datasets);
      cells.push_back(AblationCell{len, std::string(to_string(pos)), o.report.average(), o.report.fgt});
    }
  }
  return cells;
}

OrdersOutcome run_orders(const RunConfig& cfg, const Backbone& backbone,
                         const std::vector<GeneratorDataset>& datasets) {
  OrdersOutcome out;
  for (Regime regime : cfg.order_regimes) {
    std::vector<OrderResult> results;
    std::string label;
    for (const NamedOrder& order : study_orders()) {
      const auto ordered = apply_order(datasets, order.generators);
      const RegimeOutcome o = run_regime(cfg, regime, regime == Regime::kDeldSeq, backbone, ordered);
      label = o.report.label();
      results.push_back(OrderResult{order.name, order.generators, o.report.accuracies});
    }
    out.regimes.push_back(label);
    out.robustness.push_back(order_robustness(results));
    out.results.push_back(std::move(results));
  }
  return out;
}

// ---- characterization ----------------------------------------------------------

ojson CharacterizationReport::to_json() const {
  auto gens = ojson::array();
  for (const auto& g : generators) {
    auto toks = ojson::array();
    for (const auto& t : g.tokens) toks.push_back({{"token", t.token}, {"similarity", t.similarity}});
    gens.push_back({{"generator", g.generator}, {"tokens", toks}});
  }
  return {{"schema_version", 1}, {"generators", gens}};
}

CharacterizationReport characterize(const PromptBank& bank, const EncoderState& encoder,
                                    const Vocabulary& vocab, std::size_t top_n) {
  if (top_n < 1) throw ContractError("characterize: top_n must be >= 1");
  if (bank.empty()) throw ContractError("characterize: prompt bank is empty");
  const Tensor& table = encoder.token_embeddings.value;
  const std::size_t d = table.cols();
  const std::size_t count = std::min(vocab.size(), table.rows());

  auto norm = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<double> token_norm(count);
  for (std::size_t t = 0; t < count; ++t) token_norm[t] = norm(table.row(t));

  CharacterizationReport report;
  for (const SoftPrompt& p : bank.prompts()) {
    if (p.width() != d) throw DimensionError("characterize: prompt width differs from embeddings");
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t t = kSpecialTokens; t < count; ++t) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < p.length(); ++r) {
        const auto row = p.matrix.value.row(r);
        const double denom = norm(row) * token_norm[t];
        double cos = 0.0;
        if (denom > 0.0) {
          const auto emb = table.row(t);
          double dot = 0.0;
          for (std::size_t c = 0; c < d; ++c) dot += row[c] * emb[c];
          cos = dot / denom;
        }
        best = std::max(best, cos);
      }
      scored.emplace_back(best, t);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    GeneratorTokens g{p.generator_id, {}};
    for (std::size_t i = 0; i < std::min(top_n, scored.size()); ++i) {
      g.tokens.push_back(TokenScore{vocab.token(static_cast<int>(scored[i].second)), scored[i].first});
    }
    report.generators.push_back(std::move(g));
  }
  return report;
}

// ---- benchmarks -----------------------------------------------------------------

std::vector<BenchCell> bench_forward(const EncoderConfig& base,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& sizes) {
  std::vector<BenchCell> cells;
  for (const auto& [n, layers] : sizes) {
    if (n == 0) throw ContractError("bench_forward: articles need at least one token");
    EncoderConfig c = base;
    c.layers = layers;
    c.validate();
    if (n > c.positional_rows()) {
      throw CapacityError("bench_forward: n=" + std::to_string(n) + " exceeds positional capacity " +
                          std::to_string(c.positional_rows()));
    }
    EncoderState enc = init_encoder(c);
    freeze(enc);
    std::mt19937_64 rng(c.seed + n);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor x({n, c.d});
    for (double& v : x.data) v = normal(rng);
    const std::vector<bool> mask(n, true);
    (void)encode(enc, x, mask);  // warm-up
    std::vector<double> times;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor h = encode(enc, x, mask);
      const auto t1 = std::chrono::steady_clock::now();
      if (h.rows() != n) throw ContractError("bench_forward: encoder changed the row count");
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    cells.push_back(BenchCell{n, layers, times[2]});
  }
  return cells;
}

std::string bench_csv(const std::vector<BenchCell>& cells) {
  std::ostringstream os;
  os << "n,layers,median_seconds\n" << std::setprecision(9);
  for (const auto& c : cells) os << c.n << ',' << c.layers << ',' << c.median_seconds << '\n';
  return os.str();
}

// ---- output ----------------------------------------------------------------------

void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

namespace {

void write_json(const fs::path& path, const ojson& j) { write_atomic(path, j.dump(2) + "\n"); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Prepared {
  std::vector<GeneratorDataset> datasets;
  Backbone backbone;
};

Prepared prepare(const RunConfig& cfg) {
  cfg.validate();
  auto datasets = apply_order(load_datasets(cfg), cfg.order);
  Backbone backbone = prepare_backbone(cfg, datasets);
  return Prepared{std::move(datasets), std::move(backbone)};
}

}  // namespace

fs::path cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  const auto datasets = load_datasets(cfg);
  fs::create_directories(cfg.out_dir);
  write_jsonl(cfg.out_dir / "corpus.jsonl.tmp", datasets);
  fs::rename(cfg.out_dir / "corpus.jsonl.tmp", cfg.out_dir / "corpus.jsonl");
  auto gens = ojson::array();
  for (const auto& d : datasets) {
    gens.push_back({{"generator", d.generator},
                    {"examples", d.size()},
                    {"true", d.count_label(0)},
                    {"fake", d.count_label(1)}});
  }
  const fs::path report = cfg.out_dir / "synth.json";
  write_json(report, {{"schema_version", 1}, {"config", cfg.to_json()}, {"datasets", gens}});
  return report;
}

fs::path cmd_pretrain(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c = cfg;
  c.backbone.reset();
  Prepared p = prepare(c);
  fs::create_directories(cfg.out_dir);
  save_checkpoint(cfg.out_dir / "backbone.ckpt", Checkpoint{p.backbone.encoder, {}, {}});
  p.backbone.vocab.save(cfg.out_dir / "vocab.tsv.tmp");
  fs::rename(cfg.out_dir / "vocab.tsv.tmp", cfg.out_dir / "vocab.tsv");
  const auto& losses = p.backbone.pretrain_losses;
  const fs::path report = cfg.out_dir / "pretrain.json";
  write_json(report, {{"schema_version", 1},
                      {"config", c.to_json()},
                      {"vocab_size", p.backbone.vocab.size()},
                      {"parameters", p.backbone.encoder.parameter_count()},
                      {"losses", losses},
                      {"wall_clock_seconds", seconds_since(t0)}});
  return report;
}

fs::path cmd_run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Prepared p = prepare(cfg);
  RegimeOutcome o = run_regime(cfg, cfg.regime, cfg.with_deld, p.backbone, p.datasets);
  o.report.wall_clock_seconds = seconds_since(t0);

  std::string text = render_accuracy_table({o.report});
  if (o.report.matrix) {
    text += "\n" + render_matrix(*o.report.matrix, o.report.datasets);
    if (o.report.fgt) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "\nFgt: %.2f\n", *o.report.fgt);
      text += buf;
      write_atomic(cfg.out_dir / "forgetting.csv", forgetting_csv(*o.report.matrix, o.report.datasets));
    }
  }
  if (o.last_run) {
    fs::create_directories(cfg.out_dir);
    save_checkpoint(cfg.out_dir / "model.ckpt",
                    Checkpoint{o.last_run->model.encoder, o.last_run->model.bank,
                               o.last_run->model.classifier});
    p.backbone.vocab.save(cfg.out_dir / "vocab.tsv.tmp");
    fs::rename(cfg.out_dir / "vocab.tsv.tmp", cfg.out_dir / "vocab.tsv");
  }
  write_atomic(cfg.out_dir / "run_report.txt", text);
  const fs::path report = cfg.out_dir / "run_report.json";
  write_json(report, o.report.to_json());
  return report;
}

fs::path cmd_ablate(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Prepared p = prepare(cfg);
  const auto cells = ablate_prompts(cfg, p.backbone, p.datasets);
  auto grid = ojson::array();
  for (const auto& c : cells) {
    grid.push_back({{"prompt_len", c.prompt_len},
                    {"position", c.position},
                    {"average_accuracy", c.average_accuracy},
                    {"fgt", c.fgt ? ojson(*c.fgt) : ojson(nullptr)}});
  }
  write_atomic(cfg.out_dir / "ablation.txt", render_ablation_table(cells));
  const fs::path report = cfg.out_dir / "ablation.json";
  write_json(report, {{"schema_version", 1},
                      {"config", cfg.to_json()},
                      {"grid", grid},
                      {"wall_clock_seconds", seconds_since(t0)}});
  return report;
}

fs::path cmd_orders(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Prepared p = prepare(cfg);
  const OrdersOutcome o = run_orders(cfg, p.backbone, p.datasets);
  auto orders = ojson::array();
  for (const auto& order : study_orders()) {
    orders.push_back({{"name", order.name}, {"generators", order.generators}});
  }
  auto regimes = ojson::array();
  for (std::size_t i = 0; i < o.regimes.size(); ++i) {
    auto per = ojson::array();
    for (std::size_t k = 0; k < o.results[i].size(); ++k) {
      per.push_back({{"order", o.results[i][k].order_name},
                     {"accuracies", o.results[i][k].final_accuracies},
                     {"average_accuracy", o.robustness[i].averages[k]}});
    }
    regimes.push_back({{"label", o.regimes[i]}, {"orders", per}, {"spread", o.robustness[i].spread}});
  }
  write_atomic(cfg.out_dir / "orders.txt", render_order_table(o.regimes, o.robustness));
  const fs::path report = cfg.out_dir / "orders.json";
  write_json(report, {{"schema_version", 1},
                      {"config", cfg.to_json()},
                      {"orders", orders},
                      {"regimes", regimes},
                      {"wall_clock_seconds", seconds_since(t0)}});
  return report;
}

fs::path cmd_zero_shot(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const auto datasets = apply_order(load_datasets(cfg), cfg.order);
  std::vector<GeneratorDataset> test_sets;
  for (const auto& d : datasets) {
    const Split split = split_80_20(d, 0, cfg.seed);
    GeneratorDataset t{d.generator, {}};
    for (std::size_t i : split.test) t.examples.push_back(d.examples[i]);
    test_sets.push_back(std::move(t));
  }
  ExperimentReport r = evaluate_zero_shot(cfg.zero_shot, test_sets);
  r.seed = cfg.seed;
  r.config = cfg.to_json();
  r.config["regime"] = "zero-shot";
  r.wall_clock_seconds = seconds_since(t0);
  write_atomic(cfg.out_dir / "zero_shot.txt", render_accuracy_table({r}));
  const fs::path report = cfg.out_dir / "zero_shot.json";
  write_json(report, r.to_json());
  return report;
}

fs::path cmd_bench(const RunConfig& cfg) {
  cfg.validate();
  EncoderConfig base = cfg.encoder;
  base.d = cfg.bench_d;
  base.ffn_dim = 2 * cfg.bench_d;
  const auto cells = bench_forward(base, cfg.bench_sizes);
  write_atomic(cfg.out_dir / "bench.csv", bench_csv(cells));
  auto rows = ojson::array();
  for (const auto& c : cells) {
    rows.push_back({{"n", c.n}, {"layers", c.layers}, {"median_seconds", c.median_seconds}});
  }
  const fs::path report = cfg.out_dir / "bench.json";
  write_json(report, {{"schema_version", 1},
                      {"config", cfg.to_json()},
                      {"d", base.d},
                      {"cells", rows}});
  return report;
}

fs::path cmd_characterize(const RunConfig& cfg) {
  cfg.validate();
  const fs::path model_path = cfg.out_dir / "model.ckpt";
  const Checkpoint ck = load_checkpoint(model_path);
  if (!ck.encoder || !ck.bank) {
    throw IoError(model_path.string() + " lacks an encoder or prompt bank; run a deld-seq experiment first");
  }
  const Vocabulary vocab = Vocabulary::load(vocab_path_for(model_path));
  const CharacterizationReport r = characterize(*ck.bank, *ck.encoder, vocab, cfg.top_n);
  std::ostringstream text;
  for (const auto& g : r.generators) {
    text << g.generator << ":";
    char buf[64];
    for (const auto& t : g.tokens) {
      std::snprintf(buf, sizeof(buf), " %.4f", t.similarity);
      text << ' ' << t.token << buf;
    }
    text << '\n';
  }
  write_atomic(cfg.out_dir / "characterization.txt", text.str());
  const fs::path report = cfg.out_dir / "characterization.json";
  write_json(report, r.to_json());
  return report;
}

}  // namespace deld
