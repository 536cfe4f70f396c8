#include "deld/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "deld/error.hpp"
#include "deld/optim.hpp"

namespace deld {

void EncoderConfig::validate() const {
  std::vector<std::string> problems;
  if (d == 0) problems.push_back("d must be positive");
  if (heads == 0) problems.push_back("heads must be positive");
  if (heads != 0 && d % heads != 0) {
    problems.push_back("d=" + std::to_string(d) + " is not divisible by heads=" +
                       std::to_string(heads));
  }
  if (layers == 0) problems.push_back("layer count must be >= 1");
  if (n_max == 0) problems.push_back("n_max must be >= 1");
  if (ffn_dim == 0) problems.push_back("ffn_dim must be positive");
  if (vocab_size <= kSpecialTokens) problems.push_back("vocab_size must exceed the 3 special ids");
  if (!(layer_norm_eps > 0.0)) problems.push_back("layer_norm_eps must be positive");
  if (problems.empty()) return;
  std::string msg = "invalid encoder config:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw ConfigError(msg);
}

namespace {

Tensor normal_tensor(std::vector<std::size_t> shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape), 0.0);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data) v = dist(rng);
  return t;
}

Parameter weight(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return Parameter(name, normal_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng));
}

Parameter constant_param(const std::string& name, std::size_t n, double v) {
  return Parameter(name, Tensor({n}, v));
}

}  // namespace

EncoderState init_encoder(const EncoderConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  EncoderState s;
  s.config = config;
  const std::size_t d = config.d;
  s.token_embeddings =
      Parameter("token_embeddings", normal_tensor({config.vocab_size, d}, 0.5, rng));
  s.positional = Parameter("positional", normal_tensor({config.positional_rows(), d}, 0.1, rng));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    EncoderLayer layer{
        weight(p + "wq", d, d, rng),
        constant_param(p + "bq", d, 0.0),
        weight(p + "wk", d, d, rng),
        constant_param(p + "bk", d, 0.0),
        weight(p + "wv", d, d, rng),
        constant_param(p + "bv", d, 0.0),
        weight(p + "wo", d, d, rng),
        constant_param(p + "bo", d, 0.0),
        constant_param(p + "ln1_gamma", d, 1.0),
        constant_param(p + "ln1_beta", d, 0.0),
        weight(p + "w1", d, config.ffn_dim, rng),
        constant_param(p + "b1", config.ffn_dim, 0.0),
        weight(p + "w2", config.ffn_dim, d, rng),
        constant_param(p + "b2", d, 0.0),
        constant_param(p + "ln2_gamma", d, 1.0),
        constant_param(p + "ln2_beta", d, 0.0),
    };
    s.layers.push_back(std::move(layer));
  }
  s.final_gamma = constant_param("final_gamma", d, 1.0);
  s.final_beta = constant_param("final_beta", d, 0.0);
  return s;
}

namespace {

template <typename Self, typename Ptr>
std::vector<Ptr> collect(Self& s) {
  std::vector<Ptr> out{&s.token_embeddings, &s.positional};
  for (auto& l : s.layers) {
    for (auto* p : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ln1_gamma,
                    &l.ln1_beta, &l.w1, &l.b1, &l.w2, &l.b2, &l.ln2_gamma, &l.ln2_beta}) {
      out.push_back(p);
    }
  }
  out.push_back(&s.final_gamma);
  out.push_back(&s.final_beta);
  return out;
}

}  // namespace

std::vector<Parameter*> EncoderState::parameters() { return collect<EncoderState, Parameter*>(*this); }

std::vector<const Parameter*> EncoderState::parameters() const {
  return collect<const EncoderState, const Parameter*>(*this);
}

std::size_t EncoderState::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.numel();
  return n;
}

void freeze(EncoderState& state) {
  for (Parameter* p : state.parameters()) p->trainable = false;
  state.frozen = true;
}

void unfreeze(EncoderState& state) {
  for (Parameter* p : state.parameters()) p->trainable = true;
  state.frozen = false;
}

Var encode(Graph& g, const EncoderState& state, Var x_prime, const std::vector<bool>& mask) {
  const EncoderConfig& cfg = state.config;
  const std::size_t rows = x_prime.rows();
  if (rows > cfg.positional_rows()) {
    throw CapacityError("sequence of " + std::to_string(rows) +
                        " rows exceeds positional capacity " +
                        std::to_string(cfg.positional_rows()));
  }
  if (x_prime.cols() != cfg.d) {
    throw DimensionError("encode: input width " + std::to_string(x_prime.cols()) +
                         " but encoder d=" + std::to_string(cfg.d));
  }
  if (mask.size() != rows) {
    throw DimensionError("encode: mask of length " + std::to_string(mask.size()) + " for " +
                         std::to_string(rows) + " rows");
  }
  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const double eps = cfg.layer_norm_eps;

  Var x = add(x_prime, slice_rows(g.param(state.positional), 0, rows));
  std::vector<Var> heads(cfg.heads);
  for (const EncoderLayer& l : state.layers) {
    Var h = layer_norm(x, g.param(l.ln1_gamma), g.param(l.ln1_beta), eps);
    Var q = add_row(matmul(h, g.param(l.wq)), g.param(l.bq));
    Var k = add_row(matmul(h, g.param(l.wk)), g.param(l.bk));
    Var v = add_row(matmul(h, g.param(l.wv)), g.param(l.bv));
    for (std::size_t i = 0; i < cfg.heads; ++i) {
      Var qh = slice_cols(q, i * dh, dh);
      Var kh = slice_cols(k, i * dh, dh);
      Var vh = slice_cols(v, i * dh, dh);
      Var attn = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt_dh), mask);
      heads[i] = matmul(attn, vh);
    }
    Var merged = cfg.heads == 1 ? heads[0] : concat_cols(heads);
    x = add(x, add_row(matmul(merged, g.param(l.wo)), g.param(l.bo)));

    Var h2 = layer_norm(x, g.param(l.ln2_gamma), g.param(l.ln2_beta), eps);
    Var f = gelu(add_row(matmul(h2, g.param(l.w1)), g.param(l.b1)));
    x = add(x, add_row(matmul(f, g.param(l.w2)), g.param(l.b2)));
  }
  return layer_norm(x, g.param(state.final_gamma), g.param(state.final_beta), eps);
}

Tensor encode(const EncoderState& state, const Tensor& x_prime, const std::vector<bool>& mask) {
  Graph g;
  return encode(g, state, g.constant(x_prime), mask).value();
}

namespace {

std::vector<std::size_t> pooled_rows(std::size_t total_rows, ArticleSpan span,
                                     const std::vector<bool>& mask) {
  if (span.count == 0) throw ContractError("pool: empty article span");
  if (span.begin + span.count > total_rows) {
    throw ContractError("pool: span [" + std::to_string(span.begin) + ", " +
                        std::to_string(span.begin + span.count) + ") outside " +
                        std::to_string(total_rows) + " rows");
  }
  if (mask.size() != total_rows) {
    throw DimensionError("pool: mask length " + std::to_string(mask.size()) + " for " +
                         std::to_string(total_rows) + " rows");
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = span.begin; r < span.begin + span.count; ++r) {
    if (mask[r]) rows.push_back(r);
  }
  if (rows.empty()) throw ContractError("pool: article span holds only PAD positions");
  return rows;
}

}  // namespace

Var pool(Var h, ArticleSpan span, const std::vector<bool>& mask) {
  return mean_rows(h, pooled_rows(h.rows(), span, mask));
}

Tensor pool(const Tensor& h, ArticleSpan span, const std::vector<bool>& mask) {
  Graph g;
  return pool(g.constant(h), span, mask).value();
}

std::vector<double> pretrain_backbone(EncoderState& state,
                                      std::span<const std::vector<int>> corpus,
                                      const PretrainOptions& options) {
  if (state.frozen) throw ContractError("pretrain_backbone: encoder is frozen");
  if (!(options.mask_prob >= 0.0 && options.mask_prob <= 1.0)) {
    throw ConfigError("pretrain_backbone: mask_prob must lie in [0, 1]");
  }
  std::vector<double> losses;
  if (options.steps == 0 || corpus.empty()) return losses;

  const EncoderConfig& cfg = state.config;
  Parameter head_bias("mlm_bias", Tensor({1, cfg.vocab_size}, 0.0));
  std::vector<Parameter*> params = state.parameters();
  params.push_back(&head_bias);
  Adam adam(params, AdamOptions{options.lr});
  adam.zero_grad();

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  std::bernoulli_distribution masked(options.mask_prob);
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

  losses.reserve(options.steps);
  for (std::size_t step = 0; step < options.steps; ++step) {
    double step_loss = 0.0;
    bool any_target = false;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::vector<int>& seq = corpus[pick(rng)];
      std::vector<int> input;
      for (int id : seq) {
        if (id != kPadId) input.push_back(id);
      }
      if (input.size() > cfg.n_max) input.resize(cfg.n_max);
      if (input.empty()) continue;
      std::vector<std::size_t> positions;
      std::vector<int> targets;
      for (std::size_t i = 0; i < input.size(); ++i) {
        if (masked(rng)) {
          positions.push_back(i);
          targets.push_back(input[i]);
          input[i] = kMaskId;
        }
      }
      if (targets.empty()) continue;
      any_target = true;

      Graph g;
      Var table = g.param(state.token_embeddings);
      Var x = gather_rows(table, input);
      const std::vector<bool> mask(input.size(), true);
      Var h = encode(g, state, x, mask);
      std::vector<Var> picked;
      picked.reserve(positions.size());
      for (std::size_t p : positions) picked.push_back(slice_rows(h, p, 1));
      Var hp = concat_rows(picked);
      Var logits = add_row(matmul_nt(hp, table), g.param(head_bias));
      Var loss = scale(cross_entropy_rows(logits, targets), 1.0 / static_cast<double>(batch));
      step_loss += loss.value().data[0];
      g.backward(loss);
    }
    if (any_target) {
      adam.step();
      adam.zero_grad();
    }
    losses.push_back(step_loss);
  }
  return losses;
}

}  // namespace deld
