#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "deld/corpus.hpp"
#include "deld/encoder.hpp"
#include "deld/error.hpp"
#include "deld/optim.hpp"
#include "deld/trainer.hpp"
#include "test_util.hpp"

using namespace deld;
using deld::testing::random_tensor;

namespace {

EncoderConfig tiny(std::size_t d = 8, std::size_t layers = 2, std::size_t heads = 2) {
  EncoderConfig c;
  c.d = d;
  c.layers = layers;
  c.heads = heads;
  c.ffn_dim = 2 * d;
  c.vocab_size = 50;
  c.n_max = 16;
  c.prompt_capacity = 8;
  return c;
}

bool states_identical(const EncoderState& a, const EncoderState& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!bit_identical(pa[i]->value, pb[i]->value)) return false;
  }
  return true;
}

}  // namespace

TEST(EncoderConfig, HeadDim) {
  EXPECT_EQ(tiny(8, 1, 2).head_dim(), 4u);
}

TEST(EncoderConfig, IndivisibleWidthRejected) {
  EXPECT_THROW(init_encoder(tiny(7, 1, 2)), ConfigError);
  EncoderConfig c = tiny();
  c.layers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.n_max = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(EncoderConfig, DefaultsMatchDeskScale) {
  const EncoderConfig c;
  EXPECT_EQ(c.d, 64u);
  EXPECT_EQ(c.layers, 4u);
  EXPECT_EQ(c.heads, 4u);
  EXPECT_EQ(c.ffn_dim, 128u);
  EXPECT_EQ(c.n_max, 128u);
  EXPECT_EQ(c.positional_rows(), 128u + 160u);
}

TEST(InitEncoder, SameSeedBitIdentical) {
  const EncoderState a = init_encoder(tiny());
  const EncoderState b = init_encoder(tiny());
  EXPECT_TRUE(states_identical(a, b));
  EXPECT_FALSE(a.frozen);
  EncoderConfig other = tiny();
  other.seed += 1;
  EXPECT_FALSE(states_identical(a, init_encoder(other)));
}

TEST(InitEncoder, ShapesFollowConfig) {
  const EncoderConfig c = tiny();
  const EncoderState s = init_encoder(c);
  EXPECT_EQ(s.token_embeddings.value.shape, (std::vector<std::size_t>{50, 8}));
  EXPECT_EQ(s.positional.value.shape, (std::vector<std::size_t>{24, 8}));
  ASSERT_EQ(s.layers.size(), 2u);
  EXPECT_EQ(s.layers[0].w1.value.shape, (std::vector<std::size_t>{8, 16}));
  EXPECT_EQ(s.layers[0].w2.value.shape, (std::vector<std::size_t>{16, 8}));
  for (const Parameter* p : s.parameters()) EXPECT_EQ(p->grad.shape, p->value.shape) << p->name;
}

TEST(Encode, ShapeIsKmPlusN) {
  EncoderConfig c = tiny();
  c.n_max = 10;
  const EncoderState s = init_encoder(c);
  std::mt19937_64 rng(1);
  const std::size_t rows = 2 * 4 + 10;
  const Tensor h = encode(s, random_tensor({rows, c.d}, rng), std::vector<bool>(rows, true));
  EXPECT_EQ(h.shape, (std::vector<std::size_t>{18, 8}));
  EXPECT_TRUE(h.all_finite());
}

TEST(Encode, CapacityErrorNamesLimit) {
  const EncoderState s = init_encoder(tiny());
  const std::size_t rows = 25;
  try {
    encode(s, Tensor({rows, 8}), std::vector<bool>(rows, true));
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("24"), std::string::npos) << e.what();
  }
}

TEST(Encode, PadRowsHaveNoInfluence) {
  const EncoderState s = init_encoder(tiny());
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({6, 8}, rng);
  const std::vector<bool> mask{false, true, false, false, false, false};
  const Tensor h1 = encode(s, x, mask);
  for (std::size_t r : {0u, 2u, 3u, 4u, 5u}) {
    for (double& v : x.row(r)) v = 100.0 * v + 3.0;
  }
  const Tensor h2 = encode(s, x, mask);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(h1(1, c), h2(1, c));
}

TEST(Encode, FrozenForwardIsPure) {
  EncoderState s = init_encoder(tiny());
  freeze(s);
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({5, 8}, rng);
  const std::vector<bool> mask(5, true);
  EXPECT_TRUE(bit_identical(encode(s, x, mask), encode(s, x, mask)));
}

TEST(Encode, GraphAndTensorPathsAgree) {
  const EncoderState s = init_encoder(tiny());
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({7, 8}, rng);
  const std::vector<bool> mask{true, true, true, false, true, true, false};
  Graph g;
  const Var h = encode(g, s, g.constant(x), mask);
  EXPECT_TRUE(bit_identical(h.value(), encode(s, x, mask)));
}

TEST(Encode, FullGraphGradientsMatchFiniteDifferences) {
  EncoderConfig c = tiny();
  EncoderState s = init_encoder(c);
  std::mt19937_64 rng(5);
  Parameter prompt("prompt", random_tensor({2, 8}, rng, 0.5));
  const std::vector<int> ids{5, 9, 13, 21, 0, 0};
  const std::vector<bool> mask{true, true, true, true, true, true, false, false};
  auto build = [&](Graph& g) {
    const Var emb = gather_rows(g.param(s.token_embeddings), ids);
    const Var parts[] = {g.param(prompt), emb};
    const Var x = concat_rows(parts);
    const Var h = encode(g, s, x, mask);
    const Var pooled = pool(h, ArticleSpan{2, 6}, mask);
    return sum(matmul_nt(pooled, pooled));
  };
  std::vector<Parameter*> params = s.parameters();
  params.push_back(&prompt);
  const auto r = deld::testing::check_gradients(params, build);
  EXPECT_GT(r.checked, 500u);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Pool, SingleRowSpan) {
  std::mt19937_64 rng(6);
  const Tensor h = random_tensor({4, 3}, rng);
  const Tensor p = pool(h, ArticleSpan{2, 1}, std::vector<bool>(4, true));
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(p.data[c], h(2, c));
}

TEST(Pool, IdenticalRowsGiveThatRow) {
  const Tensor h = Tensor::matrix({{1.25, -2.5}, {1.25, -2.5}});
  const Tensor p = pool(h, ArticleSpan{0, 2}, std::vector<bool>(2, true));
  EXPECT_EQ(p.data[0], 1.25);
  EXPECT_EQ(p.data[1], -2.5);
}

TEST(Pool, MeanOverRealRows) {
  std::mt19937_64 rng(7);
  const Tensor h = random_tensor({6, 5}, rng);
  const std::vector<bool> mask{true, true, true, true, false, true};
  const Tensor p = pool(h, ArticleSpan{1, 5}, mask);
  for (std::size_t c = 0; c < 5; ++c) {
    const double expected = (h(1, c) + h(2, c) + h(3, c) + h(5, c)) / 4.0;
    EXPECT_NEAR(p.data[c], expected, 1e-12);
  }
}

TEST(Pool, EmptyOrAllPadSpanIsContractError) {
  const Tensor h({3, 2}, 1.0);
  EXPECT_THROW(pool(h, ArticleSpan{0, 0}, std::vector<bool>(3, true)), ContractError);
  EXPECT_THROW(pool(h, ArticleSpan{1, 2}, {true, false, false}), ContractError);
  EXPECT_THROW(pool(h, ArticleSpan{2, 2}, std::vector<bool>(3, true)), ContractError);
}

namespace {

std::vector<std::vector<int>> small_corpus(EncoderConfig& c) {
  SynthSpec spec = conflict_preset(3, 0.04);
  const auto data = synth_generate(spec);
  const Vocabulary vocab = Vocabulary::build(data, 400);
  c.vocab_size = 400;
  c.n_max = 24;
  std::vector<std::vector<int>> corpus;
  for (const auto& d : data) {
    for (const auto& e : d.examples) corpus.push_back(encode_example(e, vocab, c.n_max).ids);
  }
  return corpus;
}

}  // namespace

TEST(Pretrain, ZeroStepsLeavesStateUnchanged) {
  EncoderConfig c = tiny(16, 1, 2);
  const auto corpus = small_corpus(c);
  EncoderState s = init_encoder(c);
  const EncoderState before = s;
  const auto losses = pretrain_backbone(s, corpus, PretrainOptions{0, 0.15, 8, 1e-3, 1});
  EXPECT_TRUE(losses.empty());
  EXPECT_TRUE(states_identical(s, before));
}

TEST(Pretrain, LossDecreases) {
  EncoderConfig c = tiny(16, 1, 2);
  const auto corpus = small_corpus(c);
  EncoderState s = init_encoder(c);
  const auto losses = pretrain_backbone(s, corpus, PretrainOptions{500, 0.15, 8, 1e-3, 1});
  ASSERT_EQ(losses.size(), 500u);
  const double first = std::accumulate(losses.begin(), losses.begin() + 50, 0.0) / 50.0;
  const double last = std::accumulate(losses.end() - 50, losses.end(), 0.0) / 50.0;
  EXPECT_LT(last, first);
  EXPECT_FALSE(s.frozen);
}

TEST(Pretrain, NoMaskingMeansNoSignal) {
  EncoderConfig c = tiny(16, 1, 2);
  const auto corpus = small_corpus(c);
  EncoderState s = init_encoder(c);
  const EncoderState before = s;
  const auto losses = pretrain_backbone(s, corpus, PretrainOptions{20, 0.0, 8, 1e-3, 1});
  ASSERT_EQ(losses.size(), 20u);
  for (double l : losses) EXPECT_EQ(l, losses.front());
  EXPECT_TRUE(states_identical(s, before));
}

TEST(Pretrain, FrozenStateRejected) {
  EncoderConfig c = tiny(16, 1, 2);
  const auto corpus = small_corpus(c);
  EncoderState s = init_encoder(c);
  freeze(s);
  EXPECT_THROW(pretrain_backbone(s, corpus, PretrainOptions{}), ContractError);
}

TEST(Freeze, BlocksAdamAndIsIdempotent) {
  EncoderState s = init_encoder(tiny());
  freeze(s);
  freeze(s);
  EXPECT_TRUE(s.frozen);
  const EncoderState before = s;
  for (Parameter* p : s.parameters()) {
    EXPECT_FALSE(p->trainable);
    p->grad.fill(1.0);
  }
  Adam opt(s.parameters());
  opt.step();
  EXPECT_TRUE(states_identical(s, before));
  unfreeze(s);
  EXPECT_FALSE(s.frozen);
  for (const Parameter* p : s.parameters()) EXPECT_TRUE(p->trainable);
}
