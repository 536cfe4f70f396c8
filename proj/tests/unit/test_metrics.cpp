#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "deld/error.hpp"
#include "deld/metrics.hpp"

using namespace deld;

namespace {

AccuracyMatrix two_by_two(double a11, double a12, double a22 = 50.0) {
  AccuracyMatrix m(2);
  m.set(0, 0, a11);
  m.set(0, 1, a12);
  m.set(1, 1, a22);
  return m;
}

AccuracyMatrix random_complete(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(20.0, 80.0);
  AccuracyMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i; k < n; ++k) m.set(i, k, u(rng));
  }
  return m;
}

}  // namespace

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy({1, 0, 1}, {1, 0, 1}), 100.0);
  EXPECT_EQ(accuracy({1, 0}, {0, 1}), 0.0);
  EXPECT_EQ(accuracy({1, 1, 0, 0}, {1, 1, 0, 1}), 75.0);
}

TEST(Accuracy, EmptyOrUnequalIsContractError) {
  EXPECT_THROW(accuracy({}, {}), ContractError);
  EXPECT_THROW(accuracy({1}, {1, 0}), ContractError);
}

TEST(Accuracy, PermutationInvariant) {
  std::mt19937_64 rng(1);
  std::vector<int> p(50), l(50);
  for (auto& v : p) v = static_cast<int>(rng() % 2);
  for (auto& v : l) v = static_cast<int>(rng() % 2);
  const double base = accuracy(p, l);
  std::vector<std::size_t> idx(50);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> p2, l2;
  for (auto i : idx) {
    p2.push_back(p[i]);
    l2.push_back(l[i]);
  }
  EXPECT_EQ(accuracy(p2, l2), base);
}

TEST(Forgetting, HandMatrices) {
  EXPECT_EQ(forgetting(two_by_two(90, 80)), 10.0);
  EXPECT_EQ(forgetting(two_by_two(70, 85)), -15.0);
  AccuracyMatrix constant(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = i; k < 4; ++k) constant.set(i, k, 63.5);
  }
  EXPECT_EQ(forgetting(constant), 0.0);
}

TEST(Forgetting, MaxExcludesFinalStage) {
  // Row 0 peaks at stage 1; its stage-2 entry is the final value.
  AccuracyMatrix m(3);
  m.set(0, 0, 60);
  m.set(0, 1, 90);
  m.set(0, 2, 70);
  m.set(1, 1, 80);
  m.set(1, 2, 80);
  m.set(2, 2, 10);
  EXPECT_DOUBLE_EQ(forgetting(m), ((90.0 - 70.0) + (80.0 - 80.0)) / 2.0);
  EXPECT_EQ(forgetting_per_dataset(m), (std::vector<double>{20.0, 0.0}));
}

TEST(Forgetting, ShiftInvariant) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const AccuracyMatrix m = random_complete(4, rng);
    EXPECT_NEAR(forgetting(m.shifted(7.25)), forgetting(m), 1e-12);
  }
}

TEST(Forgetting, Preconditions) {
  AccuracyMatrix one(1);
  one.set(0, 0, 50);
  EXPECT_THROW(forgetting(one), ContractError);
  AccuracyMatrix partial(2);
  partial.set(0, 0, 50);
  EXPECT_THROW(forgetting(partial), ContractError);
}

TEST(AccuracyMatrix, Bookkeeping) {
  AccuracyMatrix m(3);
  EXPECT_FALSE(m.complete());
  EXPECT_THROW(m.set(0, 0, 101.0), ContractError);
  EXPECT_THROW(m.set(3, 0, 50.0), ContractError);
  std::mt19937_64 rng(3);
  const AccuracyMatrix r = random_complete(3, rng);
  EXPECT_TRUE(r.complete());
  EXPECT_FALSE(r.get(1, 0).has_value());
  EXPECT_THROW(r.at(1, 0), ContractError);
  const auto row = r.final_row();
  EXPECT_EQ(row.size(), 3u);
  EXPECT_EQ(row[1], r.at(1, 2));
  EXPECT_NEAR(r.final_average(), (row[0] + row[1] + row[2]) / 3.0, 1e-12);
}

TEST(AccuracyMatrix, AverageElementwise) {
  const AccuracyMatrix a = two_by_two(90, 80, 60), b = two_by_two(70, 60, 40);
  const AccuracyMatrix m = average({a, b});
  EXPECT_EQ(m.at(0, 0), 80.0);
  EXPECT_EQ(m.at(0, 1), 70.0);
  EXPECT_EQ(m.at(1, 1), 50.0);
}

TEST(OrderRobustness, IdenticalOrdersZeroSpread) {
  std::vector<OrderResult> rs;
  for (const char* name : {"Order-1", "Order-2", "Order-3"}) rs.push_back({name, {"a", "b"}, {60.0, 70.0}});
  const OrderRobustness o = order_robustness(rs);
  EXPECT_EQ(o.spread, 0.0);
  EXPECT_EQ(o.order_names, (std::vector<std::string>{"Order-1", "Order-2", "Order-3"}));
  EXPECT_EQ(o.averages, (std::vector<double>{65.0, 65.0, 65.0}));
}

TEST(OrderRobustness, SpreadIsMaxMinusMin) {
  const OrderRobustness o = order_robustness({{"x", {}, {50.0, 60.0}}, {"y", {}, {80.0, 90.0}}, {"z", {}, {70.0}}});
  EXPECT_EQ(o.order_names, (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(o.spread, 85.0 - 55.0);
  EXPECT_THROW(order_robustness({{"x", {}, {50.0}}}), ContractError);
}

TEST(ExperimentReport, AverageAndJson) {
  ExperimentReport r;
  r.regime = "deld-seq";
  r.datasets = {"a", "b", "c"};
  r.accuracies = {70.0, 80.0, 95.5};
  r.fgt = 3.25;
  r.seed = 9;
  EXPECT_NEAR(r.average(), (70.0 + 80.0 + 95.5) / 3.0, 1e-9);
  EXPECT_EQ(r.label(), "FT-Seq w/ DELD");
  const auto j = r.to_json();
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["fgt"], 3.25);
  EXPECT_TRUE(j.contains("wall_clock_seconds"));
  ExperimentReport ft;
  ft.regime = "ft-all";
  ft.with_deld = false;
  EXPECT_EQ(ft.label(), "FT-All");
}

TEST(Render, AblationTableLayout) {
  std::vector<AblationCell> cells;
  for (std::size_t len : {4, 8, 12, 16, 20}) {
    cells.push_back({len, "prepend", 50.0 + static_cast<double>(len), std::nullopt});
    cells.push_back({len, "append", 40.0 + static_cast<double>(len), std::nullopt});
  }
  const std::string t = render_ablation_table(cells);
  EXPECT_NE(t.find("Prompt Length"), std::string::npos);
  EXPECT_NE(t.find("Prepend"), std::string::npos);
  EXPECT_NE(t.find("Append"), std::string::npos);
  EXPECT_NE(t.find("62.00"), std::string::npos);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n') >= 6, true);
}

TEST(Render, MatrixAndCsv) {
  const AccuracyMatrix m = two_by_two(90, 80, 60);
  const std::string t = render_matrix(m, {"human", "vicuna"});
  EXPECT_NE(t.find("human"), std::string::npos);
  EXPECT_NE(t.find("90.00"), std::string::npos);
  EXPECT_EQ(forgetting_csv(m, {"human", "vicuna"}), "dataset,fgt\nhuman,10\naverage,10\n");
}
