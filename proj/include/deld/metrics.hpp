#pragma once

// Accuracy bookkeeping, the forgetting metric and report rendering.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace deld {

// 100 * matches / total. Throws ContractError on empty or unequal inputs.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// a(i, k): accuracy (%) on dataset i after training stage k, both 0-based,
// defined for k >= i once a sequential run completes.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t datasets);

  std::size_t size() const { return n_; }
  void set(std::size_t dataset, std::size_t stage, double value);
  std::optional<double> get(std::size_t dataset, std::size_t stage) const;
  double at(std::size_t dataset, std::size_t stage) const;  // throws when undefined

  // Every entry with stage >= dataset is defined.
  bool complete() const;

  // Accuracy on each dataset after the last stage.
  std::vector<double> final_row() const;
  double final_average() const;

  // Same matrix with `delta` added to every defined entry (no clamping).
  AccuracyMatrix shifted(double delta) const;

  nlohmann::ordered_json to_json() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::optional<double>> cells_;
};

// Fgt = 1/(|D|-1) * sum_{i<|D|} ( max_{i<=k<|D|} a(i,k) - a(i,|D|) ), with
// 1-based indices as usual. Negative values mean later training helped.
// Throws ContractError for |D| < 2 or an incomplete matrix.
double forgetting(const AccuracyMatrix& matrix);

// Per-dataset terms of forgetting(); entry i is dataset i's contribution
// (the last dataset has none).
std::vector<double> forgetting_per_dataset(const AccuracyMatrix& matrix);

// Elementwise mean of equally sized matrices (used across split repeats).
AccuracyMatrix average(const std::vector<AccuracyMatrix>& matrices);

struct OrderResult {
  std::string order_name;
  std::vector<std::string> datasets;  // training order
  std::vector<double> final_accuracies;
};

struct OrderRobustness {
  std::vector<std::string> order_names;  // input order
  std::vector<double> averages;
  double spread = 0.0;  // max - min of averages
};

// Throws ContractError with fewer than two orders.
OrderRobustness order_robustness(const std::vector<OrderResult>& results);

struct ExperimentReport {
  static constexpr int kSchemaVersion = 1;

  std::string regime;
  bool with_deld = false;
  std::string model_name;  // zero-shot reports only
  std::vector<std::string> datasets;
  std::vector<double> accuracies;  // final accuracy per dataset
  std::optional<double> fgt;
  std::optional<AccuracyMatrix> matrix;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json logs = nlohmann::ordered_json::array();
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;

  double average() const;
  std::string label() const;  // e.g. "FT-Seq w/ DELD"
  nlohmann::ordered_json to_json() const;
};

// Aligned plain-text tables in the layouts of the results tables.
std::string render_accuracy_table(const std::vector<ExperimentReport>& reports);
std::string render_matrix(const AccuracyMatrix& matrix, const std::vector<std::string>& names);

struct AblationCell {
  std::size_t prompt_len = 0;
  std::string position;
  double average_accuracy = 0.0;
  std::optional<double> fgt;
};

std::string render_ablation_table(const std::vector<AblationCell>& cells);
std::string render_order_table(const std::vector<std::string>& regimes,
                               const std::vector<OrderRobustness>& rows);

// dataset,fgt rows for bar charts of per-dataset forgetting.
std::string forgetting_csv(const AccuracyMatrix& matrix, const std::vector<std::string>& names);

}  // namespace deld
