#include "deld/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "deld/error.hpp"

namespace deld {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty() || labels.empty()) throw ContractError("accuracy: empty input");
  if (predictions.size() != labels.size()) {
    throw ContractError("accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

AccuracyMatrix::AccuracyMatrix(std::size_t datasets) : n_(datasets), cells_(datasets * datasets) {}

void AccuracyMatrix::set(std::size_t dataset, std::size_t stage, double value) {
  if (dataset >= n_ || stage >= n_) throw ContractError("AccuracyMatrix: index out of range");
  if (!(value >= 0.0 && value <= 100.0)) {
    throw ContractError("AccuracyMatrix: accuracy " + std::to_string(value) + " outside [0,100]");
  }
  cells_[dataset * n_ + stage] = value;
}

std::optional<double> AccuracyMatrix::get(std::size_t dataset, std::size_t stage) const {
  if (dataset >= n_ || stage >= n_) return std::nullopt;
  return cells_[dataset * n_ + stage];
}

double AccuracyMatrix::at(std::size_t dataset, std::size_t stage) const {
  const auto v = get(dataset, stage);
  if (!v) {
    throw ContractError("AccuracyMatrix: a(" + std::to_string(dataset + 1) + "," +
                        std::to_string(stage + 1) + ") is undefined");
  }
  return *v;
}

bool AccuracyMatrix::complete() const {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = i; k < n_; ++k) {
      if (!cells_[i * n_ + k]) return false;
    }
  }
  return true;
}

std::vector<double> AccuracyMatrix::final_row() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < n_; ++i) out.push_back(at(i, n_ - 1));
  return out;
}

double AccuracyMatrix::final_average() const {
  const auto row = final_row();
  if (row.empty()) throw ContractError("AccuracyMatrix: empty");
  return std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
}

AccuracyMatrix AccuracyMatrix::shifted(double delta) const {
  AccuracyMatrix out = *this;
  for (auto& c : out.cells_) {
    if (c) *c += delta;
  }
  return out;
}

nlohmann::ordered_json AccuracyMatrix::to_json() const {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < n_; ++i) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < n_; ++k) {
      const auto& c = cells_[i * n_ + k];
      row.push_back(c ? nlohmann::ordered_json(*c) : nlohmann::ordered_json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

void require_forgetting_input(const AccuracyMatrix& m) {
  if (m.size() < 2) throw ContractError("forgetting: need at least two datasets");
  if (!m.complete()) throw ContractError("forgetting: accuracy matrix is incomplete");
}

}  // namespace

std::vector<double> forgetting_per_dataset(const AccuracyMatrix& m) {
  require_forgetting_input(m);
  const std::size_t last = m.size() - 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < last; ++i) {
    double best = m.at(i, i);
    for (std::size_t k = i + 1; k < last; ++k) best = std::max(best, m.at(i, k));
    out.push_back(best - m.at(i, last));
  }
  return out;
}

double forgetting(const AccuracyMatrix& m) {
  const auto terms = forgetting_per_dataset(m);
  return std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(terms.size());
}

AccuracyMatrix average(const std::vector<AccuracyMatrix>& matrices) {
  if (matrices.empty()) throw ContractError("average: no matrices");
  const std::size_t n = matrices.front().size();
  AccuracyMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double total = 0.0;
      std::size_t count = 0;
      for (const auto& m : matrices) {
        if (m.size() != n) throw ContractError("average: matrices differ in size");
        if (auto v = m.get(i, k)) {
          total += *v;
          ++count;
        }
      }
      if (count == matrices.size()) out.set(i, k, total / static_cast<double>(count));
    }
  }
  return out;
}

OrderRobustness order_robustness(const std::vector<OrderResult>& results) {
  if (results.size() < 2) throw ContractError("order_robustness: need at least two orders");
  OrderRobustness out;
  for (const auto& r : results) {
    if (r.final_accuracies.empty()) {
      throw ContractError("order_robustness: order '" + r.order_name + "' has no accuracies");
    }
    out.order_names.push_back(r.order_name);
    out.averages.push_back(std::accumulate(r.final_accuracies.begin(), r.final_accuracies.end(), 0.0) /
                           static_cast<double>(r.final_accuracies.size()));
  }
  const auto [lo, hi] = std::minmax_element(out.averages.begin(), out.averages.end());
  out.spread = *hi - *lo;
  return out;
}

double ExperimentReport::average() const {
  if (accuracies.empty()) return 0.0;
  return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
         static_cast<double>(accuracies.size());
}

std::string ExperimentReport::label() const {
  std::string name;
  if (regime == "deld-seq" || regime == "ft-seq") {
    name = "FT-Seq";
  } else if (regime == "ft-all") {
    name = "FT-All";
  } else if (regime == "ft-per") {
    name = "FT-Per";
  } else if (regime == "zero-shot") {
    return model_name.empty() ? "Zero-Shot" : model_name;
  } else {
    name = regime;
  }
  return with_deld || regime == "deld-seq" ? name + " w/ DELD" : name;
}

nlohmann::ordered_json ExperimentReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["regime"] = regime;
  j["with_deld"] = with_deld;
  j["label"] = label();
  if (!model_name.empty()) j["model"] = model_name;
  j["seed"] = seed;
  j["datasets"] = datasets;
  j["accuracies"] = accuracies;
  j["average_accuracy"] = average();
  j["fgt"] = fgt ? nlohmann::ordered_json(*fgt) : nlohmann::ordered_json(nullptr);
  if (matrix) j["accuracy_matrix"] = matrix->to_json();
  j["config"] = config;
  j["logs"] = logs;
  j["wall_clock_seconds"] = wall_clock_seconds;
  return j;
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Renders rows of cells with every column padded to its widest entry; the
// first column is left-aligned, the rest right-aligned.
std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    const auto& r = rows[ri];
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) os << "  ";
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << r[c];
      }
    }
    os << '\n';
    if (ri == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace

std::string render_accuracy_table(const std::vector<ExperimentReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Method"};
  if (!reports.empty()) {
    for (const auto& d : reports.front().datasets) header.push_back("D_" + d);
  }
  header.push_back("Average");
  header.push_back("Fgt");
  rows.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.label()};
    for (double a : r.accuracies) row.push_back(fmt2(a));
    row.push_back(fmt2(r.average()));
    row.push_back(r.fgt ? fmt2(*r.fgt) : "-");
    rows.push_back(std::move(row));
  }
  return render_grid(rows);
}

std::string render_matrix(const AccuracyMatrix& matrix, const std::vector<std::string>& names) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"a(i,k)"};
  for (std::size_t k = 0; k < matrix.size(); ++k) header.push_back("after " + std::to_string(k + 1));
  rows.push_back(header);
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    std::vector<std::string> row{i < names.size() ? "D_" + names[i] : std::to_string(i + 1)};
    for (std::size_t k = 0; k < matrix.size(); ++k) {
      const auto v = matrix.get(i, k);
      row.push_back(v ? fmt2(*v) : "-");
    }
    rows.push_back(std::move(row));
  }
  return render_grid(rows);
}

std::string render_ablation_table(const std::vector<AblationCell>& cells) {
  std::vector<std::size_t> lengths;
  for (const auto& c : cells) {
    if (std::find(lengths.begin(), lengths.end(), c.prompt_len) == lengths.end()) {
      lengths.push_back(c.prompt_len);
    }
  }
  std::vector<std::vector<std::string>> rows{{"Prompt Length", "Prepend", "Append"}};
  for (std::size_t len : lengths) {
    std::vector<std::string> row{std::to_string(len), "-", "-"};
    for (const auto& c : cells) {
      if (c.prompt_len != len) continue;
      row[c.position == "prepend" ? 1 : 2] = fmt2(c.average_accuracy);
    }
    rows.push_back(std::move(row));
  }
  return render_grid(rows);
}

std::string render_order_table(const std::vector<std::string>& regimes,
                               const std::vector<OrderRobustness>& rows_in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Method"};
  if (!rows_in.empty()) {
    for (const auto& n : rows_in.front().order_names) header.push_back(n);
  }
  header.push_back("Spread");
  rows.push_back(header);
  for (std::size_t i = 0; i < rows_in.size(); ++i) {
    std::vector<std::string> row{i < regimes.size() ? regimes[i] : "?"};
    for (double a : rows_in[i].averages) row.push_back(fmt2(a));
    row.push_back(fmt2(rows_in[i].spread));
    rows.push_back(std::move(row));
  }
  return render_grid(rows);
}

std::string forgetting_csv(const AccuracyMatrix& matrix, const std::vector<std::string>& names) {
  const auto terms = forgetting_per_dataset(matrix);
  std::ostringstream os;
  os << "dataset,fgt\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    os << (i < names.size() ? names[i] : std::to_string(i + 1)) << ',' << terms[i] << '\n';
  }
  os << "average," << forgetting(matrix) << '\n';
  return os.str();
}

}  // namespace deld
