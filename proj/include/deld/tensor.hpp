#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace deld {

// Dense row-major array of doubles. Everything the model touches is a matrix;
// one-dimensional tensors (layer-norm affines, biases) are viewed as a single
// row by rows()/cols().
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::vector<double> values);

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols(), cols()};
  }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// True when both tensors have the same shape and identical bit patterns.
bool bit_identical(const Tensor& a, const Tensor& b);

// A named tensor with a gradient buffer. `grad` is mutable because the
// autograd tape accumulates into it while the model holding the parameter is
// only read during the forward pass.
struct Parameter {
  std::string name;
  Tensor value;
  mutable Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string name, Tensor value, bool trainable = true);

  void zero_grad() const { grad.fill(0.0); }
};

}  // namespace deld
