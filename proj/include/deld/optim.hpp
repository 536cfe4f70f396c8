#pragma once

#include <cstddef>
#include <vector>

#include "deld/tensor.hpp"

namespace deld {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias-corrected moments. The optimizer binds to an ordered list of
// parameters at construction; step() reads their gradients and updates the
// trainable ones in place. Frozen parameters are skipped entirely, so their
// values stay bit-identical no matter what their grad buffers hold.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options = {});

  void step();
  void zero_grad();

  std::size_t steps_taken() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  std::size_t t_ = 0;
};

}  // namespace deld
