#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "deld/autograd.hpp"

namespace deld::testing {

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double stddev = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& v : t.data) v = normal(rng);
  return t;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). Central differences
// at h=1e-5 carry ~1e-11 of rounding, so structurally zero gradients (key
// biases under softmax shift invariance) need a floor well above that.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares the tape gradient of the scalar built by `build` against central
// differences for every element of every trainable parameter in `params`.
inline GradCheck check_gradients(const std::vector<Parameter*>& params,
                                 const std::function<Var(Graph&)>& build, double h = 1e-5) {
  for (Parameter* p : params) p->grad = Tensor(p->value.shape);
  {
    Graph g;
    g.backward(build(g));
  }
  auto eval = [&] {
    Graph g;
    return build(g).value().data[0];
  };
  GradCheck out;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      const double saved = p->value.data[i];
      p->value.data[i] = saved + h;
      const double up = eval();
      p->value.data[i] = saved - h;
      const double down = eval();
      p->value.data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double e = rel_error(analytic.data[i], numeric);
      if (std::getenv("DELD_GRADCHECK_TRACE") && e > 1e-5) {
        std::fprintf(stderr, "%s[%zu] analytic %.6e numeric %.6e\n", p->name.c_str(), i, analytic.data[i], numeric);
      }
      out.max_rel_error = std::max(out.max_rel_error, e);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace deld::testing
