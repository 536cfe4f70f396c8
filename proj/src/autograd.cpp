#include "deld/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "deld/error.hpp"
#include "deld/simd.hpp"

namespace deld {

const Tensor& Var::value() const { return graph_->value(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

Var Graph::constant(Tensor value) {
  Node node;
  node.owned = std::make_unique<Tensor>(std::move(value));
  node.value = node.owned.get();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(const Parameter& p) {
  Node node;
  node.value = &p.value;
  node.requires_grad = p.trainable;
  node.param = p.trainable ? &p : nullptr;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.graph_ != this) throw ContractError("op mixes Vars from different graphs");
    needs = needs || nodes_[in.id_].requires_grad;
  }
  Node node;
  node.owned = std::make_unique<Tensor>(std::move(value));
  node.value = node.owned.get();
  node.requires_grad = needs;
  if (needs) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad(Var v) {
  Node& n = nodes_[v.id_];
  if (n.grad.data.empty() && !n.value->data.empty()) n.grad = Tensor(n.value->shape, 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw ContractError("backward: loss belongs to another graph");
  if (nodes_[loss.id_].value->numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_string(nodes_[loss.id_].value->shape));
  }
  if (differentiated_) throw ContractError("backward: graph already differentiated");
  differentiated_ = true;
  if (!nodes_[loss.id_].requires_grad) return;

  grad(loss).fill(1.0);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.data.empty()) continue;
    if (node.param != nullptr) {
      const Parameter& p = *node.param;
      if (p.grad.shape != p.value.shape) p.grad = Tensor(p.value.shape, 0.0);
      simd::kernels().axpy(node.grad.numel(), 1.0, node.grad.data.data(), p.grad.data.data());
    } else if (node.backward) {
      node.backward(*this, node.grad);
    }
  }
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape) +
                         " vs " + shape_string(b.shape));
  }
}

Tensor zeros(std::size_t r, std::size_t c) { return Tensor({r, c}, 0.0); }

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(av.shape) +
                         " * " + shape_string(bv.shape));
  }
  const std::size_t r = av.rows(), s = av.cols(), t = bv.cols();
  Tensor out = zeros(r, t);
  simd::kernels().gemm_nn(r, s, t, av.data.data(), bv.data.data(), out.data.data());
  const Var in[] = {a, b};
  return a.graph().record(std::move(out), in, [a, b, r, s, t](Graph& g, const Tensor& dc) {
    const auto& k = simd::kernels();
    if (g.requires_grad(a)) {
      k.gemm_nt(r, t, s, dc.data.data(), g.value(b).data.data(), g.grad(a).data.data());
    }
    if (g.requires_grad(b)) {
      k.gemm_tn(r, s, t, g.value(a).data.data(), dc.data.data(), g.grad(b).data.data());
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(av.shape) +
                         " * " + shape_string(bv.shape) + "^T");
  }
  const std::size_t r = av.rows(), s = av.cols(), t = bv.rows();
  Tensor out = zeros(r, t);
  simd::kernels().gemm_nt(r, s, t, av.data.data(), bv.data.data(), out.data.data());
  const Var in[] = {a, b};
  return a.graph().record(std::move(out), in, [a, b, r, s, t](Graph& g, const Tensor& dc) {
    const auto& k = simd::kernels();
    if (g.requires_grad(a)) {
      k.gemm_nn(r, t, s, dc.data.data(), g.value(b).data.data(), g.grad(a).data.data());
    }
    if (g.requires_grad(b)) {
      k.gemm_tn(r, t, s, dc.data.data(), g.value(a).data.data(), g.grad(b).data.data());
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += bv.data[i];
  const Var in[] = {a, b};
  return a.graph().record(std::move(out), in, [a, b](Graph& g, const Tensor& dc) {
    for (Var v : {a, b}) {
      if (!g.requires_grad(v)) continue;
      Tensor& gv = g.grad(v);
      for (std::size_t i = 0; i < gv.numel(); ++i) gv.data[i] += dc.data[i];
    }
  });
}

Var add_row(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.numel() != xv.cols()) {
    throw DimensionError("add_row: bias " + shape_string(bv.shape) + " vs input " +
                         shape_string(xv.shape));
  }
  Tensor out = xv;
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += bv.data[j];
  }
  const Var in[] = {x, bias};
  return x.graph().record(std::move(out), in, [x, bias, r, c](Graph& g, const Tensor& dc) {
    if (g.requires_grad(x)) {
      Tensor& gx = g.grad(x);
      for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += dc.data[i];
    }
    if (g.requires_grad(bias)) {
      Tensor& gb = g.grad(bias);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gb.data[j] += dc.data[i * c + j];
      }
    }
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data) v *= factor;
  const Var in[] = {x};
  return x.graph().record(std::move(out), in, [x, factor](Graph& g, const Tensor& dc) {
    simd::kernels().axpy(dc.numel(), factor, dc.data.data(), g.grad(x).data.data());
  });
}

namespace {

void softmax_row_inplace(std::span<double> row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    total += v;
  }
  const double inv = 1.0 / total;
  for (double& v : row) v *= inv;
}

// dx = y * (dy - <dy, y>) row by row. Rows of y that are all zero (masked
// queries) contribute nothing.
void softmax_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  const std::size_t r = y.rows(), c = y.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const double* yi = y.data.data() + i * c;
    const double* di = dy.data.data() + i * c;
    double inner = 0.0;
    for (std::size_t j = 0; j < c; ++j) inner += yi[j] * di[j];
    double* out = dx.data.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) out[j] += yi[j] * (di[j] - inner);
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
  Tensor out = x;
  if (out.cols() == 0) return out;
  for (std::size_t i = 0; i < out.rows(); ++i) softmax_row_inplace(out.row(i));
  return out;
}

Var softmax_rows(Var x) {
  Tensor out = softmax_rows(x.value());
  const Var in[] = {x};
  if (!x.requires_grad()) return x.graph().record(std::move(out), in, {});
  auto saved = std::make_shared<Tensor>(out);
  return x.graph().record(std::move(out), in, [x, saved](Graph& g, const Tensor& dc) {
    softmax_backward(*saved, dc, g.grad(x));
  });
}

Var softmax_rows(Var x, const std::vector<bool>& mask) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (r != c || mask.size() != c) {
    throw DimensionError("masked softmax_rows: scores " + shape_string(xv.shape) +
                         " vs mask of length " + std::to_string(mask.size()));
  }
  Tensor out({r, c}, 0.0);
  std::vector<double> buf;
  for (std::size_t i = 0; i < r; ++i) {
    if (!mask[i]) continue;
    buf.clear();
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[j]) buf.push_back(xv(i, j));
    }
    softmax_row_inplace(buf);
    std::size_t idx = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[j]) out(i, j) = buf[idx++];
    }
  }
  const Var in[] = {x};
  Graph& g = x.graph();
  if (!x.requires_grad()) return g.record(std::move(out), in, {});
  auto saved = std::make_shared<Tensor>(out);
  return g.record(std::move(out), in, [x, saved](Graph& gr, const Tensor& dc) {
    softmax_backward(*saved, dc, gr.grad(x));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), d = xv.cols();
  if (d == 0) throw DimensionError("layer_norm: zero-width input");
  if (gamma.value().numel() != d || beta.value().numel() != d) {
    throw DimensionError("layer_norm: affine parameters " + shape_string(gamma.value().shape) +
                         " / " + shape_string(beta.value().shape) + " vs input " +
                         shape_string(xv.shape));
  }
  auto xhat = std::make_shared<Tensor>(xv.shape, 0.0);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  Tensor out(xv.shape, 0.0);
  const double* gv = gamma.value().data.data();
  const double* bv = beta.value().data.data();
  for (std::size_t i = 0; i < r; ++i) {
    const auto row = xv.row(i);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * inv;
      (*xhat)(i, j) = h;
      out(i, j) = gv[j] * h + bv[j];
    }
  }
  const Var in[] = {x, gamma, beta};
  return x.graph().record(
      std::move(out), in, [x, gamma, beta, xhat, inv_std, r, d](Graph& g, const Tensor& dc) {
        if (g.requires_grad(gamma) || g.requires_grad(beta)) {
          const bool wg = g.requires_grad(gamma), wb = g.requires_grad(beta);
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
              const double dy = dc.data[i * d + j];
              if (wg) g.grad(gamma).data[j] += dy * (*xhat)(i, j);
              if (wb) g.grad(beta).data[j] += dy;
            }
          }
        }
        if (!g.requires_grad(x)) return;
        Tensor& gx = g.grad(x);
        const double* gv = g.value(gamma).data.data();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < r; ++i) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = dc.data[i * d + j] * gv[j];
            mean_dh += dh;
            mean_dh_h += dh * (*xhat)(i, j);
          }
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          const double inv = (*inv_std)[i];
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = dc.data[i * d + j] * gv[j];
            gx(i, j) += inv * (dh - mean_dh - (*xhat)(i, j) * mean_dh_h);
          }
        }
      });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

Var gelu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data) v = gelu(v);
  const Var in[] = {x};
  return x.graph().record(std::move(out), in, [x](Graph& g, const Tensor& dc) {
    const Tensor& xv = g.value(x);
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      const double v = xv.data[i];
      const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      gx.data[i] += dc.data[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
    }
  });
}

namespace {
double sigmoid_value(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.data) v = sigmoid_value(v);
  auto saved = std::make_shared<Tensor>(out);
  const Var in[] = {x};
  return x.graph().record(std::move(out), in, [x, saved](Graph& g, const Tensor& dc) {
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) {
      const double y = saved->data[i];
      gx.data[i] += dc.data[i] * y * (1.0 - y);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.cols() != c) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts[0].value().shape) +
                           " vs " + shape_string(p.value().shape));
    }
    total += p.rows();
  }
  Tensor out({total, c}, 0.0);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto& src = p.value().data;
    std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset * c));
    offset += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Graph& g = parts[0].graph();
  return g.record(std::move(out), parts, [inputs, c](Graph& gr, const Tensor& dc) {
    std::size_t off = 0;
    for (const Var& p : inputs) {
      const std::size_t n = gr.value(p).rows() * c;
      if (gr.requires_grad(p)) {
        simd::kernels().axpy(n, 1.0, dc.data.data() + off * c, gr.grad(p).data.data());
      }
      off += gr.value(p).rows();
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts[0].value().shape) +
                           " vs " + shape_string(p.value().shape));
    }
    total += p.cols();
  }
  Tensor out({r, total}, 0.0);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy(v.row(i).begin(), v.row(i).end(),
                out.data.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    }
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].graph().record(std::move(out), parts,
                                 [inputs, r, total](Graph& gr, const Tensor& dc) {
                                   std::size_t off = 0;
                                   for (const Var& p : inputs) {
                                     const std::size_t c = gr.value(p).cols();
                                     if (gr.requires_grad(p)) {
                                       Tensor& gp = gr.grad(p);
                                       for (std::size_t i = 0; i < r; ++i) {
                                         for (std::size_t j = 0; j < c; ++j) {
                                           gp(i, j) += dc.data[i * total + off + j];
                                         }
                                       }
                                     }
                                     off += c;
                                   }
                                 });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  if (begin + count > xv.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + shape_string(xv.shape));
  }
  const std::size_t c = xv.cols();
  Tensor out({count, c}, 0.0);
  std::copy(xv.data.begin() + static_cast<std::ptrdiff_t>(begin * c),
            xv.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * c), out.data.begin());
  const Var in[] = {x};
  return x.graph().record(std::move(out), in, [x, begin, c](Graph& g, const Tensor& dc) {
    simd::kernels().axpy(dc.numel(), 1.0, dc.data.data(), g.grad(x).data.data() + begin * c);
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  if (begin + count > xv.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + shape_string(xv.shape));
  }
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out({r, count}, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = xv(i, begin + j);
  }
  const Var in[] = {x};
  return x.graph().record(std::move(out), in, [x, begin, count, r, c](Graph& g, const Tensor& dc) {
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < count; ++j) gx.data[i * c + begin + j] += dc(i, j);
    }
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  const std::size_t c = tv.cols();
  Tensor out({ids.size(), c}, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      throw ContractError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                          std::to_string(tv.rows()) + " rows");
    }
    const auto src = tv.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<int> saved(ids.begin(), ids.end());
  const Var in[] = {table};
  return table.graph().record(std::move(out), in,
                              [table, saved = std::move(saved), c](Graph& g, const Tensor& dc) {
                                Tensor& gt = g.grad(table);
                                for (std::size_t i = 0; i < saved.size(); ++i) {
                                  simd::kernels().axpy(
                                      c, 1.0, dc.data.data() + i * c,
                                      gt.data.data() + static_cast<std::size_t>(saved[i]) * c);
                                }
                              });
}

Var mean_rows(Var x, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("mean_rows: empty row set");
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  Tensor out({1, c}, 0.0);
  for (std::size_t r : rows) {
    if (r >= xv.rows()) {
      throw ContractError("mean_rows: row " + std::to_string(r) + " outside " +
                          shape_string(xv.shape));
    }
    for (std::size_t j = 0; j < c; ++j) out.data[j] += xv(r, j);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : out.data) v *= inv;
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  const Var in[] = {x};
  return x.graph().record(std::move(out), in,
                          [x, saved = std::move(saved), c, inv](Graph& g, const Tensor& dc) {
                            Tensor& gx = g.grad(x);
                            for (std::size_t r : saved) {
                              simd::kernels().axpy(c, inv, dc.data.data(),
                                                   gx.data.data() + r * c);
                            }
                          });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().data) total += v;
  const Var in[] = {x};
  return x.graph().record(Tensor({1, 1}, total), in, [x](Graph& g, const Tensor& dc) {
    Tensor& gx = g.grad(x);
    for (double& v : gx.data) v += dc.data[0];
  });
}

double bce_value(double probability, int label) {
  const double p = std::clamp(probability, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

Var bce_loss(Var probability, int label) {
  if (probability.value().numel() != 1) {
    throw DimensionError("bce_loss: expected one probability, got " +
                         shape_string(probability.value().shape));
  }
  if (label != 0 && label != 1) {
    throw ContractError("bce_loss: label must be 0 or 1, got " + std::to_string(label));
  }
  const double raw = probability.value().data[0];
  const Var in[] = {probability};
  return probability.graph().record(
      Tensor({1, 1}, bce_value(raw, label)), in, [probability, label, raw](Graph& g,
                                                                           const Tensor& dc) {
        if (raw < kProbabilityClamp || raw > 1.0 - kProbabilityClamp) return;
        const double d = label == 1 ? -1.0 / raw : 1.0 / (1.0 - raw);
        g.grad(probability).data[0] += dc.data[0] * d;
      });
}

Var cross_entropy_rows(Var logits, std::span<const int> targets) {
  const Tensor& lv = logits.value();
  const std::size_t r = lv.rows(), v = lv.cols();
  if (targets.size() != r) {
    throw DimensionError("cross_entropy_rows: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(lv.shape));
  }
  const Var in[] = {logits};
  if (r == 0) return logits.graph().record(Tensor({1, 1}, 0.0), in, {});
  auto probs = std::make_shared<Tensor>(softmax_rows(lv));
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
      throw ContractError("cross_entropy_rows: target out of range");
    }
    total -= std::log(std::max((*probs)(i, static_cast<std::size_t>(targets[i])), 1e-300));
  }
  const double inv = 1.0 / static_cast<double>(r);
  std::vector<int> saved(targets.begin(), targets.end());
  return logits.graph().record(
      Tensor({1, 1}, total * inv), in,
      [logits, probs, saved = std::move(saved), inv, r, v](Graph& g, const Tensor& dc) {
        Tensor& gl = g.grad(logits);
        const double s = dc.data[0] * inv;
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < v; ++j) gl(i, j) += s * (*probs)(i, j);
          gl(i, static_cast<std::size_t>(saved[i])) -= s;
        }
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape) + " * " +
                         shape_string(b.shape));
  }
  Tensor out({a.rows(), b.cols()}, 0.0);
  simd::kernels().gemm_nn(a.rows(), a.cols(), b.cols(), a.data.data(), b.data.data(),
                          out.data.data());
  return out;
}

}  // namespace deld
