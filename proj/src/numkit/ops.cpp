// SPDX-License-Identifier: Apache-2.0
#include "cad/numkit/ops.hpp"

#include <algorithm>
#include <cmath>

#include "cad/errors.hpp"
#include "cad/numkit/kernels.hpp"

namespace cad::numkit {
namespace {

const kernels::KernelTable& K() { return kernels::active(); }

void require_rank(const char* op, const Var& v, std::size_t rank) {
  if (v.value().rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_str(v.shape()));
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " differ");
}

}  // namespace

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor softmax_value(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  double mx = *std::max_element(logits.begin(), logits.end());
  Tensor out({logits.size()});
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
  return out;
}

Var affine(Var x, Var W, Var b) {
  require_rank("affine", x, 1);
  require_rank("affine", W, 2);
  require_rank("affine", b, 1);
  const std::size_t m = W.value().rows(), n = W.value().cols();
  if (x.value().size() != n || b.value().size() != m)
    throw DimensionError("affine: W " + shape_str(W.shape()) + " incompatible with x " + shape_str(x.shape()) +
                         " and b " + shape_str(b.shape()));
  Tensor y({m});
  K().gemv(W.value().ptr(), m, n, x.value().ptr(), b.value().ptr(), y.ptr());
  return x.graph()->record("affine", std::move(y), {x, W, b},
                           [x, W, m, n](const Tensor& g, std::span<Tensor* const> d) {
                             if (d[0]) K().gemv_t_acc(W.value().ptr(), m, n, g.ptr(), d[0]->ptr());
                             if (d[1]) K().ger_acc(g.ptr(), m, x.value().ptr(), n, d[1]->ptr());
                             if (d[2]) K().axpy(1.0, g.ptr(), d[2]->ptr(), m);
                           });
}

Var matvec(Var W, Var x) {
  require_rank("matvec", x, 1);
  require_rank("matvec", W, 2);
  const std::size_t m = W.value().rows(), n = W.value().cols();
  if (x.value().size() != n)
    throw DimensionError("matvec: W " + shape_str(W.shape()) + " incompatible with x " + shape_str(x.shape()));
  Tensor y({m});
  K().gemv(W.value().ptr(), m, n, x.value().ptr(), nullptr, y.ptr());
  return x.graph()->record("matvec", std::move(y), {W, x},
                           [x, W, m, n](const Tensor& g, std::span<Tensor* const> d) {
                             if (d[0]) K().ger_acc(g.ptr(), m, x.value().ptr(), n, d[0]->ptr());
                             if (d[1]) K().gemv_t_acc(W.value().ptr(), m, n, g.ptr(), d[1]->ptr());
                           });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  K().axpy(1.0, b.value().ptr(), y.ptr(), y.size());
  return a.graph()->record("add", std::move(y), {a, b}, [](const Tensor& g, std::span<Tensor* const> d) {
    for (Tensor* slot : d)
      if (slot) K().axpy(1.0, g.ptr(), slot->ptr(), g.size());
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return a.graph()->record("mul", std::move(y), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*d[0])[i] += g[i] * b.value()[i];
    if (d[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*d[1])[i] += g[i] * a.value()[i];
  });
}

Var one_minus(Var a) {
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 - a.value()[i];
  return a.graph()->record("one_minus", std::move(y), {a}, [](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*d[0])[i] -= g[i];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.graph()->record("sum", Tensor::vector({s}), {x}, [](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0])
      for (double& v : d[0]->data()) v += g[0];
  });
}

Var activate(Var x, Activation kind) {
  Tensor y(x.shape());
  const auto& xv = x.value();
  if (kind == Activation::Tanh) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(xv[i]);
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigmoid_value(xv[i]);
  }
  Graph* graph = x.graph();
  std::size_t out_id = graph->size();
  return graph->record(kind == Activation::Tanh ? "tanh" : "sigmoid", std::move(y), {x},
                       [graph, out_id, kind](const Tensor& g, std::span<Tensor* const> d) {
                         if (!d[0]) return;
                         const Tensor& yv = Var(graph, out_id).value();
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           double local = kind == Activation::Tanh ? 1.0 - yv[i] * yv[i] : yv[i] * (1.0 - yv[i]);
                           (*d[0])[i] += g[i] * local;
                         }
                       });
}

Var softmax(Var logits) {
  require_rank("softmax", logits, 1);
  Tensor y = softmax_value(logits.value().data());
  Graph* graph = logits.graph();
  std::size_t out_id = graph->size();
  return graph->record("softmax", std::move(y), {logits},
                       [graph, out_id](const Tensor& g, std::span<Tensor* const> d) {
                         if (!d[0]) return;
                         const Tensor& yv = Var(graph, out_id).value();
                         double inner = 0.0;
                         for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * yv[i];
                         for (std::size_t i = 0; i < g.size(); ++i) (*d[0])[i] += yv[i] * (g[i] - inner);
                       });
}

Var maxpool_time(Var H, std::size_t valid_len) {
  require_rank("maxpool_time", H, 2);
  const std::size_t T = H.value().rows(), dim = H.value().cols();
  if (valid_len == 0) throw DimensionError("maxpool_time: empty utterance (valid_len = 0)");
  if (valid_len > T)
    throw DimensionError("maxpool_time: valid_len " + std::to_string(valid_len) + " exceeds " + std::to_string(T) +
                         " rows");
  Tensor y({dim});
  std::vector<std::size_t> argmax(dim, 0);
  const Tensor& hv = H.value();
  for (std::size_t c = 0; c < dim; ++c) y[c] = hv.at(0, c);
  for (std::size_t t = 1; t < valid_len; ++t)
    for (std::size_t c = 0; c < dim; ++c)
      if (hv.at(t, c) > y[c]) {
        y[c] = hv.at(t, c);
        argmax[c] = t;
      }
  return H.graph()->record("maxpool_time", std::move(y), {H},
                           [argmax = std::move(argmax), dim](const Tensor& g, std::span<Tensor* const> d) {
                             if (!d[0]) return;
                             for (std::size_t c = 0; c < dim; ++c) d[0]->at(argmax[c], c) += g[c];
                           });
}

Var dropout(Var x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::Infer || rate == 0.0) return x;
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask[i] = uniform01(rng) < rate ? 0.0 : scale;
    y[i] = x.value()[i] * mask[i];
  }
  return x.graph()->record("dropout", std::move(y), {x},
                           [mask = std::move(mask)](const Tensor& g, std::span<Tensor* const> d) {
                             if (!d[0]) return;
                             for (std::size_t i = 0; i < g.size(); ++i) (*d[0])[i] += g[i] * mask[i];
                           });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    require_rank("concat", p, 1);
    offsets.push_back(out.size());
    out.insert(out.end(), p.value().data().begin(), p.value().data().end());
  }
  std::size_t total = out.size();
  return parts.front().graph()->record(
      "concat", Tensor({total}, std::move(out)), std::vector<Var>(parts.begin(), parts.end()),
      [offsets = std::move(offsets)](const Tensor& g, std::span<Tensor* const> d) {
        for (std::size_t k = 0; k < d.size(); ++k)
          if (d[k]) K().axpy(1.0, g.ptr() + offsets[k], d[k]->ptr(), d[k]->size());
      });
}

Var concat_cols(Var A, Var B) {
  require_rank("concat_cols", A, 2);
  require_rank("concat_cols", B, 2);
  const std::size_t T = A.value().rows(), a = A.value().cols(), b = B.value().cols();
  if (B.value().rows() != T)
    throw DimensionError("concat_cols: row counts differ for " + shape_str(A.shape()) + " and " + shape_str(B.shape()));
  Tensor out({T, a + b});
  for (std::size_t t = 0; t < T; ++t) {
    std::copy_n(A.value().ptr() + t * a, a, out.ptr() + t * (a + b));
    std::copy_n(B.value().ptr() + t * b, b, out.ptr() + t * (a + b) + a);
  }
  return A.graph()->record("concat_cols", std::move(out), {A, B},
                           [T, a, b](const Tensor& g, std::span<Tensor* const> d) {
                             for (std::size_t t = 0; t < T; ++t) {
                               if (d[0]) K().axpy(1.0, g.ptr() + t * (a + b), d[0]->ptr() + t * a, a);
                               if (d[1]) K().axpy(1.0, g.ptr() + t * (a + b) + a, d[1]->ptr() + t * b, b);
                             }
                           });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t dim = rows.front().value().size();
  Tensor out({rows.size(), dim});
  for (std::size_t t = 0; t < rows.size(); ++t) {
    require_rank("stack_rows", rows[t], 1);
    if (rows[t].value().size() != dim)
      throw DimensionError("stack_rows: row " + std::to_string(t) + " has shape " + shape_str(rows[t].shape()) +
                           ", expected [" + std::to_string(dim) + "]");
    std::copy_n(rows[t].value().ptr(), dim, out.ptr() + t * dim);
  }
  return rows.front().graph()->record("stack_rows", std::move(out), std::vector<Var>(rows.begin(), rows.end()),
                                      [dim](const Tensor& g, std::span<Tensor* const> d) {
                                        for (std::size_t t = 0; t < d.size(); ++t)
                                          if (d[t]) K().axpy(1.0, g.ptr() + t * dim, d[t]->ptr(), dim);
                                      });
}

Var row(Var M, std::size_t i) {
  require_rank("row", M, 2);
  if (i >= M.value().rows())
    throw DimensionError("row: index " + std::to_string(i) + " out of range for " + shape_str(M.shape()));
  const std::size_t dim = M.value().cols();
  auto r = M.value().row(i);
  return M.graph()->record("row", Tensor({dim}, std::vector<double>(r.begin(), r.end())), {M},
                           [i, dim](const Tensor& g, std::span<Tensor* const> d) {
                             if (d[0]) K().axpy(1.0, g.ptr(), d[0]->ptr() + i * dim, dim);
                           });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  require_rank("gather_rows", table, 2);
  if (ids.empty()) throw DimensionError("gather_rows: no ids");
  const std::size_t V = table.value().rows(), dim = table.value().cols();
  Tensor out({ids.size(), dim});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= V)
      throw DimensionError("gather_rows: id " + std::to_string(ids[t]) + " out of range for table " +
                           shape_str(table.shape()));
    std::copy_n(table.value().ptr() + ids[t] * dim, dim, out.ptr() + t * dim);
  }
  return table.graph()->record("gather_rows", std::move(out), {table},
                               [ids = std::vector<std::size_t>(ids.begin(), ids.end()), dim](
                                   const Tensor& g, std::span<Tensor* const> d) {
                                 if (!d[0]) return;
                                 for (std::size_t t = 0; t < ids.size(); ++t)
                                   K().axpy(1.0, g.ptr() + t * dim, d[0]->ptr() + ids[t] * dim, dim);
                               });
}

}  // namespace cad::numkit
