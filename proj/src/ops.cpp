#include "lwta/ops.hpp"

#include <algorithm>
#include <cmath>

#include "lwta/error.hpp"
#include "lwta/kernels.hpp"

namespace lwta::ad {
namespace {

template <class T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.value().shape() != b.value().shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.value().shape()) + " and " +
                         shape_str(b.value().shape()) + " differ");
  }
}

template <class T>
void accumulate(Tensor<T>* dst, const Tensor<T>& g) {
  if (dst) kernels::table<T>().axpy(g.size(), T(1), g.ptr(), dst->ptr());
}

template <class T>
Tape<T>& tape_of(const Var<T>& v) {
  if (!v.valid()) throw GraphError("operation on an unbound Var");
  return *v.tape();
}

}  // namespace

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape("add", a, b);
  Tensor<T> out = a.value();
  kernels::table<T>().axpy(out.size(), T(1), b.value().ptr(), out.ptr());
  return tape_of(a).record(OpTag::add, {a, b}, std::move(out),
                           [a, b](Tape<T>& t, const Tensor<T>& g) {
                             accumulate(t.grad_buffer(a), g);
                             accumulate(t.grad_buffer(b), g);
                           });
}

template <class T>
Var<T> add_row(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.size()) {
    throw DimensionError("add_row: " + shape_str(av.shape()) + " vs row " + shape_str(bv.shape()));
  }
  Tensor<T> out = av;
  const std::size_t n = av.rows(), d = av.cols();
  for (std::size_t r = 0; r < n; ++r) {
    kernels::table<T>().axpy(d, T(1), bv.ptr(), out.ptr() + r * d);
  }
  return tape_of(a).record(OpTag::add_row, {a, b}, std::move(out),
                           [a, b, n, d](Tape<T>& t, const Tensor<T>& g) {
                             accumulate(t.grad_buffer(a), g);
                             if (Tensor<T>* gb = t.grad_buffer(b)) {
                               for (std::size_t r = 0; r < n; ++r) {
                                 kernels::table<T>().axpy(d, T(1), g.ptr() + r * d, gb->ptr());
                               }
                             }
                           });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape("sub", a, b);
  Tensor<T> out = a.value();
  kernels::table<T>().axpy(out.size(), T(-1), b.value().ptr(), out.ptr());
  return tape_of(a).record(OpTag::sub, {a, b}, std::move(out),
                           [a, b](Tape<T>& t, const Tensor<T>& g) {
                             accumulate(t.grad_buffer(a), g);
                             if (Tensor<T>* gb = t.grad_buffer(b)) {
                               kernels::table<T>().axpy(g.size(), T(-1), g.ptr(), gb->ptr());
                             }
                           });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape("mul", a, b);
  Tensor<T> out(a.value().shape());
  kernels::table<T>().mul(out.size(), a.value().ptr(), b.value().ptr(), out.ptr());
  return tape_of(a).record(OpTag::mul, {a, b}, std::move(out),
                           [a, b](Tape<T>& t, const Tensor<T>& g) {
                             const auto& k = kernels::table<T>();
                             Tensor<T> tmp(g.shape());
                             if (Tensor<T>* ga = t.grad_buffer(a)) {
                               k.mul(g.size(), g.ptr(), b.value().ptr(), tmp.ptr());
                               accumulate(ga, tmp);
                             }
                             if (Tensor<T>* gb = t.grad_buffer(b)) {
                               k.mul(g.size(), g.ptr(), a.value().ptr(), tmp.ptr());
                               accumulate(gb, tmp);
                             }
                           });
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  Tensor<T> out(a.value().shape());
  kernels::table<T>().axpy(out.size(), c, a.value().ptr(), out.ptr());
  return tape_of(a).record(OpTag::scale, {a}, std::move(out),
                           [a, c](Tape<T>& t, const Tensor<T>& g) {
                             if (Tensor<T>* ga = t.grad_buffer(a)) {
                               kernels::table<T>().axpy(g.size(), c, g.ptr(), ga->ptr());
                             }
                           });
}

template <class T>
Var<T> add_scalar(Var<T> a, T c) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v += c;
  return tape_of(a).record(OpTag::add_scalar, {a}, std::move(out),
                           [a](Tape<T>& t, const Tensor<T>& g) { accumulate(t.grad_buffer(a), g); });
}

template <class T>
Var<T> matmul(Var<T> x, Var<T> w) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  if (xv.cols() != wv.rows()) {
    throw DimensionError("matmul: input " + shape_str(xv.shape()) + " vs weight " +
                         shape_str(wv.shape()));
  }
  const std::size_t n = xv.rows(), in = xv.cols(), out_dim = wv.cols();
  Tensor<T> out({n, out_dim});
  kernels::table<T>().gemm_nn(n, in, out_dim, xv.ptr(), wv.ptr(), out.ptr(), false);
  return tape_of(x).record(OpTag::matmul, {x, w}, std::move(out),
                           [x, w, n, in, out_dim](Tape<T>& t, const Tensor<T>& g) {
                             const auto& k = kernels::table<T>();
                             if (Tensor<T>* gx = t.grad_buffer(x)) {
                               k.gemm_nt(n, out_dim, in, g.ptr(), w.value().ptr(), gx->ptr());
                             }
                             if (Tensor<T>* gw = t.grad_buffer(w)) {
                               k.gemm_tn(n, in, out_dim, x.value().ptr(), g.ptr(), gw->ptr());
                             }
                           });
}

template <class T>
Var<T> block_softmax(Var<T> z, std::size_t group) {
  Tensor<T> out = lwta::block_softmax(z.value(), group);
  Tape<T>& tape = tape_of(z);
  const std::size_t self = tape.size();
  return tape.record(OpTag::block_softmax, {z}, std::move(out),
                     [z, group, self](Tape<T>& t, const Tensor<T>& g) {
                       Tensor<T>* gz = t.grad_buffer(z);
                       if (!gz) return;
                       const auto& y = t.value(self);
                       for (std::size_t base = 0; base < y.size(); base += group) {
                         T dotp = 0;
                         for (std::size_t j = 0; j < group; ++j) dotp += g[base + j] * y[base + j];
                         for (std::size_t j = 0; j < group; ++j) {
                           (*gz)[base + j] += y[base + j] * (g[base + j] - dotp);
                         }
                       }
                     });
}

template <class T>
Var<T> block_log_softmax(Var<T> z, std::size_t group) {
  const auto& zv = z.value();
  if (group == 0 || zv.size() % group != 0) {
    throw DimensionError("block_log_softmax: group " + std::to_string(group) +
                         " does not divide " + shape_str(zv.shape()));
  }
  Tensor<T> out(zv.shape());
  for (std::size_t base = 0; base < zv.size(); base += group) {
    T m = zv[base];
    for (std::size_t j = 1; j < group; ++j) m = std::max(m, zv[base + j]);
    T s = 0;
    for (std::size_t j = 0; j < group; ++j) s += std::exp(zv[base + j] - m);
    const T lse = m + std::log(s);
    for (std::size_t j = 0; j < group; ++j) out[base + j] = zv[base + j] - lse;
  }
  Tape<T>& tape = tape_of(z);
  const std::size_t self = tape.size();
  return tape.record(OpTag::block_log_softmax, {z}, std::move(out),
                     [z, group, self](Tape<T>& t, const Tensor<T>& g) {
                       Tensor<T>* gz = t.grad_buffer(z);
                       if (!gz) return;
                       const auto& y = t.value(self);
                       for (std::size_t base = 0; base < y.size(); base += group) {
                         T gs = 0;
                         for (std::size_t j = 0; j < group; ++j) gs += g[base + j];
                         for (std::size_t j = 0; j < group; ++j) {
                           (*gz)[base + j] += g[base + j] - std::exp(y[base + j]) * gs;
                         }
                       }
                     });
}

template <class T>
Var<T> log(Var<T> a) {
  Tensor<T> out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.value()[i]);
  return tape_of(a).record(OpTag::log, {a}, std::move(out), [a](Tape<T>& t, const Tensor<T>& g) {
    if (Tensor<T>* ga = t.grad_buffer(a)) {
      const auto& x = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / x[i];
    }
  });
}

template <class T>
Var<T> exp(Var<T> a) {
  Tensor<T> out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value()[i]);
  Tape<T>& tape = tape_of(a);
  const std::size_t self = tape.size();
  return tape.record(OpTag::exp, {a}, std::move(out), [a, self](Tape<T>& t, const Tensor<T>& g) {
    if (Tensor<T>* ga = t.grad_buffer(a)) {
      const auto& y = t.value(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i];
    }
  });
}

template <class T>
Var<T> tanh(Var<T> a) {
  Tensor<T> out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value()[i]);
  Tape<T>& tape = tape_of(a);
  const std::size_t self = tape.size();
  return tape.record(OpTag::tanh, {a}, std::move(out), [a, self](Tape<T>& t, const Tensor<T>& g) {
    if (Tensor<T>* ga = t.grad_buffer(a)) {
      const auto& y = t.value(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (T(1) - y[i] * y[i]);
    }
  });
}

template <class T>
Var<T> relu(Var<T> a) {
  Tensor<T> out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(T(0), a.value()[i]);
  return tape_of(a).record(OpTag::relu, {a}, std::move(out), [a](Tape<T>& t, const Tensor<T>& g) {
    if (Tensor<T>* ga = t.grad_buffer(a)) {
      const auto& x = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > T(0)) (*ga)[i] += g[i];
      }
    }
  });
}

template <class T>
Var<T> sum(Var<T> a) {
  T s = 0;
  for (auto v : a.value().data()) s += v;
  return tape_of(a).record(OpTag::sum, {a}, Tensor<T>::scalar(s),
                           [a](Tape<T>& t, const Tensor<T>& g) {
                             if (Tensor<T>* ga = t.grad_buffer(a)) {
                               for (auto& v : ga->data()) v += g[0];
                             }
                           });
}

template <class T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.value().size();
  T s = 0;
  for (auto v : a.value().data()) s += v;
  return tape_of(a).record(OpTag::mean, {a}, Tensor<T>::scalar(s / T(n)),
                           [a, n](Tape<T>& t, const Tensor<T>& g) {
                             if (Tensor<T>* ga = t.grad_buffer(a)) {
                               const T share = g[0] / T(n);
                               for (auto& v : ga->data()) v += share;
                             }
                           });
}

template <class T>
Var<T> concat(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  Shape ta(av.shape().begin() + 1, av.shape().end());
  Shape tb(bv.shape().begin() + 1, bv.shape().end());
  if (ta != tb) {
    throw DimensionError("concat: " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  }
  Shape shape = av.shape();
  shape[0] += bv.shape()[0];
  std::vector<T> data(av.values());
  data.insert(data.end(), bv.values().begin(), bv.values().end());
  const std::size_t split = av.size();
  return tape_of(a).record(OpTag::concat, {a, b}, Tensor<T>(std::move(shape), std::move(data)),
                           [a, b, split](Tape<T>& t, const Tensor<T>& g) {
                             if (Tensor<T>* ga = t.grad_buffer(a)) {
                               for (std::size_t i = 0; i < split; ++i) (*ga)[i] += g[i];
                             }
                             if (Tensor<T>* gb = t.grad_buffer(b)) {
                               for (std::size_t i = split; i < g.size(); ++i) (*gb)[i - split] += g[i];
                             }
                           });
}

template <class T>
Var<T> gather_rows(Var<T> a, std::vector<std::size_t> rows) {
  const auto& av = a.value();
  if (rows.empty()) throw ContractError("gather_rows: empty row list");
  const std::size_t d = av.cols();
  Shape shape = av.shape();
  shape[0] = rows.size();
  Tensor<T> out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= av.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(rows[r]) + " out of range " +
                       std::to_string(av.rows()));
    }
    std::copy_n(av.ptr() + rows[r] * d, d, out.ptr() + r * d);
  }
  return tape_of(a).record(OpTag::gather_rows, {a}, std::move(out),
                           [a, rows = std::move(rows), d](Tape<T>& t, const Tensor<T>& g) {
                             if (Tensor<T>* ga = t.grad_buffer(a)) {
                               for (std::size_t r = 0; r < rows.size(); ++r) {
                                 kernels::table<T>().axpy(d, T(1), g.ptr() + r * d,
                                                          ga->ptr() + rows[r] * d);
                               }
                             }
                           });
}

template <class T>
Var<T> clamp_min(Var<T> a, T lo) {
  const auto& x = a.value();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(lo, x[i]);
  return tape_of(a).record(OpTag::clamp_min, {a}, std::move(out),
                           [a, lo](Tape<T>& t, const Tensor<T>& g) {
                             if (Tensor<T>* ga = t.grad_buffer(a)) {
                               const auto& x = a.value();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 if (x[i] >= lo) (*ga)[i] += g[i];
                               }
                             }
                           });
}

template <class T>
Var<T> gaussian_reparam(Var<T> mu, Var<T> log_var, const Tensor<T>& eps) {
  require_same_shape("gaussian_reparam", mu, log_var);
  if (mu.value().shape() != eps.shape()) {
    throw DimensionError("gaussian_reparam: noise shape " + shape_str(eps.shape()) +
                         " vs parameter shape " + shape_str(mu.value().shape()));
  }
  const auto& m = mu.value();
  const auto& lv = log_var.value();
  Tensor<T> out(m.shape());
  // Holds sigma * eps, reused by the backward pass.
  Tensor<T> noise(m.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    noise[i] = std::exp(T(0.5) * lv[i]) * eps[i];
    out[i] = m[i] + noise[i];
  }
  return tape_of(mu).record(OpTag::gaussian_reparam, {mu, log_var}, std::move(out),
                            [mu, log_var, noise = std::move(noise)](Tape<T>& t,
                                                                     const Tensor<T>& g) {
                              accumulate(t.grad_buffer(mu), g);
                              if (Tensor<T>* gl = t.grad_buffer(log_var)) {
                                for (std::size_t i = 0; i < g.size(); ++i) {
                                  (*gl)[i] += g[i] * T(0.5) * noise[i];
                                }
                              }
                            });
}

template <class T>
Var<T> gaussian_log_ratio(Var<T> w, Var<T> mu, Var<T> log_var) {
  require_same_shape("gaussian_log_ratio", w, mu);
  require_same_shape("gaussian_log_ratio", mu, log_var);
  const auto& wv = w.value();
  const auto& m = mu.value();
  const auto& lv = log_var.value();
  // (w - mu) / sigma^2, reused by the backward pass.
  Tensor<T> scaled(wv.shape());
  T total = 0;
  for (std::size_t i = 0; i < wv.size(); ++i) {
    const T d = wv[i] - m[i];
    scaled[i] = d * std::exp(-lv[i]);
    total += T(-0.5) * lv[i] - T(0.5) * d * scaled[i] + T(0.5) * wv[i] * wv[i];
  }
  return tape_of(w).record(
      OpTag::gaussian_log_ratio, {w, mu, log_var}, Tensor<T>::scalar(total),
      [w, mu, log_var, scaled = std::move(scaled)](Tape<T>& t, const Tensor<T>& g) {
        const auto& wv = w.value();
        const auto& m = mu.value();
        Tensor<T>* gw = t.grad_buffer(w);
        Tensor<T>* gm = t.grad_buffer(mu);
        Tensor<T>* gl = t.grad_buffer(log_var);
        const T s = g[0];
        for (std::size_t i = 0; i < wv.size(); ++i) {
          const T d = wv[i] - m[i];
          if (gw) (*gw)[i] += s * (wv[i] - scaled[i]);
          if (gm) (*gm)[i] += s * scaled[i];
          if (gl) (*gl)[i] += s * (T(-0.5) + T(0.5) * d * scaled[i]);
        }
      });
}

template <class T>
Var<T> gumbel_softmax(Var<T> logits, const Tensor<T>& gumbel, T tau, std::size_t group) {
  if (!(tau > T(0))) throw ConfigError("gumbel_softmax: temperature must be > 0");
  Tape<T>& tape = tape_of(logits);
  auto perturbed = add(logits, tape.constant(gumbel));
  return block_softmax(scale(perturbed, T(1) / tau), group);
}

template <class T>
Var<T> nll(Var<T> probs, const std::vector<std::int32_t>& labels) {
  const auto& p = probs.value();
  const std::size_t n = p.rows(), c = p.cols();
  if (labels.size() != n) {
    throw DimensionError("nll: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  const T floor = static_cast<T>(kProbFloor);
  T total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c) {
      throw IndexError("nll: label " + std::to_string(labels[r]) + " outside [0, " +
                       std::to_string(c) + ")");
    }
    total -= std::log(std::max(p(r, labels[r]), floor));
  }
  return tape_of(probs).record(OpTag::nll, {probs}, Tensor<T>::scalar(total / T(n)),
                               [probs, labels, n, c, floor](Tape<T>& t, const Tensor<T>& g) {
                                 Tensor<T>* gp = t.grad_buffer(probs);
                                 if (!gp) return;
                                 const auto& p = probs.value();
                                 for (std::size_t r = 0; r < n; ++r) {
                                   const T pv = p(r, labels[r]);
                                   if (pv > floor) (*gp)[r * c + labels[r]] -= g[0] / (T(n) * pv);
                                 }
                               });
}

template <class T>
Var<T> squared_error(Var<T> pred, const Tensor<T>& target) {
  const auto& p = pred.value();
  if (p.size() != target.size()) {
    throw DimensionError("squared_error: prediction " + shape_str(p.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  const std::size_t n = p.size();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = p[i] - target[i];
    total += d * d;
  }
  return tape_of(pred).record(OpTag::squared_error, {pred}, Tensor<T>::scalar(total / T(n)),
                              [pred, target, n](Tape<T>& t, const Tensor<T>& g) {
                                Tensor<T>* gp = t.grad_buffer(pred);
                                if (!gp) return;
                                const auto& p = pred.value();
                                const T k = T(2) * g[0] / T(n);
                                for (std::size_t i = 0; i < n; ++i) (*gp)[i] += k * (p[i] - target[i]);
                              });
}

#define LWTA_INSTANTIATE_OPS(T)                                                          \
  template Var<T> add(Var<T>, Var<T>);                                                   \
  template Var<T> add_row(Var<T>, Var<T>);                                               \
  template Var<T> sub(Var<T>, Var<T>);                                                   \
  template Var<T> mul(Var<T>, Var<T>);                                                   \
  template Var<T> scale(Var<T>, T);                                                      \
  template Var<T> add_scalar(Var<T>, T);                                                 \
  template Var<T> matmul(Var<T>, Var<T>);                                                \
  template Var<T> block_softmax(Var<T>, std::size_t);                                    \
  template Var<T> block_log_softmax(Var<T>, std::size_t);                                \
  template Var<T> log(Var<T>);                                                           \
  template Var<T> exp(Var<T>);                                                           \
  template Var<T> tanh(Var<T>);                                                          \
  template Var<T> relu(Var<T>);                                                          \
  template Var<T> sum(Var<T>);                                                           \
  template Var<T> mean(Var<T>);                                                          \
  template Var<T> concat(Var<T>, Var<T>);                                                \
  template Var<T> gather_rows(Var<T>, std::vector<std::size_t>);                         \
  template Var<T> clamp_min(Var<T>, T);                                                  \
  template Var<T> gaussian_reparam(Var<T>, Var<T>, const Tensor<T>&);                    \
  template Var<T> gaussian_log_ratio(Var<T>, Var<T>, Var<T>);                            \
  template Var<T> gumbel_softmax(Var<T>, const Tensor<T>&, T, std::size_t);              \
  template Var<T> nll(Var<T>, const std::vector<std::int32_t>&);                         \
  template Var<T> squared_error(Var<T>, const Tensor<T>&);

LWTA_INSTANTIATE_OPS(float)
LWTA_INSTANTIATE_OPS(double)

}  // namespace lwta::ad
