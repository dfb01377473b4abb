// Copyright 2026 The comae-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "comae/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "comae/error.hpp"

namespace comae::nn {
namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw DataError(std::string(what) + ": non-finite input");
    }
  }
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw UsageError("operands live on different tapes");
}

// In-place numerically stable softmax of one row.
void softmax_row(std::span<const double> in, std::span<double> out) {
  double max_v = -std::numeric_limits<double>::infinity();
  for (double v : in) max_v = std::max(max_v, v);
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - max_v);
    total += out[i];
  }
  for (double& v : out) v /= total;
}

double log_sum_exp(std::span<const double> in) {
  double max_v = -std::numeric_limits<double>::infinity();
  for (double v : in) max_v = std::max(max_v, v);
  double total = 0.0;
  for (double v : in) total += std::exp(v - max_v);
  return max_v + std::log(total);
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw DataError("softmax: empty input");
  check_finite(logits, "softmax");
  std::vector<double> out(logits.size());
  softmax_row(logits, out);
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw DataError("log_softmax: empty input");
  check_finite(logits, "log_softmax");
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double cross_entropy_from_logits(std::span<const double> logits,
                                 std::size_t target) {
  if (target >= logits.size()) {
    throw DataError("cross_entropy: target " + std::to_string(target) +
                    " out of range for " + std::to_string(logits.size()) +
                    " classes");
  }
  check_finite(logits, "cross_entropy");
  return log_sum_exp(logits) - logits[target];
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw DataError("argmax: empty input");
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

Var parameter(GradientTape& tape, const Parameter& p) {
  const Parameter* src = &p;
  return tape.record(p.value, [src](GradientTape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& pg = t.param_grad(*src);
    for (std::size_t i = 0; i < g.size(); ++i) pg.data()[i] += g.data()[i];
  });
}

Var embedding(GradientTape& tape, const Parameter& table,
              std::span<const int> ids) {
  const std::size_t d = table.value.cols();
  Tensor out(ids.size(), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const int id = ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= table.value.rows()) {
      throw DataError("embedding '" + table.name + "': index " +
                      std::to_string(id) + " out of range [0, " +
                      std::to_string(table.value.rows()) + ")");
    }
    std::copy_n(table.value.row(static_cast<std::size_t>(id)).data(), d,
                out.row(r).data());
  }
  std::vector<int> kept(ids.begin(), ids.end());
  const Parameter* src = &table;
  return tape.record(std::move(out), [src, kept = std::move(kept)](
                                         GradientTape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& pg = t.param_grad(*src);
    const std::size_t d = g.cols();
    for (std::size_t r = 0; r < kept.size(); ++r) {
      double* dst = pg.row(static_cast<std::size_t>(kept[r])).data();
      const double* from = g.row(r).data();
      for (std::size_t c = 0; c < d; ++c) dst[c] += from[c];
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool broadcast = bv.rows() == 1 && av.rows() != 1;
  if (av.cols() != bv.cols() || (!broadcast && av.rows() != bv.rows())) {
    throw UsageError("add: shape mismatch");
  }
  Tensor out = av;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto dst = out.row(r);
    auto src = bv.row(broadcast ? 0 : r);
    for (std::size_t c = 0; c < av.cols(); ++c) dst[c] += src[c];
  }
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), [ia, ib, broadcast](GradientTape& t,
                                                           std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
    Tensor& gb = t.grad(ib);
    if (broadcast) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      }
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError("mul: shape mismatch");
  }
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), [ia, ib](GradientTape& t,
                                                 std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data()[i] += g.data()[i] * bv.data()[i];
    }
    Tensor& gb = t.grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gb.data()[i] += g.data()[i] * av.data()[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), [ia, factor](GradientTape& t,
                                                     std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data()[i] += factor * g.data()[i];
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t ia = a.id;
  return a.tape->record(Tensor(1, 1, total), [ia](GradientTape& t,
                                                  std::size_t self) {
    const double g = t.grad(self)(0, 0);
    for (double& v : t.grad(ia).values()) v += g;
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), [ia](GradientTape& t,
                                             std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double yi = y.data()[i];
      ga.data()[i] += g.data()[i] * (1.0 - yi * yi);
    }
  });
}

Var gelu(Var a) {
  constexpr double kAlpha = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kBeta = 0.044715;
  Tensor out = a.value();
  for (double& v : out.values()) {
    v = 0.5 * v * (1.0 + std::tanh(kAlpha * (v + kBeta * v * v * v)));
  }
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), [ia](GradientTape& t,
                                             std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xi = x.data()[i];
      const double inner = kAlpha * (xi + kBeta * xi * xi * xi);
      const double th = std::tanh(inner);
      const double dinner = kAlpha * (1.0 + 3.0 * kBeta * xi * xi);
      const double d = 0.5 * (1.0 + th) + 0.5 * xi * (1.0 - th * th) * dinner;
      ga.data()[i] += g.data()[i] * d;
    }
  });
}

Var linear(Var x, const Parameter& w, const Parameter* bias) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows();
  const std::size_t in = w.value.rows();
  const std::size_t out_dim = w.value.cols();
  if (xv.cols() != in) {
    throw UsageError("linear '" + w.name + "': input width " +
                     std::to_string(xv.cols()) + " != " + std::to_string(in));
  }
  if (bias && (bias->value.rows() != 1 || bias->value.cols() != out_dim)) {
    throw UsageError("linear '" + w.name + "': bias shape mismatch");
  }
  Tensor out(rows, out_dim);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.row(r).data();
    if (bias) std::copy_n(bias->value.data(), out_dim, dst);
    const double* xr = xv.row(r).data();
    for (std::size_t k = 0; k < in; ++k) {
      const double xk = xr[k];
      if (xk == 0.0) continue;
      const double* wk = w.value.row(k).data();
      for (std::size_t c = 0; c < out_dim; ++c) dst[c] += xk * wk[c];
    }
  }
  const std::size_t ix = x.id;
  const Parameter* wp = &w;
  return x.tape->record(std::move(out), [ix, wp, bias](GradientTape& t,
                                                       std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(ix);
    const std::size_t in = wp->value.rows();
    const std::size_t out_dim = wp->value.cols();
    Tensor& gx = t.grad(ix);
    Tensor& gw = t.param_grad(*wp);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const double* gr = g.row(r).data();
      const double* xr = xv.row(r).data();
      double* gxr = gx.row(r).data();
      for (std::size_t k = 0; k < in; ++k) {
        const double* wk = wp->value.row(k).data();
        double* gwk = gw.row(k).data();
        double acc = 0.0;
        const double xk = xr[k];
        for (std::size_t c = 0; c < out_dim; ++c) {
          acc += gr[c] * wk[c];
          gwk[c] += xk * gr[c];
        }
        gxr[k] += acc;
      }
    }
    if (bias) {
      Tensor& gb = t.param_grad(*bias);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < out_dim; ++c) gb(0, c) += g(r, c);
      }
    }
  });
}

Var tied_projection(Var x, const Parameter& table) {
  const Tensor& xv = x.value();
  const std::size_t d = table.value.cols();
  const std::size_t n = table.value.rows();
  if (xv.cols() != d) {
    throw UsageError("tied projection '" + table.name +
                     "': input width mismatch");
  }
  Tensor out(xv.rows(), n);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const double* xr = xv.row(r).data();
    for (std::size_t v = 0; v < n; ++v) {
      const double* tv = table.value.row(v).data();
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += xr[c] * tv[c];
      out(r, v) = acc;
    }
  }
  const std::size_t ix = x.id;
  const Parameter* tp = &table;
  return x.tape->record(std::move(out), [ix, tp](GradientTape& t,
                                                 std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(ix);
    Tensor& gx = t.grad(ix);
    Tensor& gt = t.param_grad(*tp);
    const std::size_t d = tp->value.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const double* xr = xv.row(r).data();
      double* gxr = gx.row(r).data();
      for (std::size_t v = 0; v < g.cols(); ++v) {
        const double gv = g(r, v);
        if (gv == 0.0) continue;
        const double* tv = tp->value.row(v).data();
        double* gtv = gt.row(v).data();
        for (std::size_t c = 0; c < d; ++c) {
          gxr[c] += gv * tv[c];
          gtv[c] += gv * xr[c];
        }
      }
    }
  });
}

Var layer_norm(Var x, const Parameter& gain, const Parameter& bias,
               double eps) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  if (gain.value.cols() != d || bias.value.cols() != d) {
    throw UsageError("layer_norm: width mismatch");
  }
  Tensor out(xv.rows(), d);
  // Per-row normalised input and inverse stddev, kept for backward.
  Tensor normed(xv.rows(), d);
  std::vector<double> inv_std(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const double* xr = xv.row(r).data();
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double n = (xr[c] - mean) * is;
      normed(r, c) = n;
      out(r, c) = n * gain.value(0, c) + bias.value(0, c);
    }
  }
  const std::size_t ix = x.id;
  const Parameter* gp = &gain;
  const Parameter* bp = &bias;
  return x.tape->record(
      std::move(out),
      [ix, gp, bp, normed = std::move(normed), inv_std = std::move(inv_std)](
          GradientTape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(ix);
        Tensor& gg = t.param_grad(*gp);
        Tensor& gb = t.param_grad(*bp);
        const std::size_t d = g.cols();
        const double dd = static_cast<double>(d);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double sum_dn = 0.0;
          double sum_dn_n = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double dn = g(r, c) * gp->value(0, c);
            sum_dn += dn;
            sum_dn_n += dn * normed(r, c);
            gg(0, c) += g(r, c) * normed(r, c);
            gb(0, c) += g(r, c);
          }
          for (std::size_t c = 0; c < d; ++c) {
            const double dn = g(r, c) * gp->value(0, c);
            gx(r, c) += inv_std[r] *
                        (dn - sum_dn / dd - normed(r, c) * sum_dn_n / dd);
          }
        }
      });
}

Var causal_self_attention(Var qkv, std::size_t heads) {
  const Tensor& in = qkv.value();
  const std::size_t steps = in.rows();
  if (heads == 0 || in.cols() % (3 * heads) != 0) {
    throw UsageError("attention: width not divisible into q/k/v heads");
  }
  const std::size_t d = in.cols() / 3;
  const std::size_t hd = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  Tensor out(steps, d);
  // weights[h][t][u] for u <= t, stored densely as [heads * steps, steps].
  Tensor weights(heads * steps, steps);
  std::vector<double> scores(steps);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
    for (std::size_t t = 0; t < steps; ++t) {
      const double* q = in.row(t).data() + qo;
      double max_s = -std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u <= t; ++u) {
        const double* k = in.row(u).data() + ko;
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += q[c] * k[c];
        s *= inv_sqrt;
        scores[u] = s;
        max_s = std::max(max_s, s);
      }
      double total = 0.0;
      for (std::size_t u = 0; u <= t; ++u) {
        scores[u] = std::exp(scores[u] - max_s);
        total += scores[u];
      }
      double* o = out.row(t).data() + h * hd;
      double* w = weights.row(h * steps + t).data();
      for (std::size_t u = 0; u <= t; ++u) {
        const double a = scores[u] / total;
        w[u] = a;
        const double* v = in.row(u).data() + vo;
        for (std::size_t c = 0; c < hd; ++c) o[c] += a * v[c];
      }
    }
  }

  const std::size_t iq = qkv.id;
  return qkv.tape->record(
      std::move(out), [iq, heads, d, hd, inv_sqrt, weights = std::move(weights)](
                          GradientTape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& in = t.value(iq);
        Tensor& gin = t.grad(iq);
        const std::size_t steps = g.rows();
        std::vector<double> dw(steps);
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
          for (std::size_t tt = 0; tt < steps; ++tt) {
            const double* go = g.row(tt).data() + h * hd;
            const double* w = weights.row(h * steps + tt).data();
            double dot = 0.0;
            for (std::size_t u = 0; u <= tt; ++u) {
              const double* v = in.row(u).data() + vo;
              double* gv = gin.row(u).data() + vo;
              double acc = 0.0;
              for (std::size_t c = 0; c < hd; ++c) {
                acc += go[c] * v[c];
                gv[c] += w[u] * go[c];
              }
              dw[u] = acc;
              dot += w[u] * acc;
            }
            const double* q = in.row(tt).data() + qo;
            double* gq = gin.row(tt).data() + qo;
            for (std::size_t u = 0; u <= tt; ++u) {
              const double ds = w[u] * (dw[u] - dot) * inv_sqrt;
              if (ds == 0.0) continue;
              const double* k = in.row(u).data() + ko;
              double* gk = gin.row(u).data() + ko;
              for (std::size_t c = 0; c < hd; ++c) {
                gq[c] += ds * k[c];
                gk[c] += ds * q[c];
              }
            }
          }
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    if (p.rows() != rows) throw UsageError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.row(r).data(), v.cols(), out.row(r).data() + offset);
    }
    offset += v.cols();
    ids.push_back(p.id);
  }
  return parts[0].tape->record(
      std::move(out), [ids = std::move(ids)](GradientTape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t id : ids) {
          Tensor& gp = t.grad(id);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < gp.cols(); ++c) {
              gp(r, c) += g(r, offset + c);
            }
          }
          offset += gp.cols();
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    if (p.cols() != cols) throw UsageError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy_n(v.data(), v.size(), out.data() + offset * cols);
    offset += v.rows();
    ids.push_back(p.id);
  }
  return parts[0].tape->record(
      std::move(out), [ids = std::move(ids)](GradientTape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t id : ids) {
          Tensor& gp = t.grad(id);
          const double* src = g.data() + offset * g.cols();
          for (std::size_t i = 0; i < gp.size(); ++i) gp.data()[i] += src[i];
          offset += gp.rows();
        }
      });
}

Var select_rows(Var a, std::size_t first, std::size_t count) {
  const Tensor& av = a.value();
  if (first + count > av.rows()) throw UsageError("select_rows: out of range");
  Tensor out(count, av.cols());
  std::copy_n(av.data() + first * av.cols(), count * av.cols(), out.data());
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), [ia, first](GradientTape& t,
                                                    std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    double* dst = ga.data() + first * ga.cols();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g.data()[i];
  });
}

Var mean_rows(Var a) {
  const Tensor& av = a.value();
  if (av.rows() == 0) throw UsageError("mean_rows: empty input");
  Tensor out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
  }
  const double inv = 1.0 / static_cast<double>(av.rows());
  for (double& v : out.values()) v *= inv;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), [ia, inv](GradientTape& t,
                                                  std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(0, c) * inv;
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Tensor& lv = logits.value();
  if (targets.size() != lv.rows()) {
    throw UsageError("cross_entropy: one target per row required");
  }
  Tensor probs(lv.rows(), lv.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    const int target = targets[r];
    if (target < 0 || static_cast<std::size_t>(target) >= lv.cols()) {
      throw DataError("cross_entropy: target " + std::to_string(target) +
                      " out of range");
    }
    softmax_row(lv.row(r), probs.row(r));
    total += log_sum_exp(lv.row(r)) - lv(r, static_cast<std::size_t>(target));
  }
  std::vector<int> kept(targets.begin(), targets.end());
  const std::size_t il = logits.id;
  return logits.tape->record(
      Tensor(1, 1, total),
      [il, probs = std::move(probs), kept = std::move(kept)](GradientTape& t,
                                                             std::size_t self) {
        const double g = t.grad(self)(0, 0);
        Tensor& gl = t.grad(il);
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          for (std::size_t c = 0; c < probs.cols(); ++c) {
            gl(r, c) += g * probs(r, c);
          }
          gl(r, static_cast<std::size_t>(kept[r])) -= g;
        }
      });
}

}  // namespace comae::nn
