// Copyright 2026 The SemanticSTR Desk Authors
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

#include "sstr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "blas.hpp"
#include "sstr/errors.hpp"

namespace sstr {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;
using detail::gemm;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void record(Tensor& out, std::function<void()> fn) {
  out.set_requires_grad(true);
  Tape::active()->record(out.node(), std::move(fn));
}

// Gradient buffer of an input, or nullptr when it does not want one.
real* grad_of(const NodePtr& n) {
  if (!n || !n->requires_grad) return nullptr;
  n->ensure_grad();
  return n->grad.data();
}

[[noreturn]] void dim_error(const std::string& op, const Shape& a, const Shape& b) {
  throw DimensionError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

std::size_t resolve_axis(int axis, std::size_t ndim, const std::string& op) {
  int a = axis < 0 ? axis + static_cast<int>(ndim) : axis;
  if (a < 0 || a >= static_cast<int>(ndim)) {
    throw DimensionError(op + ": axis " + std::to_string(axis) + " out of range for rank " + std::to_string(ndim));
  }
  return static_cast<std::size_t>(a);
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) dim_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  gemm(false, false, m, n, k, real(1), a.data().data(), k, b.data().data(), n, real(0), out.mutable_data().data(), n);
  if (tracking({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    record(out, [an, bn, on, m, n, k] {
      const real* dc = on->grad.data();
      if (real* da = grad_of(an)) gemm(false, true, m, k, n, real(1), dc, n, bn->data.data(), n, real(1), da, k);
      if (real* db = grad_of(bn)) gemm(true, false, k, n, m, real(1), an->data.data(), k, dc, n, real(1), db, n);
    });
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) dim_error("bmm", a.shape(), b.shape());
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
  if ((trans_b ? b.dim(2) : b.dim(1)) != k) dim_error("bmm", a.shape(), b.shape());
  Tensor out = Tensor::zeros({batch, m, n});
  const std::size_t ldb = trans_b ? k : n;
  for (std::size_t i = 0; i < batch; ++i) {
    gemm(false, trans_b, m, n, k, real(1), a.data().data() + i * m * k, k, b.data().data() + i * k * n, ldb, real(0),
         out.mutable_data().data() + i * m * n, n);
  }
  if (tracking({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    record(out, [an, bn, on, batch, m, n, k, trans_b, ldb] {
      real* da = grad_of(an);
      real* db = grad_of(bn);
      for (std::size_t i = 0; i < batch; ++i) {
        const real* dc = on->grad.data() + i * m * n;
        const real* A = an->data.data() + i * m * k;
        const real* B = bn->data.data() + i * k * n;
        // C = A B    : dA = dC B^T, dB = A^T dC
        // C = A B^T  : dA = dC B,   dB = dC^T A
        if (da) gemm(false, !trans_b, m, k, n, real(1), dc, n, B, ldb, real(1), da + i * m * k, k);
        if (db) {
          if (trans_b) {
            gemm(true, false, n, k, m, real(1), dc, n, A, k, real(1), db + i * k * n, k);
          } else {
            gemm(true, false, k, n, m, real(1), A, k, dc, n, real(1), db + i * k * n, n);
          }
        }
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.ndim() != 2 || x.shape().back() != weight.dim(0)) dim_error("linear", x.shape(), weight.shape());
  const std::size_t in = weight.dim(0), outd = weight.dim(1), rows = x.size() / in;
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != outd)) dim_error("linear(bias)", weight.shape(), bias.shape());
  Shape shape = x.shape();
  shape.back() = outd;
  Tensor out = Tensor::zeros(shape);
  real* y = out.mutable_data().data();
  if (bias.defined()) {
    for (std::size_t r = 0; r < rows; ++r) std::copy(bias.data().begin(), bias.data().end(), y + r * outd);
  }
  gemm(false, false, rows, outd, in, real(1), x.data().data(), in, weight.data().data(), outd,
       bias.defined() ? real(1) : real(0), y, outd);
  if (tracking({&x, &weight, &bias})) {
    NodePtr xn = x.node(), wn = weight.node(), on = out.node();
    NodePtr bn = bias.defined() ? bias.node() : nullptr;
    record(out, [xn, wn, bn, on, rows, in, outd] {
      const real* dy = on->grad.data();
      if (real* dx = grad_of(xn)) gemm(false, true, rows, in, outd, real(1), dy, outd, wn->data.data(), outd, real(1), dx, in);
      if (real* dw = grad_of(wn)) gemm(true, false, in, outd, rows, real(1), xn->data.data(), in, dy, outd, real(1), dw, outd);
      if (real* db = grad_of(bn)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < outd; ++j) db[j] += dy[r * outd + j];
        }
      }
    });
  }
  return out;
}

namespace {

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  if (a.shape() != b.shape()) dim_error(name, a.shape(), b.shape());
  Tensor out = Tensor::zeros(a.shape());
  auto x = a.data(), y = b.data();
  auto z = out.mutable_data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    switch (kind) {
      case Binary::kAdd: z[i] = x[i] + y[i]; break;
      case Binary::kSub: z[i] = x[i] - y[i]; break;
      case Binary::kMul: z[i] = x[i] * y[i]; break;
    }
  }
  if (tracking({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    record(out, [an, bn, on, kind] {
      const auto& g = on->grad;
      real* da = grad_of(an);
      real* db = grad_of(bn);
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (kind) {
          case Binary::kAdd:
            if (da) da[i] += g[i];
            if (db) db[i] += g[i];
            break;
          case Binary::kSub:
            if (da) da[i] += g[i];
            if (db) db[i] -= g[i];
            break;
          case Binary::kMul:
            if (da) da[i] += g[i] * bn->data[i];
            if (db) db[i] += g[i] * an->data[i];
            break;
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kMul, "mul"); }

Tensor add_broadcast(const Tensor& x, const Tensor& y) {
  const Shape& xs = x.shape();
  const Shape& ys = y.shape();
  if (ys.size() > xs.size() || !std::equal(ys.rbegin(), ys.rend(), xs.rbegin())) dim_error("add_broadcast", xs, ys);
  const std::size_t inner = y.size(), outer = x.size() / inner;
  Tensor out = Tensor::zeros(xs);
  auto z = out.mutable_data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) z[o * inner + i] = x[o * inner + i] + y[i];
  }
  if (tracking({&x, &y})) {
    NodePtr xn = x.node(), yn = y.node(), on = out.node();
    record(out, [xn, yn, on, outer, inner] {
      const auto& g = on->grad;
      if (real* dx = grad_of(xn)) {
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      }
      if (real* dy = grad_of(yn)) {
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < inner; ++i) dy[i] += g[o * inner + i];
        }
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, real factor) {
  Tensor out = Tensor::zeros(x.shape());
  auto z = out.mutable_data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * factor;
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on, factor] {
      real* dx = grad_of(xn);
      for (std::size_t i = 0; i < on->grad.size(); ++i) dx[i] += on->grad[i] * factor;
    });
  }
  return out;
}

Tensor scale_rows(const Tensor& x, std::span<const real> weights) {
  if (x.ndim() < 1 || x.dim(0) != weights.size()) {
    dim_error("scale_rows", x.shape(), Shape{weights.size()});
  }
  const std::size_t rows = weights.size(), width = x.size() / rows;
  std::vector<real> w(weights.begin(), weights.end());
  Tensor out = Tensor::zeros(x.shape());
  auto z = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (w[r] == real(0)) continue;
    for (std::size_t i = 0; i < width; ++i) z[r * width + i] = x[r * width + i] * w[r];
  }
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on, w = std::move(w), width] {
      real* dx = grad_of(xn);
      for (std::size_t r = 0; r < w.size(); ++r) {
        for (std::size_t i = 0; i < width; ++i) dx[r * width + i] += on->grad[r * width + i] * w[r];
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto z = out.mutable_data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] < real(0) ? real(0) : x[i];  // NaN passes through
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on] {
      real* dx = grad_of(xn);
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        if (xn->data[i] > real(0)) dx[i] += on->grad[i];
      }
    });
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto z = out.mutable_data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::tanh(x[i]);
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on] {
      real* dx = grad_of(xn);
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        const real y = on->data[i];
        dx[i] += on->grad[i] * (real(1) - y * y);
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  const std::size_t ax = resolve_axis(axis, x.ndim(), "softmax");
  const AxisSplit s = split_at(x.shape(), ax);
  Tensor out = Tensor::zeros(x.shape());
  auto in = x.data();
  auto z = out.mutable_data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      real mx = -std::numeric_limits<real>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, in[base + j * s.inner]);
      real total = 0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const real e = std::exp(in[base + j * s.inner] - mx);
        z[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) z[base + j * s.inner] /= total;
    }
  }
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on, s] {
      real* dx = grad_of(xn);
      const auto& y = on->data;
      const auto& g = on->grad;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.n * s.inner + i;
          real dot = 0;
          for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
          for (std::size_t j = 0; j < s.n; ++j) {
            const std::size_t k = base + j * s.inner;
            dx[k] += y[k] * (g[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index) {
  const std::size_t classes = logits.shape().back();
  const std::size_t rows = logits.size() / classes;
  if (targets.size() != rows) {
    dim_error("cross_entropy", logits.shape(), Shape{targets.size()});
  }
  std::size_t count = 0;
  for (int t : targets) {
    if (t == ignore_index) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside [0, " + std::to_string(classes) + ")");
    }
    ++count;
  }
  // Softmax probabilities are kept for the backward pass.
  auto probs = std::make_shared<std::vector<real>>(logits.size(), real(0));
  double total = 0;
  auto in = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_index) continue;
    const real* row = in.data() + r * classes;
    real mx = *std::max_element(row, row + classes);
    double z = 0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(static_cast<double>(row[c] - mx));
    const double log_z = std::log(z) + mx;
    for (std::size_t c = 0; c < classes; ++c) (*probs)[r * classes + c] = static_cast<real>(std::exp(row[c] - log_z));
    total += log_z - row[targets[r]];
  }
  Tensor out = Tensor::scalar(count ? static_cast<real>(total / static_cast<double>(count)) : real(0));
  if (tracking({&logits})) {
    NodePtr ln = logits.node(), on = out.node();
    std::vector<int> tg(targets.begin(), targets.end());
    record(out, [ln, on, probs, tg = std::move(tg), ignore_index, classes, count] {
      real* dl = grad_of(ln);
      if (count == 0) return;
      const real g = on->grad[0] / static_cast<real>(count);
      for (std::size_t r = 0; r < tg.size(); ++r) {
        if (tg[r] == ignore_index) continue;
        for (std::size_t c = 0; c < classes; ++c) dl[r * classes + c] += g * (*probs)[r * classes + c];
        dl[r * classes + static_cast<std::size_t>(tg[r])] -= g;
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps) {
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d) dim_error("layer_norm", x.shape(), gamma.shape());
  const std::size_t rows = x.size() / d;
  auto xhat = std::make_shared<std::vector<real>>(x.size());
  auto inv_std = std::make_shared<std::vector<real>>(rows);
  Tensor out = Tensor::zeros(x.shape());
  auto in = x.data();
  auto z = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    const real* row = in.data() + r * d;
    double mu = 0;
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<double>(d);
    double var = 0;
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(d);
    const real is = static_cast<real>(1.0 / std::sqrt(var + eps));
    (*inv_std)[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const real h = static_cast<real>(row[i] - mu) * is;
      (*xhat)[r * d + i] = h;
      z[r * d + i] = h * gamma[i] + beta[i];
    }
  }
  if (tracking({&x, &gamma, &beta})) {
    NodePtr xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    record(out, [xn, gn, bn, on, xhat, inv_std, rows, d] {
      const auto& g = on->grad;
      real* dx = grad_of(xn);
      real* dg = grad_of(gn);
      real* db = grad_of(bn);
      std::vector<real> dh(d);
      for (std::size_t r = 0; r < rows; ++r) {
        real sum_dh = 0, sum_dh_h = 0;
        for (std::size_t i = 0; i < d; ++i) {
          const std::size_t k = r * d + i;
          if (dg) dg[i] += g[k] * (*xhat)[k];
          if (db) db[i] += g[k];
          dh[i] = g[k] * gn->data[i];
          sum_dh += dh[i];
          sum_dh_h += dh[i] * (*xhat)[k];
        }
        if (!dx) continue;
        const real scale_r = (*inv_std)[r] / static_cast<real>(d);
        for (std::size_t i = 0; i < d; ++i) {
          const std::size_t k = r * d + i;
          dx[k] += scale_r * (static_cast<real>(d) * dh[i] - sum_dh - (*xhat)[k] * sum_dh_h);
        }
      }
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> indices) {
  if (table.ndim() != 2) throw DimensionError("embedding_lookup: table must be 2-d, got " + shape_str(table.shape()));
  if (indices.empty()) throw DimensionError("embedding_lookup: no indices");
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  for (int i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= vocab) {
      throw IndexError("embedding_lookup: index " + std::to_string(i) + " outside table of " + std::to_string(vocab) + " rows");
    }
  }
  Tensor out = Tensor::zeros({indices.size(), width});
  auto z = out.mutable_data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto row = table.data().subspan(static_cast<std::size_t>(indices[r]) * width, width);
    std::copy(row.begin(), row.end(), z.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  if (tracking({&table})) {
    NodePtr tn = table.node(), on = out.node();
    std::vector<int> idx(indices.begin(), indices.end());
    record(out, [tn, on, idx = std::move(idx), width] {
      real* dt = grad_of(tn);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t i = 0; i < width; ++i) dt[static_cast<std::size_t>(idx[r]) * width + i] += on->grad[r * width + i];
      }
    });
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dParams p) {
  if (x.ndim() != 4 || weight.ndim() != 4 || x.dim(1) != weight.dim(1)) dim_error("conv2d", x.shape(), weight.shape());
  const std::size_t batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oc = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (bias.defined() && bias.size() != oc) dim_error("conv2d(bias)", weight.shape(), bias.shape());
  if (h + 2 * p.pad_h < kh || w + 2 * p.pad_w < kw || p.stride_h == 0 || p.stride_w == 0) {
    dim_error("conv2d", x.shape(), weight.shape());
  }
  const std::size_t ho = (h + 2 * p.pad_h - kh) / p.stride_h + 1;
  const std::size_t wo = (w + 2 * p.pad_w - kw) / p.stride_w + 1;
  const std::size_t ckk = ch * kh * kw, plane = ho * wo, cols = batch * plane;

  // im2col over the whole batch: [ckk, batch*plane]
  auto col = std::make_shared<std::vector<real>>(ckk * cols, real(0));
  auto in = x.data();
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        real* dst = col->data() + ((c * kh + i) * kw + j) * cols;
        for (std::size_t b = 0; b < batch; ++b) {
          const real* src = in.data() + (b * ch + c) * h * w;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * p.stride_h + i) - static_cast<std::ptrdiff_t>(p.pad_h);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * p.stride_w + j) - static_cast<std::ptrdiff_t>(p.pad_w);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              dst[b * plane + oy * wo + ox] = src[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)];
            }
          }
        }
      }
    }
  }
  std::vector<real> mat(oc * cols);
  gemm(false, false, oc, cols, ckk, real(1), weight.data().data(), ckk, col->data(), cols, real(0), mat.data(), cols);
  Tensor out = Tensor::zeros({batch, oc, ho, wo});
  auto z = out.mutable_data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < oc; ++o) {
      const real bv = bias.defined() ? bias[o] : real(0);
      const real* src = mat.data() + o * cols + b * plane;
      real* dst = z.data() + (b * oc + o) * plane;
      for (std::size_t q = 0; q < plane; ++q) dst[q] = src[q] + bv;
    }
  }
  if (tracking({&x, &weight, &bias})) {
    NodePtr xn = x.node(), wn = weight.node(), on = out.node();
    NodePtr bn = bias.defined() ? bias.node() : nullptr;
    record(out, [=] {
      std::vector<real> dmat(oc * cols);
      const auto& g = on->grad;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < oc; ++o) {
          std::copy_n(g.data() + (b * oc + o) * plane, plane, dmat.data() + o * cols + b * plane);
        }
      }
      if (real* db = grad_of(bn)) {
        for (std::size_t o = 0; o < oc; ++o) {
          real acc = 0;
          for (std::size_t q = 0; q < cols; ++q) acc += dmat[o * cols + q];
          db[o] += acc;
        }
      }
      if (real* dw = grad_of(wn)) {
        gemm(false, true, oc, ckk, cols, real(1), dmat.data(), cols, col->data(), cols, real(1), dw, ckk);
      }
      if (real* dx = grad_of(xn)) {
        std::vector<real> dcol(ckk * cols);
        gemm(true, false, ckk, cols, oc, real(1), wn->data.data(), ckk, dmat.data(), cols, real(0), dcol.data(), cols);
        for (std::size_t c = 0; c < ch; ++c) {
          for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
              const real* src = dcol.data() + ((c * kh + i) * kw + j) * cols;
              for (std::size_t b = 0; b < batch; ++b) {
                real* dst = dx + (b * ch + c) * h * w;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * p.stride_h + i) - static_cast<std::ptrdiff_t>(p.pad_h);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                  for (std::size_t ox = 0; ox < wo; ++ox) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * p.stride_w + j) - static_cast<std::ptrdiff_t>(p.pad_w);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                    dst[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)] += src[b * plane + oy * wo + ox];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor max_pool2d(const Tensor& x, Pool2dParams p) {
  if (x.ndim() != 4) throw DimensionError("max_pool2d: expected [B,C,H,W], got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h + 2 * p.pad_h < p.kernel_h || w + 2 * p.pad_w < p.kernel_w || p.stride_h == 0 || p.stride_w == 0 ||
      p.pad_h >= p.kernel_h || p.pad_w >= p.kernel_w) {
    throw DimensionError("max_pool2d: kernel/padding incompatible with input " + shape_str(x.shape()));
  }
  const std::size_t ho = (h + 2 * p.pad_h - p.kernel_h) / p.stride_h + 1;
  const std::size_t wo = (w + 2 * p.pad_w - p.kernel_w) / p.stride_w + 1;
  Tensor out = Tensor::zeros({x.dim(0), x.dim(1), ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  auto in = x.data();
  auto z = out.mutable_data();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        real best = -std::numeric_limits<real>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t i = 0; i < p.kernel_h; ++i) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * p.stride_h + i) - static_cast<std::ptrdiff_t>(p.pad_h);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t j = 0; j < p.kernel_w; ++j) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * p.stride_w + j) - static_cast<std::ptrdiff_t>(p.pad_w);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t k = pl * h * w + static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
            if (in[k] > best || std::isnan(in[k])) {
              best = in[k];
              best_idx = k;
            }
          }
        }
        const std::size_t o = (pl * ho + oy) * wo + ox;
        z[o] = best;
        (*argmax)[o] = best_idx;
      }
    }
  }
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on, argmax] {
      real* dx = grad_of(xn);
      for (std::size_t o = 0; o < on->grad.size(); ++o) dx[(*argmax)[o]] += on->grad[o];
    });
  }
  return out;
}

Tensor bilinear_sample(const Tensor& image, const Tensor& grid) {
  if (image.ndim() != 4 || grid.ndim() != 4 || grid.dim(3) != 2 || grid.dim(0) != image.dim(0)) {
    dim_error("bilinear_sample", image.shape(), grid.shape());
  }
  const std::size_t batch = image.dim(0), ch = image.dim(1), h = image.dim(2), w = image.dim(3);
  const std::size_t ho = grid.dim(1), wo = grid.dim(2);
  const real sx = static_cast<real>(w - 1) / 2, sy = static_cast<real>(h - 1) / 2;
  Tensor out = Tensor::zeros({batch, ch, ho, wo});
  auto img = image.data();
  auto gr = grid.data();
  auto z = out.mutable_data();

  // Reads pixel (y, x) of plane, zero outside.
  auto pixel = [h, w](const real* plane, std::ptrdiff_t y, std::ptrdiff_t x) -> real {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) return 0;
    return plane[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t q = 0; q < ho * wo; ++q) {
      const real px = (gr[(b * ho * wo + q) * 2] + 1) * sx;
      const real py = (gr[(b * ho * wo + q) * 2 + 1] + 1) * sy;
      const real fx = std::floor(px), fy = std::floor(py);
      const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
      const real ax = px - fx, ay = py - fy;
      for (std::size_t c = 0; c < ch; ++c) {
        const real* plane = img.data() + (b * ch + c) * h * w;
        const real v = (1 - ay) * ((1 - ax) * pixel(plane, y0, x0) + ax * pixel(plane, y0, x0 + 1)) +
                       ay * ((1 - ax) * pixel(plane, y0 + 1, x0) + ax * pixel(plane, y0 + 1, x0 + 1));
        z[(b * ch + c) * ho * wo + q] = v;
      }
    }
  }
  if (tracking({&image, &grid})) {
    NodePtr in_n = image.node(), gn = grid.node(), on = out.node();
    record(out, [=] {
      real* di = grad_of(in_n);
      real* dg = grad_of(gn);
      const auto& g = on->grad;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t q = 0; q < ho * wo; ++q) {
          const real px = (gn->data[(b * ho * wo + q) * 2] + 1) * sx;
          const real py = (gn->data[(b * ho * wo + q) * 2 + 1] + 1) * sy;
          const real fx = std::floor(px), fy = std::floor(py);
          const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
          const real ax = px - fx, ay = py - fy;
          real dpx = 0, dpy = 0;
          for (std::size_t c = 0; c < ch; ++c) {
            const real go = g[(b * ch + c) * ho * wo + q];
            const real* plane = in_n->data.data() + (b * ch + c) * h * w;
            const real v00 = pixel(plane, y0, x0), v01 = pixel(plane, y0, x0 + 1);
            const real v10 = pixel(plane, y0 + 1, x0), v11 = pixel(plane, y0 + 1, x0 + 1);
            dpx += go * ((1 - ay) * (v01 - v00) + ay * (v11 - v10));
            dpy += go * ((1 - ax) * (v10 - v00) + ax * (v11 - v01));
            if (di) {
              real* dplane = di + (b * ch + c) * h * w;
              const std::pair<std::ptrdiff_t, std::ptrdiff_t> taps[4] = {{y0, x0}, {y0, x0 + 1}, {y0 + 1, x0}, {y0 + 1, x0 + 1}};
              const real wts[4] = {(1 - ay) * (1 - ax), (1 - ay) * ax, ay * (1 - ax), ay * ax};
              for (int t = 0; t < 4; ++t) {
                const auto [yy, xx] = taps[t];
                if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx >= static_cast<std::ptrdiff_t>(w)) continue;
                dplane[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)] += go * wts[t];
              }
            }
          }
          if (dg) {
            dg[(b * ho * wo + q) * 2] += dpx * sx;
            dg[(b * ho * wo + q) * 2 + 1] += dpy * sy;
          }
        }
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) dim_error("reshape", x.shape(), shape);
  std::vector<real> values(x.data().begin(), x.data().end());
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on] {
      real* dx = grad_of(xn);
      for (std::size_t i = 0; i < on->grad.size(); ++i) dx[i] += on->grad[i];
    });
  }
  return out;
}

Tensor swap_axes12(const Tensor& x) {
  if (x.ndim() != 4) throw DimensionError("swap_axes12: expected rank 4, got " + shape_str(x.shape()));
  const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2), d = x.dim(3);
  Tensor out = Tensor::zeros({a, c, b, d});
  auto in = x.data();
  auto z = out.mutable_data();
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        std::copy_n(in.data() + ((i * b + j) * c + k) * d, d, z.data() + ((i * c + k) * b + j) * d);
      }
    }
  }
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on, a, b, c, d] {
      real* dx = grad_of(xn);
      for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
          for (std::size_t k = 0; k < c; ++k) {
            const real* src = on->grad.data() + ((i * c + k) * b + j) * d;
            real* dst = dx + ((i * b + j) * c + k) * d;
            for (std::size_t l = 0; l < d; ++l) dst[l] += src[l];
          }
        }
      }
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const std::size_t ax = resolve_axis(axis, parts[0].ndim(), "concat");
  Shape shape = parts[0].shape();
  std::size_t total = 0;
  for (const auto& t : parts) {
    Shape a = t.shape(), b = parts[0].shape();
    if (a.size() != b.size()) dim_error("concat", a, b);
    a[ax] = b[ax] = 0;
    if (a != b) dim_error("concat", t.shape(), parts[0].shape());
    total += t.dim(ax);
  }
  shape[ax] = total;
  const AxisSplit s = split_at(shape, ax);
  Tensor out = Tensor::zeros(shape);
  auto z = out.mutable_data();
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : parts) {
    offsets.push_back(off);
    const std::size_t n = t.dim(ax);
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(t.data().data() + o * n * s.inner, n * s.inner, z.data() + (o * total + off) * s.inner);
    }
    off += n;
  }
  std::vector<NodePtr> nodes;
  bool any = false;
  for (const auto& t : parts) {
    nodes.push_back(t.node());
    any = any || tracking({&t});
  }
  if (any) {
    NodePtr on = out.node();
    record(out, [nodes, offsets, on, s, total] {
      for (std::size_t p = 0; p < nodes.size(); ++p) {
        real* dp = grad_of(nodes[p]);
        if (!dp) continue;
        const std::size_t n = nodes[p]->data.size() / (s.outer * s.inner);
        for (std::size_t o = 0; o < s.outer; ++o) {
          const real* src = on->grad.data() + (o * total + offsets[p]) * s.inner;
          real* dst = dp + o * n * s.inner;
          for (std::size_t i = 0; i < n * s.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = resolve_axis(axis, x.ndim(), "slice");
  if (length == 0 || start + length > x.dim(ax)) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") outside axis of " + shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), ax);
  Shape shape = x.shape();
  shape[ax] = length;
  Tensor out = Tensor::zeros(shape);
  auto z = out.mutable_data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data().data() + (o * s.n + start) * s.inner, length * s.inner, z.data() + o * length * s.inner);
  }
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on, s, start, length] {
      real* dx = grad_of(xn);
      for (std::size_t o = 0; o < s.outer; ++o) {
        const real* src = on->grad.data() + o * length * s.inner;
        real* dst = dx + (o * s.n + start) * s.inner;
        for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0;
  for (real v : x.data()) acc += v;
  Tensor out = Tensor::scalar(static_cast<real>(acc));
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on] {
      real* dx = grad_of(xn);
      for (std::size_t i = 0; i < xn->data.size(); ++i) dx[i] += on->grad[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), real(1) / static_cast<real>(x.size())); }

Tensor dropout(const Tensor& x, real p, std::mt19937_64& rng) {
  if (p <= real(0)) return x;
  if (p >= real(1)) throw ConfigError("dropout probability must be < 1");
  const real keep_scale = real(1) / (real(1) - p);
  auto mask = std::make_shared<std::vector<real>>(x.size());
  for (auto& m : *mask) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = u >= static_cast<double>(p) ? keep_scale : real(0);
  }
  Tensor out = Tensor::zeros(x.shape());
  auto z = out.mutable_data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * (*mask)[i];
  if (tracking({&x})) {
    NodePtr xn = x.node(), on = out.node();
    record(out, [xn, on, mask] {
      real* dx = grad_of(xn);
      for (std::size_t i = 0; i < on->grad.size(); ++i) dx[i] += on->grad[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor pairwise_add(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
    dim_error("pairwise_add", a.shape(), b.shape());
  }
  const std::size_t batch = a.dim(0), n = a.dim(1), m = b.dim(1), hd = a.dim(2);
  Tensor out = Tensor::zeros({batch, n, m, hd});
  auto z = out.mutable_data();
  for (std::size_t bb = 0; bb < batch; ++bb) {
    for (std::size_t i = 0; i < n; ++i) {
      const real* ai = a.data().data() + (bb * n + i) * hd;
      for (std::size_t j = 0; j < m; ++j) {
        const real* bj = b.data().data() + (bb * m + j) * hd;
        real* dst = z.data() + ((bb * n + i) * m + j) * hd;
        for (std::size_t k = 0; k < hd; ++k) dst[k] = ai[k] + bj[k];
      }
    }
  }
  if (tracking({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    record(out, [an, bn, on, batch, n, m, hd] {
      real* da = grad_of(an);
      real* db = grad_of(bn);
      for (std::size_t bb = 0; bb < batch; ++bb) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            const real* g = on->grad.data() + ((bb * n + i) * m + j) * hd;
            if (da) {
              real* d = da + (bb * n + i) * hd;
              for (std::size_t k = 0; k < hd; ++k) d[k] += g[k];
            }
            if (db) {
              real* d = db + (bb * m + j) * hd;
              for (std::size_t k = 0; k < hd; ++k) d[k] += g[k];
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace sstr
