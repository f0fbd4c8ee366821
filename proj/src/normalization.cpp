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

#include "sstr/normalization.hpp"

#include <cmath>
#include <sstream>

#include "sstr/errors.hpp"

namespace sstr {

NormalizationMode parse_normalization_mode(const std::string& name) {
  if (name == "identity" || name == "none") return NormalizationMode::kIdentity;
  if (name == "affine") return NormalizationMode::kAffine;
  if (name == "tps") return NormalizationMode::kTps;
  throw ConfigError("unknown normalization.mode '" + name + "' (expected identity, affine or tps)");
}

std::string to_string(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::kIdentity: return "identity";
    case NormalizationMode::kAffine: return "affine";
    case NormalizationMode::kTps: return "tps";
  }
  return "identity";
}

std::vector<Point2> canonical_fiducials(std::size_t k) {
  if (k < 4 || k % 2) throw ConfigError("fiducial count must be even and at least 4, got " + std::to_string(k));
  const std::size_t half = k / 2;
  std::vector<Point2> pts(k);
  for (std::size_t i = 0; i < half; ++i) {
    const double x = -0.9 + 1.8 * static_cast<double>(i) / static_cast<double>(half - 1);
    pts[i] = {x, -0.9};
    pts[half + i] = {x, 0.9};
  }
  return pts;
}

namespace {

double tps_kernel(double dx, double dy) {
  const double r2 = dx * dx + dy * dy;
  return r2 > 0 ? r2 * std::log(r2) : 0.0;
}

// In-place LU with partial pivoting; returns the inverse of the n x n
// row-major matrix `a`.
std::vector<double> invert(std::vector<double> a, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  double scale = 0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (std::abs(a[piv * n + col]) <= 1e-12 * std::max(scale, 1.0)) {
      throw NumericalError(
          "thin-plate spline system is singular (control points are collinear or coincide); "
          "spread the fiducials over both text edges");
    }
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a[col * n + c], a[piv * n + c]);
        std::swap(inv[col * n + c], inv[piv * n + c]);
      }
    }
    const double d = a[col * n + col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col * n + c] /= d;
      inv[col * n + c] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col];
      if (f == 0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r * n + c] -= f * a[col * n + c];
        inv[r * n + c] -= f * inv[col * n + c];
      }
    }
  }
  return inv;
}

double norm_coord(std::size_t i, std::size_t n) {
  return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0 : 0.0;
}

}  // namespace

TpsGrid::TpsGrid(const std::vector<Point2>& dst, std::size_t out_h, std::size_t out_w)
    : dst_(dst), out_h_(out_h), out_w_(out_w) {
  const std::size_t k = dst.size();
  if (k < 3) throw InputError("thin-plate spline needs at least 3 control points");
  const std::size_t n = k + 3;
  // [[K + ridge I, P], [P^T, 0]] with P rows [1, x, y].
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      l[i * n + j] = tps_kernel(dst[i].x - dst[j].x, dst[i].y - dst[j].y) + (i == j ? kTpsRidge : 0.0);
    }
    const double p[3] = {1.0, dst[i].x, dst[i].y};
    for (std::size_t c = 0; c < 3; ++c) {
      l[i * n + k + c] = p[c];
      l[(k + c) * n + i] = p[c];
    }
  }
  const std::vector<double> inv = invert(std::move(l), n);
  // Only the columns that multiply the source points matter; the rest of
  // the right-hand side is zero.
  inv_.assign(n * k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) inv_[r * k + c] = inv[r * n + c];
  }
  const std::size_t hw = out_h * out_w;
  std::vector<real> full(hw * k), affine(hw * k);
  std::vector<double> basis(n);
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      const double px = norm_coord(x, out_w), py = norm_coord(y, out_h);
      for (std::size_t j = 0; j < k; ++j) basis[j] = tps_kernel(px - dst[j].x, py - dst[j].y);
      basis[k] = 1.0;
      basis[k + 1] = px;
      basis[k + 2] = py;
      const std::size_t row = y * out_w + x;
      for (std::size_t c = 0; c < k; ++c) {
        double f = 0, a = 0;
        for (std::size_t r = 0; r < n; ++r) {
          const double term = basis[r] * inv_[r * k + c];
          f += term;
          if (r >= k) a += term;
        }
        full[row * k + c] = static_cast<real>(f);
        affine[row * k + c] = static_cast<real>(a);
      }
    }
  }
  full_ = Tensor::from({hw, k}, std::move(full));
  affine_ = Tensor::from({hw, k}, std::move(affine));
}

Tensor TpsGrid::operator()(const Tensor& src, bool affine_only) const {
  const std::size_t k = dst_.size();
  if (src.ndim() != 3 || src.dim(1) != k || src.dim(2) != 2) {
    throw DimensionError("tps grid expects source points [B," + std::to_string(k) + ",2], got " + shape_str(src.shape()));
  }
  const std::size_t b = src.dim(0);
  // [B,K,2] -> [K, B*2] so one matmul serves the whole batch.
  const Tensor cols = reshape(swap_axes12(reshape(src, {1, b, k, 2})), {k, b * 2});
  const Tensor g = matmul(affine_only ? affine_ : full_, cols);  // [HW, B*2]
  return reshape(swap_axes12(reshape(g, {1, out_h_ * out_w_, b, 2})), {b, out_h_, out_w_, 2});
}

Point2 TpsGrid::map(const std::vector<Point2>& src, Point2 p, bool affine_only) const {
  const std::size_t k = dst_.size();
  if (src.size() != k) throw DimensionError("source and target point counts differ");
  std::vector<double> basis(k + 3);
  for (std::size_t j = 0; j < k; ++j) basis[j] = affine_only ? 0.0 : tps_kernel(p.x - dst_[j].x, p.y - dst_[j].y);
  basis[k] = 1.0;
  basis[k + 1] = p.x;
  basis[k + 2] = p.y;
  Point2 out;
  for (std::size_t r = 0; r < k + 3; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const double w = basis[r] * inv_[r * k + c];
      out.x += w * src[c].x;
      out.y += w * src[c].y;
    }
  }
  return out;
}

Tensor tps_grid(const std::vector<Point2>& src, const std::vector<Point2>& dst, std::size_t out_h, std::size_t out_w,
                bool affine_only) {
  if (src.size() != dst.size()) {
    throw DimensionError("tps_grid: " + std::to_string(src.size()) + " source points vs " + std::to_string(dst.size()) + " targets");
  }
  std::vector<real> flat;
  for (const auto& p : src) {
    flat.push_back(static_cast<real>(p.x));
    flat.push_back(static_cast<real>(p.y));
  }
  return TpsGrid(dst, out_h, out_w)(Tensor::from({1, src.size(), 2}, std::move(flat)), affine_only);
}

Tensor identity_grid(std::size_t h, std::size_t w) {
  std::vector<real> g(h * w * 2);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      g[(y * w + x) * 2] = static_cast<real>(norm_coord(x, w));
      g[(y * w + x) * 2 + 1] = static_cast<real>(norm_coord(y, h));
    }
  }
  return Tensor::from({1, h, w, 2}, std::move(g));
}

Localizer::Localizer(std::size_t k_points, std::size_t h, std::size_t w, Rng& rng) : k(k_points), in_h(h), in_w(w) {
  if (h < 8 || w < 8) throw ConfigError("localizer input must be at least 8x8");
  conv1 = Conv2d(1, 8, 3, 1, rng);
  conv2 = Conv2d(8, 16, 3, 1, rng);
  conv3 = Conv2d(16, 32, 3, 1, rng);
  const std::size_t flat = 32 * (h / 8) * (w / 8);
  fc1 = Linear(flat, 32, true, rng);
  fc2 = Linear(32, 2 * k, true, rng);
  for (auto& v : fc2.weight.mutable_data()) v = 0;
  const auto canon = canonical_fiducials(k);
  auto bias = fc2.bias.mutable_data();
  for (std::size_t i = 0; i < k; ++i) {
    bias[2 * i] = static_cast<real>(std::atanh(canon[i].x));
    bias[2 * i + 1] = static_cast<real>(std::atanh(canon[i].y));
  }
}

Tensor Localizer::operator()(const Tensor& images) const {
  if (images.ndim() != 4 || images.dim(1) != 1 || images.dim(2) != in_h || images.dim(3) != in_w) {
    throw DimensionError("localizer expects [B,1," + std::to_string(in_h) + "," + std::to_string(in_w) + "], got " +
                         shape_str(images.shape()));
  }
  const std::size_t b = images.dim(0);
  Tensor x = max_pool2d(relu(conv1(images)));
  x = max_pool2d(relu(conv2(x)));
  x = max_pool2d(relu(conv3(x)));
  x = reshape(x, {b, x.size() / b});
  x = relu(fc1(x));
  return reshape(tanh(fc2(x)), {b, k, 2});
}

void Localizer::collect(ParamList& out, std::string_view prefix) const {
  conv1.collect(out, join_name(prefix, "conv1"));
  conv2.collect(out, join_name(prefix, "conv2"));
  conv3.collect(out, join_name(prefix, "conv3"));
  fc1.collect(out, join_name(prefix, "fc1"));
  fc2.collect(out, join_name(prefix, "fc2"));
}

Normalizer::Normalizer(NormalizationMode mode, std::size_t h, std::size_t w, Rng& rng, std::size_t k)
    : mode_(mode), h_(h), w_(w) {
  if (mode == NormalizationMode::kIdentity) return;
  localizer = Localizer(k, h, w, rng);
  grid = TpsGrid(canonical_fiducials(k), h, w);
}

Tensor Normalizer::fiducials(const Tensor& images) const {
  if (mode_ == NormalizationMode::kIdentity) throw ConfigError("identity normalization has no fiducials");
  return localizer(images);
}

Tensor Normalizer::operator()(const Tensor& images) const {
  if (images.ndim() != 4 || images.dim(1) != 1 || images.dim(2) != h_ || images.dim(3) != w_) {
    throw DimensionError("normalization expects [B,1," + std::to_string(h_) + "," + std::to_string(w_) + "], got " +
                         shape_str(images.shape()));
  }
  if (mode_ == NormalizationMode::kIdentity) return images;
  const Tensor g = grid(localizer(images), mode_ == NormalizationMode::kAffine);
  return bilinear_sample(images, g);
}

void Normalizer::collect(ParamList& out, std::string_view prefix) const {
  if (mode_ == NormalizationMode::kIdentity) return;
  localizer.collect(out, join_name(prefix, "localizer"));
}

}  // namespace sstr
