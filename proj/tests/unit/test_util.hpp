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

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "sstr/nn.hpp"
#include "sstr/ops.hpp"
#include "sstr/tensor.hpp"

namespace sstr::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<real> v(numel(shape));
  for (auto& x : v) x = static_cast<real>(u(rng));
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// sum(out * r) for a fixed random r, so every output element reaches the
// loss with a distinct coefficient.
inline Tensor weighted_sum(const Tensor& out, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(out, random_tensor(out.shape(), rng)));
}

struct GradCheck {
  double rel_error = 0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  std::size_t checked = 0;
  double analytic_norm = 0;
};

// Central finite differences on up to `max_per_leaf` randomly chosen
// elements of each leaf (all of them when 0).
inline GradCheck gradcheck(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& leaves, double h = 1e-3,
                           std::size_t max_per_leaf = 0, std::uint64_t seed = 7) {
  for (Tensor t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    tape.backward(loss_fn());
  }
  Rng rng(seed);
  double diff2 = 0, a2 = 0, n2 = 0;
  GradCheck out;
  for (Tensor t : leaves) {
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (max_per_leaf && idx.size() > max_per_leaf) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_leaf);
    }
    const std::vector<real> grad = t.has_grad() ? std::vector<real>(t.grad().begin(), t.grad().end())
                                                : std::vector<real>(t.size(), real(0));
    for (std::size_t i : idx) {
      const real saved = t.data()[i];
      t.mutable_data()[i] = saved + static_cast<real>(h);
      const double up = static_cast<double>(loss_fn().item());
      t.mutable_data()[i] = saved - static_cast<real>(h);
      const double down = static_cast<double>(loss_fn().item());
      t.mutable_data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = static_cast<double>(grad[i]);
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      ++out.checked;
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  out.rel_error = std::sqrt(diff2) / denom;
  out.analytic_norm = std::sqrt(a2);
  return out;
}

inline std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("sstr_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace sstr::testing
