/*
 * Copyright 2026 The byzsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "byzsim/datasets.hpp"
#include "byzsim/error.hpp"
#include "byzsim/gradients.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

// A set of rows of a dataset. With flip_labels every label l is read as
// C - 1 - l.
struct BatchView {
  const Dataset* data = nullptr;
  std::span<const std::size_t> rows;
  bool flip_labels = false;

  int Label(std::size_t r) const {
    const int l = data->labels[r];
    return flip_labels ? data->n_classes - 1 - l : l;
  }
};

class Model {
 public:
  virtual ~Model() = default;
  virtual std::size_t NumParams() const = 0;
  virtual GradientVector InitParams(std::uint64_t seed) const = 0;
  // Mean cross-entropy over the batch plus (weight_decay/2)||params||^2.
  // Writes the gradient into *grad when grad is non-null.
  virtual double LossAndGradient(GradientSpan params, const BatchView& batch,
                                 double weight_decay,
                                 GradientVector* grad) const = 0;
  virtual int Predict(GradientSpan params, std::span<const double> x) const = 0;
};

namespace detail {

// log(1 + exp(z)) without overflow.
inline double Softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// In-place softmax; returns log-sum-exp of the input.
inline double SoftmaxInPlace(std::span<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    s += x;
  }
  for (double& x : v) x /= s;
  return mx + std::log(s);
}

inline void AddWeightDecay(GradientSpan params, double wd, double& loss,
                           GradientVector* grad) {
  if (wd == 0.0) return;
  loss += 0.5 * wd * Dot(params, params);
  if (grad != nullptr) Axpy(wd, params, *grad);
}

inline void CheckBatch(const BatchView& b, std::size_t d_in, int classes) {
  Require(b.data != nullptr, ErrorCode::kInvalidArgument, "batch: no dataset");
  Require(!b.rows.empty(), ErrorCode::kEmptyInput, "batch: no rows");
  Require(b.data->d_in == d_in && b.data->n_classes == classes,
          ErrorCode::kDimensionMismatch, "batch: dataset shape differs from model");
}

}  // namespace detail

// Linear classifier. Two classes use a single sigmoid logit (d_in + 1
// parameters: weights then bias); more classes use a softmax with one
// weight row and bias per class, laid out row by row.
class LogisticRegression final : public Model {
 public:
  LogisticRegression(std::size_t d_in, int n_classes)
      : d_in_(d_in), classes_(n_classes) {
    Require(d_in > 0 && n_classes >= 2, ErrorCode::kInvalidArgument,
            "LogisticRegression: need d_in > 0 and two or more classes");
  }

  bool binary() const { return classes_ == 2; }

  std::size_t NumParams() const override {
    return binary() ? d_in_ + 1
                    : static_cast<std::size_t>(classes_) * (d_in_ + 1);
  }

  GradientVector InitParams(std::uint64_t) const override {
    return GradientVector(NumParams(), 0.0);
  }

  double LossAndGradient(GradientSpan params, const BatchView& batch,
                         double weight_decay,
                         GradientVector* grad) const override {
    detail::CheckBatch(batch, d_in_, classes_);
    Require(params.size() == NumParams(), ErrorCode::kDimensionMismatch,
            "LogisticRegression: parameter count");
    if (grad != nullptr) grad->assign(NumParams(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.rows.size());
    double loss = 0.0;
    if (binary()) {
      for (std::size_t r : batch.rows) {
        const auto x = batch.data->Row(r);
        double z = params[d_in_];
        for (std::size_t j = 0; j < d_in_; ++j) z += params[j] * x[j];
        const double y = batch.Label(r) == 1 ? 1.0 : 0.0;
        loss += detail::Softplus(z) - y * z;
        if (grad != nullptr) {
          const double e = (detail::Sigmoid(z) - y) * inv;
          for (std::size_t j = 0; j < d_in_; ++j) (*grad)[j] += e * x[j];
          (*grad)[d_in_] += e;
        }
      }
    } else {
      const std::size_t c = static_cast<std::size_t>(classes_);
      const std::size_t stride = d_in_ + 1;
      std::vector<double> logits(c);
      for (std::size_t r : batch.rows) {
        const auto x = batch.data->Row(r);
        for (std::size_t k = 0; k < c; ++k) {
          const double* w = params.data() + k * stride;
          double z = w[d_in_];
          for (std::size_t j = 0; j < d_in_; ++j) z += w[j] * x[j];
          logits[k] = z;
        }
        const std::size_t y = static_cast<std::size_t>(batch.Label(r));
        const double zy = logits[y];
        const double lse = detail::SoftmaxInPlace(logits);
        loss += lse - zy;
        if (grad != nullptr) {
          for (std::size_t k = 0; k < c; ++k) {
            const double e = (logits[k] - (k == y ? 1.0 : 0.0)) * inv;
            double* g = grad->data() + k * stride;
            for (std::size_t j = 0; j < d_in_; ++j) g[j] += e * x[j];
            g[d_in_] += e;
          }
        }
      }
    }
    loss *= inv;
    detail::AddWeightDecay(params, weight_decay, loss, grad);
    return loss;
  }

  int Predict(GradientSpan params, std::span<const double> x) const override {
    if (binary()) {
      double z = params[d_in_];
      for (std::size_t j = 0; j < d_in_; ++j) z += params[j] * x[j];
      return z > 0.0 ? 1 : 0;
    }
    const std::size_t stride = d_in_ + 1;
    int best = 0;
    double best_z = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < classes_; ++k) {
      const double* w = params.data() + static_cast<std::size_t>(k) * stride;
      double z = w[d_in_];
      for (std::size_t j = 0; j < d_in_; ++j) z += w[j] * x[j];
      if (z > best_z) {
        best_z = z;
        best = k;
      }
    }
    return best;
  }

 private:
  std::size_t d_in_;
  int classes_;
};

// Fully connected ReLU network with a softmax output. Each layer stores its
// weight matrix (out x in, row-major) followed by its bias.
class Mlp final : public Model {
 public:
  Mlp(std::size_t d_in, std::vector<std::size_t> hidden, int n_classes)
      : classes_(n_classes) {
    Require(d_in > 0 && n_classes >= 2, ErrorCode::kInvalidArgument,
            "Mlp: need d_in > 0 and two or more classes");
    widths_.push_back(d_in);
    for (std::size_t h : hidden) {
      Require(h > 0, ErrorCode::kInvalidArgument, "Mlp: zero-width layer");
      widths_.push_back(h);
    }
    widths_.push_back(static_cast<std::size_t>(n_classes));
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      offsets_.push_back(off);
      off += widths_[l + 1] * (widths_[l] + 1);
    }
    num_params_ = off;
  }

  std::size_t NumParams() const override { return num_params_; }

  GradientVector InitParams(std::uint64_t seed) const override {
    GradientVector p(num_params_, 0.0);
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const std::size_t in = widths_[l];
      const std::size_t out = widths_[l + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (std::size_t k = 0; k < out * in; ++k) {
        p[offsets_[l] + k] = bound * (2.0 * rng.Uniform() - 1.0);
      }
    }
    return p;
  }

  double LossAndGradient(GradientSpan params, const BatchView& batch,
                         double weight_decay,
                         GradientVector* grad) const override {
    detail::CheckBatch(batch, widths_.front(), classes_);
    Require(params.size() == num_params_, ErrorCode::kDimensionMismatch,
            "Mlp: parameter count");
    if (grad != nullptr) grad->assign(num_params_, 0.0);
    const std::size_t layers = widths_.size() - 1;
    const double inv = 1.0 / static_cast<double>(batch.rows.size());
    std::vector<std::vector<double>> acts(layers + 1);
    std::vector<double> delta, prev_delta;
    double loss = 0.0;
    for (std::size_t r : batch.rows) {
      Forward(params, batch.data->Row(r), acts);
      std::vector<double>& out = acts[layers];
      const std::size_t y = static_cast<std::size_t>(batch.Label(r));
      const double zy = out[y];
      loss += detail::SoftmaxInPlace(out) - zy;
      if (grad == nullptr) continue;
      delta = out;
      delta[y] -= 1.0;
      for (double& v : delta) v *= inv;
      for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = widths_[l];
        const std::size_t outw = widths_[l + 1];
        double* gw = grad->data() + offsets_[l];
        double* gb = gw + outw * in;
        const auto& a = acts[l];
        for (std::size_t o = 0; o < outw; ++o) {
          for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * a[i];
          gb[o] += delta[o];
        }
        if (l == 0) break;
        const double* w = params.data() + offsets_[l];
        prev_delta.assign(in, 0.0);
        for (std::size_t o = 0; o < outw; ++o) {
          for (std::size_t i = 0; i < in; ++i) {
            prev_delta[i] += w[o * in + i] * delta[o];
          }
        }
        for (std::size_t i = 0; i < in; ++i) {
          if (a[i] <= 0.0) prev_delta[i] = 0.0;
        }
        delta.swap(prev_delta);
      }
    }
    loss *= inv;
    detail::AddWeightDecay(params, weight_decay, loss, grad);
    return loss;
  }

  int Predict(GradientSpan params, std::span<const double> x) const override {
    std::vector<std::vector<double>> acts(widths_.size());
    Forward(params, x, acts);
    const auto& out = acts.back();
    return static_cast<int>(std::max_element(out.begin(), out.end()) -
                            out.begin());
  }

 private:
  // acts[0] is the input, acts[l] the post-ReLU activation of layer l, and
  // the last entry holds raw logits.
  void Forward(GradientSpan params, std::span<const double> x,
               std::vector<std::vector<double>>& acts) const {
    const std::size_t layers = widths_.size() - 1;
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = widths_[l];
      const std::size_t outw = widths_[l + 1];
      const double* w = params.data() + offsets_[l];
      const double* b = w + outw * in;
      auto& a = acts[l + 1];
      a.assign(outw, 0.0);
      for (std::size_t o = 0; o < outw; ++o) {
        double z = b[o];
        for (std::size_t i = 0; i < in; ++i) z += w[o * in + i] * acts[l][i];
        a[o] = (l + 1 < layers) ? std::max(0.0, z) : z;
      }
    }
  }

  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  std::size_t num_params_ = 0;
  int classes_;
};

inline double Accuracy(const Model& model, GradientSpan params,
                       const Dataset& data) {
  Require(data.size() > 0, ErrorCode::kEmptyInput, "Accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (model.Predict(params, data.Row(i)) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace byzsim
