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
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "byzsim/error.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

// Row-major sample matrix with integer labels in [0, n_classes).
struct Dataset {
  std::size_t d_in = 0;
  int n_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::string provenance;

  std::size_t size() const { return labels.size(); }

  std::span<const double> Row(std::size_t i) const {
    return {features.data() + i * d_in, d_in};
  }

  void Validate() const {
    Require(d_in > 0 && n_classes >= 2, ErrorCode::kInvalidArgument,
            "Dataset: need d_in > 0 and at least two classes");
    Require(features.size() == labels.size() * d_in,
            ErrorCode::kInvalidArgument, "Dataset: feature/label count mismatch");
    for (int l : labels) {
      Require(l >= 0 && l < n_classes, ErrorCode::kInvalidArgument,
              "Dataset: label out of range");
    }
    for (double v : features) {
      Require(std::isfinite(v), ErrorCode::kInvalidArgument,
              "Dataset: non-finite feature");
    }
  }
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

// Gaussian class blobs. With two classes the centers sit at -margin/2 and
// +margin/2 on coordinate 0; with C > 2 class k sits at (margin/sqrt2) e_k,
// so every pair of centers is `margin` apart. Coordinates that carry a
// center offset get informative_std noise, the rest nuisance_std.
struct SyntheticParams {
  std::size_t d = 20;
  std::size_t n_samples = 5000;
  int n_classes = 2;
  double margin = 6.0;
  double informative_std = 1.0;
  double nuisance_std = 1.0;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

inline std::size_t InformativeDims(int n_classes) {
  return n_classes == 2 ? 1 : static_cast<std::size_t>(n_classes);
}

inline DatasetSplit MakeSyntheticDataset(const SyntheticParams& p) {
  Require(p.n_classes >= 2, ErrorCode::kInvalidArgument,
          "MakeSyntheticDataset: need at least two classes");
  const std::size_t info = InformativeDims(p.n_classes);
  Require(p.d >= info, ErrorCode::kInvalidArgument,
          "MakeSyntheticDataset: d too small for the class count");
  Require(p.n_samples >= 2, ErrorCode::kInvalidArgument,
          "MakeSyntheticDataset: need at least two samples");
  Require(p.margin >= 0.0 && p.informative_std >= 0.0 && p.nuisance_std >= 0.0,
          ErrorCode::kInvalidArgument,
          "MakeSyntheticDataset: margin and stds must be non-negative");
  Require(p.train_fraction > 0.0 && p.train_fraction < 1.0,
          ErrorCode::kInvalidArgument,
          "MakeSyntheticDataset: train_fraction must be in (0, 1)");
  const std::size_t c = static_cast<std::size_t>(p.n_classes);
  std::vector<std::vector<double>> centers(c, std::vector<double>(p.d, 0.0));
  if (c == 2) {
    centers[0][0] = -0.5 * p.margin;
    centers[1][0] = 0.5 * p.margin;
  } else {
    for (std::size_t k = 0; k < c; ++k) centers[k][k] = p.margin / std::sqrt(2.0);
  }

  Rng rng(p.seed);
  std::vector<int> labels(p.n_samples);
  for (std::size_t i = 0; i < p.n_samples; ++i) {
    labels[i] = static_cast<int>(i % c);
  }
  for (std::size_t i = p.n_samples - 1; i > 0; --i) {
    std::swap(labels[i], labels[rng.UniformInt(i + 1)]);
  }
  std::vector<double> feats(p.n_samples * p.d);
  for (std::size_t i = 0; i < p.n_samples; ++i) {
    const auto& ctr = centers[static_cast<std::size_t>(labels[i])];
    for (std::size_t j = 0; j < p.d; ++j) {
      const double s = j < info ? p.informative_std : p.nuisance_std;
      feats[i * p.d + j] = ctr[j] + s * rng.Normal();
    }
  }

  const std::size_t n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(
          std::llround(p.train_fraction * static_cast<double>(p.n_samples))),
      1, p.n_samples - 1);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "synthetic(d=%zu,n=%zu,C=%d,margin=%.17g,info_std=%.17g,"
                "nuisance_std=%.17g,seed=%llu)",
                p.d, p.n_samples, p.n_classes, p.margin, p.informative_std,
                p.nuisance_std, static_cast<unsigned long long>(p.seed));
  DatasetSplit out;
  for (Dataset* ds : {&out.train, &out.test}) {
    ds->d_in = p.d;
    ds->n_classes = p.n_classes;
    ds->provenance = buf;
  }
  out.train.labels.assign(labels.begin(), labels.begin() + n_train);
  out.train.features.assign(feats.begin(), feats.begin() + n_train * p.d);
  out.test.labels.assign(labels.begin() + n_train, labels.end());
  out.test.features.assign(feats.begin() + n_train * p.d, feats.end());
  return out;
}

namespace detail {

inline std::uint32_t ReadBe32(const std::vector<std::uint8_t>& b,
                              std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Decodes an IDX image file (u8, [n, rows, cols]) and label file (u8, [n]).
// Pixels are scaled to [0, 1].
inline Dataset ParseIdx(const std::vector<std::uint8_t>& images,
                        const std::vector<std::uint8_t>& labels,
                        const std::string& provenance = "idx") {
  if (images.size() < 4 || labels.size() < 4) {
    Fail(ErrorCode::kIdxTruncated, "IDX: file shorter than its magic number");
  }
  if (detail::ReadBe32(images, 0) != kIdxImageMagic) {
    Fail(ErrorCode::kIdxBadMagic, "IDX: image file magic is not 0x00000803");
  }
  if (detail::ReadBe32(labels, 0) != kIdxLabelMagic) {
    Fail(ErrorCode::kIdxBadMagic, "IDX: label file magic is not 0x00000801");
  }
  if (images.size() < 16 || labels.size() < 8) {
    Fail(ErrorCode::kIdxTruncated, "IDX: truncated header");
  }
  const std::size_t n = detail::ReadBe32(images, 4);
  const std::size_t rows = detail::ReadBe32(images, 8);
  const std::size_t cols = detail::ReadBe32(images, 12);
  const std::size_t n_labels = detail::ReadBe32(labels, 4);
  if (images.size() - 16 < n * rows * cols) {
    Fail(ErrorCode::kIdxTruncated, "IDX: image payload truncated");
  }
  if (labels.size() - 8 < n_labels) {
    Fail(ErrorCode::kIdxTruncated, "IDX: label payload truncated");
  }
  if (n != n_labels) {
    Fail(ErrorCode::kIdxCountMismatch, "IDX: image and label counts differ");
  }
  Require(rows * cols > 0, ErrorCode::kInvalidArgument, "IDX: empty images");
  Dataset ds;
  ds.d_in = rows * cols;
  ds.provenance = provenance;
  ds.features.resize(n * ds.d_in);
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    ds.features[i] = static_cast<double>(images[16 + i]) / 255.0;
  }
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = labels[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.n_classes = std::max(2, max_label + 1);
  return ds;
}

inline Dataset ReadIdx(const std::string& images_path,
                       const std::string& labels_path) {
  return ParseIdx(detail::ReadFileBytes(images_path),
                  detail::ReadFileBytes(labels_path),
                  "idx(" + images_path + "," + labels_path + ")");
}

}  // namespace byzsim
