/*
 * Copyright 2026 The SegX Toolkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "segx/masks.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "segx/error.h"

namespace segx {
namespace {

void CheckDims(int width, int height, std::size_t n, const char* what) {
  if (width <= 0 || height <= 0) {
    throw ArgumentError(std::string(what) + ": dimensions must be positive, got " +
                        std::to_string(width) + "x" + std::to_string(height));
  }
  if (n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ArgumentError(std::string(what) + ": expected " +
                        std::to_string(static_cast<std::size_t>(width) * height) +
                        " values, got " + std::to_string(n));
  }
}

void CheckSameShape(const BinaryMask& a, const BinaryMask& b, const char* op) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ArgumentError(std::string(op) + ": dimension mismatch " +
                        std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                        " vs " + std::to_string(b.width()) + "x" +
                        std::to_string(b.height()));
  }
}

std::size_t IntersectionCount(const BinaryMask& a, const BinaryMask& b) {
  std::size_t n = 0;
  auto ab = a.bits();
  auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) n += (ab[i] & bb[i]);
  return n;
}

// Number of pixels kept by a top-fraction selection of p over n pixels.
std::size_t TopCount(double p, std::size_t n) {
  const double raw = p * static_cast<double>(n);
  // Absorb representation error such as 0.05 * 400 = 20.000000000000004.
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * raw));
  return std::clamp<std::size_t>(k, 1, n);
}

}  // namespace

SaliencyMap::SaliencyMap(int width, int height, std::vector<double> values,
                         bool normalized)
    : width_(width), height_(height), values_(std::move(values)),
      normalized_(normalized) {
  CheckDims(width_, height_, values_.size(), "SaliencyMap");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("SaliencyMap: non-finite value at pixel " +
                            std::to_string(i));
    }
  }
  if (normalized_) {
    auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    if (*lo < 0.0 || *hi > 1.0) {
      throw ValidationError("SaliencyMap: normalized flag set but values leave [0,1]");
    }
  }
}

SaliencyMap SaliencyMap::Zeros(int width, int height) {
  std::size_t n = width > 0 && height > 0 ? static_cast<std::size_t>(width) * height : 0;
  return SaliencyMap(width, height, std::vector<double>(n, 0.0), true);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  CheckDims(width_, height_, bits_.size(), "BinaryMask");
  for (auto& b : bits_) b = b ? 1 : 0;
}

BinaryMask BinaryMask::Empty(int width, int height) {
  std::size_t n = width > 0 && height > 0 ? static_cast<std::size_t>(width) * height : 0;
  return BinaryMask(width, height, std::vector<std::uint8_t>(n, 0));
}

BinaryMask BinaryMask::Full(int width, int height) {
  std::size_t n = width > 0 && height > 0 ? static_cast<std::size_t>(width) * height : 0;
  return BinaryMask(width, height, std::vector<std::uint8_t>(n, 1));
}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

SaliencyMap normalize(const SaliencyMap& map) {
  auto v = map.values();
  auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  std::vector<double> out(v.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = std::clamp((v[i] - lo) / range, 0.0, 1.0);
    }
  }
  return SaliencyMap(map.width(), map.height(), std::move(out), true);
}

BinaryMask threshold_top_fraction(const SaliencyMap& map, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ArgumentError("threshold_top_fraction: p must lie in (0,1], got " +
                        std::to_string(p));
  }
  const std::size_t n = map.size();
  const std::size_t k = TopCount(p, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto v = map.values();
  auto before = [&v](std::size_t a, std::size_t b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  };
  if (k < n) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                     order.end(), before);
  }
  std::vector<std::uint8_t> bits(n, 0);
  for (std::size_t i = 0; i < k; ++i) bits[order[i]] = 1;
  return BinaryMask(map.width(), map.height(), std::move(bits));
}

BinaryMask threshold_value(const SaliencyMap& map, double tau) {
  if (!map.normalized()) {
    throw StateError("threshold_value: saliency map is not normalized");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ArgumentError("threshold_value: tau must lie in [0,1], got " +
                        std::to_string(tau));
  }
  auto v = map.values();
  std::vector<std::uint8_t> bits(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) bits[i] = v[i] >= tau ? 1 : 0;
  return BinaryMask(map.width(), map.height(), std::move(bits));
}

BinaryMask intersect(const BinaryMask& a, const BinaryMask& b) {
  CheckSameShape(a, b, "intersect");
  std::vector<std::uint8_t> bits(a.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = a.bits()[i] & b.bits()[i];
  return BinaryMask(a.width(), a.height(), std::move(bits));
}

BinaryMask unite(const BinaryMask& a, const BinaryMask& b) {
  CheckSameShape(a, b, "unite");
  std::vector<std::uint8_t> bits(a.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = a.bits()[i] | b.bits()[i];
  return BinaryMask(a.width(), a.height(), std::move(bits));
}

bool is_subset(const BinaryMask& inner, const BinaryMask& outer) {
  CheckSameShape(inner, outer, "is_subset");
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner[i] && !outer[i]) return false;
  }
  return true;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  CheckSameShape(a, b, "iou");
  const std::size_t inter = IntersectionCount(a, b);
  const std::size_t uni = a.popcount() + b.popcount() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool iou_is_vacuous(const BinaryMask& a, const BinaryMask& b) {
  CheckSameShape(a, b, "iou");
  return a.empty() && b.empty();
}

BinaryMask sweep_mask(const SaliencyMap& map, double tau, ThresholdSweep sweep) {
  if (sweep == ThresholdSweep::kValue) return threshold_value(map, tau);
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ArgumentError("sweep_mask: tau must lie in [0,1]");
  }
  const double p = 1.0 - tau;
  if (p <= 0.0) return BinaryMask::Empty(map.width(), map.height());
  return threshold_top_fraction(map, p);
}

double auitc(const SaliencyMap& map, const BinaryMask& ref, int n_samples,
             ThresholdSweep sweep) {
  if (map.width() != ref.width() || map.height() != ref.height()) {
    throw ArgumentError("auitc: saliency and reference dimensions differ");
  }
  if (n_samples < 2) {
    throw ArgumentError("auitc: n_samples must be >= 2, got " +
                        std::to_string(n_samples));
  }
  if (!map.normalized()) {
    throw StateError("auitc: saliency map is not normalized");
  }
  const double step = 1.0 / static_cast<double>(n_samples - 1);
  double area = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double tau = i == n_samples - 1 ? 1.0 : i * step;
    const double cur = iou(ref, sweep_mask(map, tau, sweep));
    if (i > 0) area += 0.5 * (prev + cur) * step;
    prev = cur;
  }
  return std::clamp(area, 0.0, 1.0);
}

SaliencyMap resample(const SaliencyMap& map, int target_w, int target_h) {
  if (target_w <= 0 || target_h <= 0) {
    throw ArgumentError("resample: target dimensions must be positive");
  }
  if (target_w == map.width() && target_h == map.height()) return map;
  const int sw = map.width();
  const int sh = map.height();
  // Align-corners source coordinate of target index t.
  auto coord = [](int t, int src, int dst) {
    if (dst == 1 || src == 1) return 0.0;
    return static_cast<double>(t) * (src - 1) / (dst - 1);
  };
  std::vector<double> out(static_cast<std::size_t>(target_w) * target_h);
  for (int y = 0; y < target_h; ++y) {
    const double fy = coord(y, sh, target_h);
    const int y0 = std::min(static_cast<int>(std::floor(fy)), sh - 1);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target_w; ++x) {
      const double fx = coord(x, sw, target_w);
      const int x0 = std::min(static_cast<int>(std::floor(fx)), sw - 1);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - x0;
      const double top = map.at(x0, y0) * (1.0 - wx) + map.at(x1, y0) * wx;
      const double bot = map.at(x0, y1) * (1.0 - wx) + map.at(x1, y1) * wx;
      double v = top * (1.0 - wy) + bot * wy;
      if (map.normalized()) v = std::clamp(v, 0.0, 1.0);
      out[static_cast<std::size_t>(y) * target_w + x] = v;
    }
  }
  return SaliencyMap(target_w, target_h, std::move(out), map.normalized());
}

BinaryMask resample(const BinaryMask& mask, int target_w, int target_h) {
  if (target_w <= 0 || target_h <= 0) {
    throw ArgumentError("resample: target dimensions must be positive");
  }
  if (target_w == mask.width() && target_h == mask.height()) return mask;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(target_w) * target_h);
  for (int y = 0; y < target_h; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * mask.height() / target_h);
    for (int x = 0; x < target_w; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * mask.width() / target_w);
      bits[static_cast<std::size_t>(y) * target_w + x] = mask.at(sx, sy) ? 1 : 0;
    }
  }
  return BinaryMask(target_w, target_h, std::move(bits));
}

}  // namespace segx
