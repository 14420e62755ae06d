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

#ifndef SEGX_MASKS_H_
#define SEGX_MASKS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace segx {

// Real-valued explanation grid, row-major. Immutable after construction.
class SaliencyMap {
 public:
  // Throws ArgumentError on bad dimensions, ValidationError on non-finite
  // values or on a `normalized` flag that the values contradict.
  SaliencyMap(int width, int height, std::vector<double> values,
              bool normalized = false);

  static SaliencyMap Zeros(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool normalized() const { return normalized_; }
  std::span<const double> values() const { return values_; }
  double at(int x, int y) const { return values_[Index(x, y)]; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::size_t Index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_;
  int height_;
  std::vector<double> values_;
  bool normalized_;
};

// Binary pixel set, row-major.
class BinaryMask {
 public:
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  static BinaryMask Empty(int width, int height);
  static BinaryMask Full(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }
  bool at(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t popcount() const;
  bool empty() const { return popcount() == 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;  // 0 or 1
};

// Min-max normalization to [0,1]. A constant map becomes all zeros.
SaliencyMap normalize(const SaliencyMap& map);

// Selects exactly ceil(p * W * H) pixels with the highest saliency. Ties are
// broken by ascending row-major index.
BinaryMask threshold_top_fraction(const SaliencyMap& map, double p);

// Pixel set iff value >= tau. Requires a normalized map and tau in [0,1].
BinaryMask threshold_value(const SaliencyMap& map, double tau);

BinaryMask intersect(const BinaryMask& a, const BinaryMask& b);
BinaryMask unite(const BinaryMask& a, const BinaryMask& b);

// True when every pixel of `inner` is also set in `outer`.
bool is_subset(const BinaryMask& inner, const BinaryMask& outer);

// |a ∩ b| / |a ∪ b|. Two empty masks give 1.0; check
// iou_is_vacuous() to tell that case apart from a real perfect overlap.
double iou(const BinaryMask& a, const BinaryMask& b);
bool iou_is_vacuous(const BinaryMask& a, const BinaryMask& b);

// How the AUITC threshold tau is interpreted.
enum class ThresholdSweep {
  kValue,     // m(tau) = { v >= tau } on the normalized map
  kFraction,  // m(tau) = top (1 - tau) fraction of pixels
};

inline constexpr int kDefaultAuitcSamples = 101;

// Mask produced at sweep position tau for the given sweep kind.
BinaryMask sweep_mask(const SaliencyMap& map, double tau, ThresholdSweep sweep);

// Trapezoidal area under tau -> IoU(ref, m(tau)) over n_samples uniform
// points of [0,1], endpoints included. `map` must be normalized.
double auitc(const SaliencyMap& map, const BinaryMask& ref,
             int n_samples = kDefaultAuitcSamples,
             ThresholdSweep sweep = ThresholdSweep::kValue);

// Bilinear (align-corners) resampling for saliency, nearest-neighbor for
// masks. Same-size resampling returns an identical copy.
SaliencyMap resample(const SaliencyMap& map, int target_w, int target_h);
BinaryMask resample(const BinaryMask& mask, int target_w, int target_h);

}  // namespace segx

#endif  // SEGX_MASKS_H_
