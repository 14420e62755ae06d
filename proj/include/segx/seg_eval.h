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

#ifndef SEGX_SEG_EVAL_H_
#define SEGX_SEG_EVAL_H_

#include <vector>

#include "segx/masks.h"

namespace segx {

// Per-pixel foreground probabilities from a segmentation model.
class SoftMask {
 public:
  SoftMask(int width, int height, std::vector<double> probs);
  static SoftMask FromBinary(const BinaryMask& mask);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  int width_;
  int height_;
  std::vector<double> probs_;
};

inline constexpr double kProbabilityClip = 1e-7;
inline constexpr double kDiceSmoothing = 1.0;

// Mean pixelwise binary cross-entropy with predictions clipped to
// [1e-7, 1 - 1e-7].
double cross_entropy_loss(const SoftMask& pred, const BinaryMask& gt);

// 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps), unclipped p.
double dice_loss(const SoftMask& pred, const BinaryMask& gt,
                 double epsilon = kDiceSmoothing);

// lambda * CE + (1 - lambda) * DiceLoss. lambda must lie in [0,1].
double composite_loss(const SoftMask& pred, const BinaryMask& gt, double lambda,
                      double epsilon = kDiceSmoothing);

// 2 |pred ∩ gt| / (|pred| + |gt|); two empty masks score 1.
double dice_score(const BinaryMask& pred, const BinaryMask& gt);

}  // namespace segx

#endif  // SEGX_SEG_EVAL_H_
