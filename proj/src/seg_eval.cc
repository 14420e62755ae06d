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

#include "segx/seg_eval.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "segx/error.h"

namespace segx {
namespace {

template <typename A, typename B>
void CheckSameShape(const A& a, const B& b, const char* op) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ArgumentError(std::string(op) + ": dimension mismatch");
  }
}

}  // namespace

SoftMask::SoftMask(int width, int height, std::vector<double> probs)
    : width_(width), height_(height), probs_(std::move(probs)) {
  if (width <= 0 || height <= 0 ||
      probs_.size() != static_cast<std::size_t>(width) * height) {
    throw ArgumentError("SoftMask: bad dimensions");
  }
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (!std::isfinite(probs_[i]) || probs_[i] < 0.0 || probs_[i] > 1.0) {
      throw ValidationError("SoftMask: probability outside [0,1] at pixel " +
                            std::to_string(i));
    }
  }
}

SoftMask SoftMask::FromBinary(const BinaryMask& mask) {
  std::vector<double> p(mask.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = mask[i] ? 1.0 : 0.0;
  return SoftMask(mask.width(), mask.height(), std::move(p));
}

double cross_entropy_loss(const SoftMask& pred, const BinaryMask& gt) {
  CheckSameShape(pred, gt, "cross_entropy_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kProbabilityClip, 1.0 - kProbabilityClip);
    total += gt[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(pred.size());
}

double dice_loss(const SoftMask& pred, const BinaryMask& gt, double epsilon) {
  CheckSameShape(pred, gt, "dice_loss");
  if (!(epsilon >= 0.0)) throw ArgumentError("dice_loss: epsilon must be >= 0");
  double overlap = 0.0;
  double sum_p = 0.0;
  double sum_g = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double g = gt[i] ? 1.0 : 0.0;
    overlap += pred[i] * g;
    sum_p += pred[i];
    sum_g += g;
  }
  const double denom = sum_p + sum_g + epsilon;
  if (denom == 0.0) return 0.0;  // epsilon = 0 and both empty
  return 1.0 - (2.0 * overlap + epsilon) / denom;
}

double composite_loss(const SoftMask& pred, const BinaryMask& gt, double lambda,
                      double epsilon) {
  CheckSameShape(pred, gt, "composite_loss");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ArgumentError("composite_loss: lambda must lie in [0,1], got " +
                        std::to_string(lambda));
  }
  // Skip the unused term so each endpoint depends on its own term only.
  if (lambda == 1.0) return cross_entropy_loss(pred, gt);
  if (lambda == 0.0) return dice_loss(pred, gt, epsilon);
  return lambda * cross_entropy_loss(pred, gt) +
         (1.0 - lambda) * dice_loss(pred, gt, epsilon);
}

double dice_score(const BinaryMask& pred, const BinaryMask& gt) {
  CheckSameShape(pred, gt, "dice_score");
  const std::size_t total = pred.popcount() + gt.popcount();
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(intersect(pred, gt).popcount()) /
         static_cast<double>(total);
}

}  // namespace segx
