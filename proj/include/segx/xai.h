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

#ifndef SEGX_XAI_H_
#define SEGX_XAI_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segx/image.h"
#include "segx/masks.h"
#include "segx/tinynet.h"

namespace segx {

// Gradient access to the last convolutional block. Only white-box models
// provide it.
class WhiteBoxHooks {
 public:
  virtual ~WhiteBoxHooks() = default;
  virtual ForwardTrace Trace(const Image& image) const = 0;
  virtual FeatureVolume LogitGradients(const ForwardTrace& trace, int class_j) const = 0;
};

// Boundary between explanation methods and the classifier. forward() must
// be deterministic for a fixed input.
class ModelAdapter {
 public:
  virtual ~ModelAdapter() = default;
  virtual int n_classes() const = 0;
  virtual std::vector<double> Forward(const Image& image) const = 0;
  virtual const WhiteBoxHooks* hooks() const { return nullptr; }
};

class TinyNetAdapter : public ModelAdapter, public WhiteBoxHooks {
 public:
  explicit TinyNetAdapter(const TinyNet& net) : net_(net) {}

  int n_classes() const override { return net_.n_classes(); }
  std::vector<double> Forward(const Image& image) const override {
    return net_.Probabilities(image);
  }
  const WhiteBoxHooks* hooks() const override { return this; }

  ForwardTrace Trace(const Image& image) const override { return net_.Forward(image); }
  FeatureVolume LogitGradients(const ForwardTrace& trace, int class_j) const override {
    return net_.LogitGradients(trace, class_j);
  }

 private:
  const TinyNet& net_;
};

// Black-box adapter over an arbitrary function.
class FunctionAdapter : public ModelAdapter {
 public:
  using Fn = std::function<std::vector<double>(const Image&)>;
  FunctionAdapter(int n_classes, Fn fn) : n_classes_(n_classes), fn_(std::move(fn)) {}

  int n_classes() const override { return n_classes_; }
  std::vector<double> Forward(const Image& image) const override { return fn_(image); }

 private:
  int n_classes_;
  Fn fn_;
};

// rows x cols rectangular regions covering the image. Region of pixel
// (x, y) is (y * rows / H) * cols + (x * cols / W).
class SuperpixelGrid {
 public:
  SuperpixelGrid(int rows, int cols, int width, int height);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int region_count() const { return rows_ * cols_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int region(int x, int y) const {
    return region_of_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<const int> region_map() const { return region_of_; }

 private:
  int rows_;
  int cols_;
  int width_;
  int height_;
  std::vector<int> region_of_;
};

// Grad-CAM at the last convolutional block, before upsampling and
// normalization: ReLU(sum_k alpha_k A_k), alpha_k the spatial mean of
// d logit_j / d A_k.
SaliencyMap grad_cam_raw(const ModelAdapter& adapter, const Image& image, int class_j);

// Grad-CAM upsampled bilinearly to the image size and min-max normalized.
SaliencyMap grad_cam(const ModelAdapter& adapter, const Image& image, int class_j);

enum class AttributionPolarity { kPositive, kAbsolute };

struct KernelShapOptions {
  int n_coalitions = 2048;   // sampled mode only, includes empty and full
  std::uint64_t seed = 0;
  int exact_max_regions = 12;
  AttributionPolarity polarity = AttributionPolarity::kPositive;
  std::optional<std::vector<double>> baseline;  // per channel; image mean if unset
  int jobs = 1;
};

struct ShapAttribution {
  std::vector<double> phi;    // per region
  double base_value = 0.0;    // f(baseline)
  double full_value = 0.0;    // f(image)
  bool exact_enumeration = false;
  bool least_norm_fallback = false;  // regression system was rank deficient
  std::size_t evaluations = 0;
};

// Value of a coalition: z[i] = 1 keeps region i, 0 replaces it by baseline.
using CoalitionGame = std::function<double(std::span<const std::uint8_t>)>;

// Builds the game "probability of class_j on the partially masked image".
CoalitionGame MaskingGame(const ModelAdapter& adapter, const Image& image,
                          const SuperpixelGrid& grid, int class_j,
                          std::span<const double> baseline);

// Shapley-kernel weighted least squares with f(empty) and the efficiency
// sum enforced as hard constraints.
ShapAttribution kernel_shap_game(const CoalitionGame& game, int n_regions,
                                 const KernelShapOptions& options);

ShapAttribution kernel_shap_attributions(const ModelAdapter& adapter, const Image& image,
                                         const SuperpixelGrid& grid, int class_j,
                                         const KernelShapOptions& options = {});

SaliencyMap kernel_shap(const ModelAdapter& adapter, const Image& image,
                        const SuperpixelGrid& grid, int class_j,
                        const KernelShapOptions& options = {});

// Broadcasts region attributions to pixels, applies the polarity rule and
// min-max normalizes.
SaliencyMap attribution_map(std::span<const double> phi, const SuperpixelGrid& grid,
                            AttributionPolarity polarity);

// Shapley values by full enumeration. Refuses more than 12 players.
std::vector<double> exact_shapley_game(const CoalitionGame& game, int n_regions);
std::vector<double> exact_shapley(const ModelAdapter& adapter, const Image& image,
                                  const SuperpixelGrid& grid, int class_j,
                                  std::optional<std::vector<double>> baseline = std::nullopt);

inline constexpr int kMaxExactRegions = 12;

}  // namespace segx

#endif  // SEGX_XAI_H_
