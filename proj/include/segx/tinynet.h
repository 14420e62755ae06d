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

#ifndef SEGX_TINYNET_H_
#define SEGX_TINYNET_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "segx/image.h"

namespace segx {

enum class HeadKind { kSoftmax, kSigmoid };

// Channel-planar activation volume: index = (c * height + y) * width + x.
struct FeatureVolume {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  FeatureVolume() = default;
  FeatureVolume(int c, int h, int w)
      : channels(c), height(h), width(w),
        values(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Everything the backward pass and Grad-CAM need from one forward pass.
struct ForwardTrace {
  std::uint64_t net_fingerprint = 0;
  FeatureVolume input;       // planar copy of the image
  FeatureVolume conv1;       // pre-activation
  FeatureVolume pool1;       // after ReLU + 2x2 max pool
  std::vector<std::uint32_t> pool1_argmax;
  FeatureVolume conv2;       // pre-activation
  FeatureVolume features;    // A_k: after ReLU + 2x2 max pool, 16 maps
  std::vector<std::uint32_t> pool2_argmax;
  std::vector<double> pooled;  // global average of each A_k
  std::vector<double> logits;
  std::vector<double> probs;

  // True when both traces share every ReLU sign and max-pool winner, i.e.
  // the network is locally the same smooth function at both inputs.
  bool SameActivationPattern(const ForwardTrace& other) const;
};

struct Prediction {
  std::vector<int> labels;   // { j : p_j > tau_j }, ascending
  std::optional<int> argmax; // softmax head only
};

// Fixed two-block CNN:
//   conv3x3(pad 1, C->8) -> ReLU -> maxpool 2x2 ->
//   conv3x3(pad 1, 8->16) -> ReLU -> maxpool 2x2 -> GAP -> dense(16->N) -> head
//
// All parameters live in one flat vector, in this order:
//   conv1 weight [8][C][3][3], conv1 bias [8],
//   conv2 weight [16][8][3][3], conv2 bias [16],
//   head weight [N][16], head bias [N].
class TinyNet {
 public:
  static constexpr int kConv1Maps = 8;
  static constexpr int kConv2Maps = 16;
  static constexpr int kKernel = 3;
  static constexpr int kMinImageSide = 8;

  // Weights ~ U(-s, s) with s = sqrt(6 / fan_in), biases zero.
  static TinyNet Init(std::uint64_t seed, int in_channels, int n_classes,
                      HeadKind head);
  static TinyNet Zeros(int in_channels, int n_classes, HeadKind head);

  int in_channels() const { return in_channels_; }
  int n_classes() const { return n_classes_; }
  HeadKind head() const { return head_; }

  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  std::size_t param_count() const { return params_.size(); }

  // Offsets into params().
  std::size_t conv1_weight_offset() const { return 0; }
  std::size_t conv1_bias_offset() const;
  std::size_t conv2_weight_offset() const;
  std::size_t conv2_bias_offset() const;
  std::size_t head_weight_offset() const;
  std::size_t head_bias_offset() const;

  double head_weight(int j, int k) const {
    return params_[head_weight_offset() + static_cast<std::size_t>(j) * kConv2Maps + k];
  }
  void set_head_weight(int j, int k, double v) {
    params_[head_weight_offset() + static_cast<std::size_t>(j) * kConv2Maps + k] = v;
  }

  // FNV-1a over the parameter bytes and shape; identifies traces.
  std::uint64_t Fingerprint() const;

  ForwardTrace Forward(const Image& image) const;
  std::vector<double> Probabilities(const Image& image) const {
    return Forward(image).probs;
  }

  // d logit_j / d A_k for every last-block feature map, shaped like
  // trace.features. Throws StateError if the trace came from different
  // parameters.
  FeatureVolume LogitGradients(const ForwardTrace& trace, int class_j) const;

  // Training loss for one example. `target` has length N: one-hot for the
  // softmax head (cross-entropy), multi-hot for the sigmoid head (mean BCE).
  double Loss(const ForwardTrace& trace, std::span<const double> target) const;
  double Loss(const Image& image, std::span<const double> target) const {
    return Loss(Forward(image), target);
  }

  // Loss and dLoss/dtheta in params() order.
  double LossGradient(const Image& image, std::span<const double> target,
                      std::vector<double>& grad) const;

  Prediction Predict(const Image& image, std::span<const double> thresholds) const;

  void Save(const std::filesystem::path& path) const;
  static TinyNet Load(const std::filesystem::path& path);

  friend bool operator==(const TinyNet&, const TinyNet&) = default;

 private:
  TinyNet(int in_channels, int n_classes, HeadKind head);
  void CheckTarget(std::span<const double> target) const;

  int in_channels_;
  int n_classes_;
  HeadKind head_;
  std::vector<double> params_;
};

// Applies a threshold vector to an already computed probability vector.
Prediction PredictFromProbabilities(std::span<const double> probs,
                                    std::span<const double> thresholds,
                                    HeadKind head);

struct LabeledImage {
  Image image;
  std::vector<double> target;  // length N
};

struct TrainReport {
  double initial_loss = 0.0;               // mean loss before the first step
  std::vector<double> epoch_loss;          // mean running loss per epoch
  double final_loss = 0.0;                 // mean loss after training
};

// Plain per-example SGD with a seeded shuffle each epoch. Throws
// NumericalError on a non-finite loss.
TinyNet Train(TinyNet net, std::span<const LabeledImage> data, int epochs,
              double lr, std::uint64_t seed, TrainReport* report = nullptr);

double MeanLoss(const TinyNet& net, std::span<const LabeledImage> data);

// Misclassification rate (softmax: argmax vs target; sigmoid: per-label
// error with tau = 0.5 unless thresholds are supplied).
double ErrorRate(const TinyNet& net, std::span<const LabeledImage> data,
                 std::span<const double> thresholds = {});

}  // namespace segx

#endif  // SEGX_TINYNET_H_
