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

#include "segx/tinynet.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "segx/error.h"
#include "segx/rng.h"

namespace segx {
namespace {

constexpr char kCheckpointMagic[5] = {'T', 'N', 'E', 'T', '1'};
constexpr int kTaps = TinyNet::kKernel * TinyNet::kKernel;

// 3x3 convolution, zero padding 1, stride 1.
void ConvForward(const FeatureVolume& in, std::span<const double> weight,
                 std::span<const double> bias, FeatureVolume& out) {
  const int ci_n = in.channels;
  const int h = in.height;
  const int w = in.width;
  for (int co = 0; co < out.channels; ++co) {
    double* dst = &out.values[static_cast<std::size_t>(co) * out.plane()];
    std::fill(dst, dst + out.plane(), bias[co]);
    for (int ci = 0; ci < ci_n; ++ci) {
      const double* src = &in.values[static_cast<std::size_t>(ci) * in.plane()];
      const double* k = &weight[(static_cast<std::size_t>(co) * ci_n + ci) * kTaps];
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = k[ky * 3 + kx];
          const int y_lo = std::max(0, 1 - ky);
          const int y_hi = std::min(h, h + 1 - ky);
          const int x_lo = std::max(0, 1 - kx);
          const int x_hi = std::min(w, w + 1 - kx);
          for (int y = y_lo; y < y_hi; ++y) {
            const double* row = src + static_cast<std::size_t>(y + ky - 1) * w + (kx - 1);
            double* orow = dst + static_cast<std::size_t>(y) * w;
            for (int x = x_lo; x < x_hi; ++x) orow[x] += wv * row[x];
          }
        }
      }
    }
  }
}

// Accumulates dweight/dbias and (optionally) writes din for ConvForward.
void ConvBackward(const FeatureVolume& in, std::span<const double> weight,
                  const FeatureVolume& dout, std::span<double> dweight,
                  std::span<double> dbias, FeatureVolume* din) {
  const int ci_n = in.channels;
  const int h = in.height;
  const int w = in.width;
  if (din != nullptr) std::fill(din->values.begin(), din->values.end(), 0.0);
  for (int co = 0; co < dout.channels; ++co) {
    const double* g = &dout.values[static_cast<std::size_t>(co) * dout.plane()];
    double gsum = 0.0;
    for (std::size_t i = 0; i < dout.plane(); ++i) gsum += g[i];
    dbias[co] += gsum;
    for (int ci = 0; ci < ci_n; ++ci) {
      const double* src = &in.values[static_cast<std::size_t>(ci) * in.plane()];
      const std::size_t koff = (static_cast<std::size_t>(co) * ci_n + ci) * kTaps;
      double* dsrc = din ? &din->values[static_cast<std::size_t>(ci) * din->plane()] : nullptr;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = weight[koff + ky * 3 + kx];
          const int y_lo = std::max(0, 1 - ky);
          const int y_hi = std::min(h, h + 1 - ky);
          const int x_lo = std::max(0, 1 - kx);
          const int x_hi = std::min(w, w + 1 - kx);
          double acc = 0.0;
          for (int y = y_lo; y < y_hi; ++y) {
            const std::size_t srow = static_cast<std::size_t>(y + ky - 1) * w + (kx - 1);
            const double* grow = g + static_cast<std::size_t>(y) * w;
            for (int x = x_lo; x < x_hi; ++x) {
              acc += grow[x] * src[srow + x];
              if (dsrc) dsrc[srow + x] += grow[x] * wv;
            }
          }
          dweight[koff + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

// ReLU followed by 2x2 max pool (floor on odd sides). Records the flat index
// of each window's winner; the first maximum in scan order wins ties.
void ReluPool(const FeatureVolume& in, FeatureVolume& out,
              std::vector<std::uint32_t>& argmax) {
  out = FeatureVolume(in.channels, in.height / 2, in.width / 2);
  argmax.assign(out.values.size(), 0);
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        std::size_t best = 0;
        double best_v = -1.0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx =
                (static_cast<std::size_t>(c) * in.height + 2 * y + dy) * in.width + 2 * x + dx;
            const double v = std::max(in.values[idx], 0.0);
            if (v > best_v) {
              best_v = v;
              best = idx;
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * out.height + y) * out.width + x;
        out.values[o] = best_v;
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

// Routes pooled gradients back to the winning pre-activation, through ReLU.
void ReluPoolBackward(const FeatureVolume& pre, const std::vector<std::uint32_t>& argmax,
                      const FeatureVolume& dout, FeatureVolume& dpre) {
  dpre = FeatureVolume(pre.channels, pre.height, pre.width);
  for (std::size_t o = 0; o < dout.values.size(); ++o) {
    const std::uint32_t idx = argmax[o];
    if (pre.values[idx] > 0.0) dpre.values[idx] += dout.values[o];
  }
}

FeatureVolume ToPlanar(const Image& image) {
  FeatureVolume v(image.channels(), image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) v.at(c, y, x) = image.at(x, y, c);
    }
  }
  return v;
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void PutU32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t GetLE(std::istream& is, int bytes, const std::string& field) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) {
      throw FormatError("checkpoint: truncated while reading " + field);
    }
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

bool ForwardTrace::SameActivationPattern(const ForwardTrace& other) const {
  auto same_sign = [](const FeatureVolume& a, const FeatureVolume& b) {
    if (a.values.size() != b.values.size()) return false;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      if ((a.values[i] > 0.0) != (b.values[i] > 0.0)) return false;
    }
    return true;
  };
  return pool1_argmax == other.pool1_argmax && pool2_argmax == other.pool2_argmax &&
         same_sign(conv1, other.conv1) && same_sign(conv2, other.conv2);
}

TinyNet::TinyNet(int in_channels, int n_classes, HeadKind head)
    : in_channels_(in_channels), n_classes_(n_classes), head_(head) {
  if (in_channels <= 0 || n_classes <= 0) {
    throw ArgumentError("TinyNet: in_channels and n_classes must be positive");
  }
  const std::size_t n = static_cast<std::size_t>(kConv1Maps) * in_channels * kTaps +
                        kConv1Maps + static_cast<std::size_t>(kConv2Maps) * kConv1Maps * kTaps +
                        kConv2Maps + static_cast<std::size_t>(n_classes) * kConv2Maps +
                        n_classes;
  params_.assign(n, 0.0);
}

std::size_t TinyNet::conv1_bias_offset() const {
  return static_cast<std::size_t>(kConv1Maps) * in_channels_ * kTaps;
}
std::size_t TinyNet::conv2_weight_offset() const { return conv1_bias_offset() + kConv1Maps; }
std::size_t TinyNet::conv2_bias_offset() const {
  return conv2_weight_offset() + static_cast<std::size_t>(kConv2Maps) * kConv1Maps * kTaps;
}
std::size_t TinyNet::head_weight_offset() const { return conv2_bias_offset() + kConv2Maps; }
std::size_t TinyNet::head_bias_offset() const {
  return head_weight_offset() + static_cast<std::size_t>(n_classes_) * kConv2Maps;
}

TinyNet TinyNet::Zeros(int in_channels, int n_classes, HeadKind head) {
  return TinyNet(in_channels, n_classes, head);
}

TinyNet TinyNet::Init(std::uint64_t seed, int in_channels, int n_classes, HeadKind head) {
  TinyNet net(in_channels, n_classes, head);
  Xoshiro256 rng(seed);
  auto fill = [&](std::size_t begin, std::size_t end, int fan_in) {
    const double s = std::sqrt(6.0 / fan_in);
    for (std::size_t i = begin; i < end; ++i) net.params_[i] = rng.Uniform(-s, s);
  };
  fill(0, net.conv1_bias_offset(), in_channels * kTaps);
  fill(net.conv2_weight_offset(), net.conv2_bias_offset(), kConv1Maps * kTaps);
  fill(net.head_weight_offset(), net.head_bias_offset(), kConv2Maps);
  return net;
}

std::uint64_t TinyNet::Fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(in_channels_));
  mix(static_cast<std::uint64_t>(n_classes_));
  mix(static_cast<std::uint64_t>(head_));
  for (double p : params_) mix(std::bit_cast<std::uint64_t>(p));
  return h;
}

ForwardTrace TinyNet::Forward(const Image& image) const {
  if (image.channels() != in_channels_) {
    throw ArgumentError("TinyNet::Forward: expected " + std::to_string(in_channels_) +
                        " channels, got " + std::to_string(image.channels()));
  }
  if (image.width() < kMinImageSide || image.height() < kMinImageSide) {
    throw ArgumentError("TinyNet::Forward: image must be at least 8x8");
  }
  for (double v : image.data()) {
    if (std::isnan(v) || std::isinf(v)) {
      throw ValidationError("TinyNet::Forward: non-finite input pixel");
    }
  }
  std::span<const double> p(params_);
  ForwardTrace t;
  t.net_fingerprint = Fingerprint();
  t.input = ToPlanar(image);

  t.conv1 = FeatureVolume(kConv1Maps, image.height(), image.width());
  ConvForward(t.input, p.subspan(0, conv1_bias_offset()),
              p.subspan(conv1_bias_offset(), kConv1Maps), t.conv1);
  ReluPool(t.conv1, t.pool1, t.pool1_argmax);

  t.conv2 = FeatureVolume(kConv2Maps, t.pool1.height, t.pool1.width);
  ConvForward(t.pool1,
              p.subspan(conv2_weight_offset(), conv2_bias_offset() - conv2_weight_offset()),
              p.subspan(conv2_bias_offset(), kConv2Maps), t.conv2);
  ReluPool(t.conv2, t.features, t.pool2_argmax);

  const double area = static_cast<double>(t.features.plane());
  t.pooled.assign(kConv2Maps, 0.0);
  for (int k = 0; k < kConv2Maps; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.features.plane(); ++i) {
      s += t.features.values[k * t.features.plane() + i];
    }
    t.pooled[k] = s / area;
  }

  t.logits.assign(n_classes_, 0.0);
  for (int j = 0; j < n_classes_; ++j) {
    double z = params_[head_bias_offset() + j];
    for (int k = 0; k < kConv2Maps; ++k) z += head_weight(j, k) * t.pooled[k];
    t.logits[j] = z;
  }

  t.probs.assign(n_classes_, 0.0);
  if (head_ == HeadKind::kSoftmax) {
    const double zmax = *std::max_element(t.logits.begin(), t.logits.end());
    double sum = 0.0;
    for (int j = 0; j < n_classes_; ++j) {
      t.probs[j] = std::exp(t.logits[j] - zmax);
      sum += t.probs[j];
    }
    for (auto& v : t.probs) v /= sum;
  } else {
    for (int j = 0; j < n_classes_; ++j) t.probs[j] = Sigmoid(t.logits[j]);
  }
  return t;
}

FeatureVolume TinyNet::LogitGradients(const ForwardTrace& trace, int class_j) const {
  if (trace.net_fingerprint != Fingerprint()) {
    throw StateError("LogitGradients: trace was produced by different parameters");
  }
  if (class_j < 0 || class_j >= n_classes_) {
    throw ArgumentError("LogitGradients: class index out of range");
  }
  FeatureVolume g(trace.features.channels, trace.features.height, trace.features.width);
  const double area = static_cast<double>(g.plane());
  for (int k = 0; k < kConv2Maps; ++k) {
    const double v = head_weight(class_j, k) / area;
    std::fill_n(g.values.begin() + static_cast<std::ptrdiff_t>(k * g.plane()), g.plane(), v);
  }
  return g;
}

void TinyNet::CheckTarget(std::span<const double> target) const {
  if (target.size() != static_cast<std::size_t>(n_classes_)) {
    throw ArgumentError("TinyNet: target length does not match class count");
  }
  if (head_ == HeadKind::kSoftmax) {
    int ones = 0;
    for (double t : target) {
      if (t != 0.0 && t != 1.0) throw ArgumentError("TinyNet: softmax target must be one-hot");
      ones += t == 1.0;
    }
    if (ones != 1) throw ArgumentError("TinyNet: softmax target must be one-hot");
  }
}

double TinyNet::Loss(const ForwardTrace& trace, std::span<const double> target) const {
  CheckTarget(target);
  const auto& z = trace.logits;
  if (head_ == HeadKind::kSoftmax) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    double dot = 0.0;
    for (int j = 0; j < n_classes_; ++j) dot += target[j] * z[j];
    return lse - dot;
  }
  double total = 0.0;
  for (int j = 0; j < n_classes_; ++j) {
    total += std::max(z[j], 0.0) - target[j] * z[j] + std::log1p(std::exp(-std::abs(z[j])));
  }
  return total / n_classes_;
}

double TinyNet::LossGradient(const Image& image, std::span<const double> target,
                             std::vector<double>& grad) const {
  const ForwardTrace t = Forward(image);
  const double loss = Loss(t, target);
  grad.assign(params_.size(), 0.0);
  std::span<double> g(grad);
  std::span<const double> p(params_);

  std::vector<double> dlogit(n_classes_);
  for (int j = 0; j < n_classes_; ++j) {
    dlogit[j] = head_ == HeadKind::kSoftmax ? t.probs[j] - target[j]
                                            : (t.probs[j] - target[j]) / n_classes_;
  }

  std::vector<double> dpooled(kConv2Maps, 0.0);
  for (int j = 0; j < n_classes_; ++j) {
    g[head_bias_offset() + j] += dlogit[j];
    for (int k = 0; k < kConv2Maps; ++k) {
      g[head_weight_offset() + static_cast<std::size_t>(j) * kConv2Maps + k] +=
          dlogit[j] * t.pooled[k];
      dpooled[k] += dlogit[j] * head_weight(j, k);
    }
  }

  FeatureVolume dfeat(t.features.channels, t.features.height, t.features.width);
  const double area = static_cast<double>(dfeat.plane());
  for (int k = 0; k < kConv2Maps; ++k) {
    std::fill_n(dfeat.values.begin() + static_cast<std::ptrdiff_t>(k * dfeat.plane()),
                dfeat.plane(), dpooled[k] / area);
  }

  FeatureVolume dconv2;
  ReluPoolBackward(t.conv2, t.pool2_argmax, dfeat, dconv2);
  FeatureVolume dpool1(t.pool1.channels, t.pool1.height, t.pool1.width);
  const std::size_t w2 = conv2_weight_offset();
  ConvBackward(t.pool1, p.subspan(w2, conv2_bias_offset() - w2), dconv2,
               g.subspan(w2, conv2_bias_offset() - w2),
               g.subspan(conv2_bias_offset(), kConv2Maps), &dpool1);

  FeatureVolume dconv1;
  ReluPoolBackward(t.conv1, t.pool1_argmax, dpool1, dconv1);
  ConvBackward(t.input, p.subspan(0, conv1_bias_offset()), dconv1,
               g.subspan(0, conv1_bias_offset()), g.subspan(conv1_bias_offset(), kConv1Maps),
               nullptr);
  return loss;
}

Prediction PredictFromProbabilities(std::span<const double> probs,
                                    std::span<const double> thresholds, HeadKind head) {
  if (thresholds.size() != probs.size()) {
    throw ArgumentError("predict: expected " + std::to_string(probs.size()) +
                        " thresholds, got " + std::to_string(thresholds.size()));
  }
  Prediction out;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (!(thresholds[j] >= 0.0 && thresholds[j] < 1.0)) {
      throw ArgumentError("predict: thresholds must lie in [0,1)");
    }
    if (probs[j] > thresholds[j]) out.labels.push_back(static_cast<int>(j));
  }
  if (head == HeadKind::kSoftmax) {
    out.argmax = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
  return out;
}

Prediction TinyNet::Predict(const Image& image, std::span<const double> thresholds) const {
  if (thresholds.size() != static_cast<std::size_t>(n_classes_)) {
    throw ArgumentError("predict: expected " + std::to_string(n_classes_) +
                        " thresholds, got " + std::to_string(thresholds.size()));
  }
  return PredictFromProbabilities(Probabilities(image), thresholds, head_);
}

void TinyNet::Save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  PutU32(os, static_cast<std::uint32_t>(in_channels_));
  PutU32(os, static_cast<std::uint32_t>(n_classes_));
  PutU32(os, head_ == HeadKind::kSoftmax ? 0u : 1u);
  PutU64(os, params_.size());
  for (double v : params_) PutU64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

TinyNet TinyNet::Load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("checkpoint: bad magic (expected TNET1) in " + path.string());
  }
  const auto channels = static_cast<int>(GetLE(is, 4, "in_channels"));
  const auto classes = static_cast<int>(GetLE(is, 4, "n_classes"));
  const auto head_tag = GetLE(is, 4, "head");
  if (head_tag > 1) throw FormatError("checkpoint: unknown head tag");
  if (channels <= 0 || classes <= 0 || channels > 64 || classes > 4096) {
    throw FormatError("checkpoint: implausible dimensions");
  }
  TinyNet net(channels, classes, head_tag == 0 ? HeadKind::kSoftmax : HeadKind::kSigmoid);
  const std::uint64_t count = GetLE(is, 8, "param_count");
  if (count != net.params_.size()) {
    throw FormatError("checkpoint: parameter count " + std::to_string(count) +
                      " does not match architecture (" +
                      std::to_string(net.params_.size()) + ")");
  }
  for (auto& v : net.params_) {
    v = std::bit_cast<double>(GetLE(is, 8, "parameters"));
    if (!std::isfinite(v)) throw FormatError("checkpoint: non-finite parameter");
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("checkpoint: trailing bytes after parameters");
  }
  return net;
}

double MeanLoss(const TinyNet& net, std::span<const LabeledImage> data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : data) total += net.Loss(ex.image, ex.target);
  return total / static_cast<double>(data.size());
}

TinyNet Train(TinyNet net, std::span<const LabeledImage> data, int epochs, double lr,
              std::uint64_t seed, TrainReport* report) {
  if (data.empty()) throw ArgumentError("train: dataset is empty");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("train: lr must be >= 0");
  if (epochs < 0) throw ArgumentError("train: epochs must be >= 0");

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.initial_loss = MeanLoss(net, data);

  Xoshiro256 rng(seed);
  std::vector<std::size_t> order(data.size());
  std::vector<double> grad;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng.Shuffle(std::span<std::size_t>(order));
    double running = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const auto& ex = data[order[step]];
      const double loss = net.LossGradient(ex.image, ex.target, grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step) + ", example " +
                             std::to_string(order[step]) + ", lr " + std::to_string(lr));
      }
      running += loss;
      auto params = net.mutable_params();
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    }
    rep.epoch_loss.push_back(running / static_cast<double>(order.size()));
  }
  rep.final_loss = MeanLoss(net, data);
  if (!std::isfinite(rep.final_loss)) {
    throw NumericalError("train: non-finite final loss");
  }
  return net;
}

double ErrorRate(const TinyNet& net, std::span<const LabeledImage> data,
                 std::span<const double> thresholds) {
  if (data.empty()) return 0.0;
  std::vector<double> tau(thresholds.begin(), thresholds.end());
  if (tau.empty()) tau.assign(net.n_classes(), 0.5);
  double errors = 0.0;
  for (const auto& ex : data) {
    const auto probs = net.Probabilities(ex.image);
    if (net.head() == HeadKind::kSoftmax) {
      const auto pred = std::max_element(probs.begin(), probs.end()) - probs.begin();
      errors += ex.target[static_cast<std::size_t>(pred)] == 1.0 ? 0.0 : 1.0;
    } else {
      int wrong = 0;
      for (int j = 0; j < net.n_classes(); ++j) {
        wrong += (probs[j] > tau[j]) != (ex.target[j] == 1.0);
      }
      errors += static_cast<double>(wrong) / net.n_classes();
    }
  }
  return errors / static_cast<double>(data.size());
}

}  // namespace segx
