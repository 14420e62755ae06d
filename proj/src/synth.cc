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

#include "segx/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "segx/error.h"
#include "segx/rng.h"

namespace segx {
namespace {

constexpr std::array<double, 3> kChannelGain = {1.0, 0.8, 0.7};
constexpr int kPlacementAttempts = 500;

double Gain(int channel, int channels) {
  return channels == 1 ? 1.0 : kChannelGain[static_cast<std::size_t>(channel) % 3];
}

// Distractors keep one pixel of clearance from the lesion mask.
bool Clear(const Ellipse& blob, const BinaryMask& lesion) {
  const int x0 = std::max(0, static_cast<int>(std::floor(blob.cx - blob.rx)) - 1);
  const int x1 = std::min(lesion.width() - 1, static_cast<int>(std::ceil(blob.cx + blob.rx)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(blob.cy - blob.ry)) - 1);
  const int y1 = std::min(lesion.height() - 1, static_cast<int>(std::ceil(blob.cy + blob.ry)) + 1);
  Ellipse grown{blob.cx, blob.cy, blob.rx + 1.0, blob.ry + 1.0};
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (grown.Contains(x, y) && lesion.at(x, y)) return false;
    }
  }
  return true;
}

}  // namespace

void SynthConfig::Validate() const {
  if (n_images <= 0) throw ConfigError("synth: n_images must be positive");
  if (width < 8 || height < 8) throw ConfigError("synth: images must be at least 8x8");
  if (channels != 1 && channels != 3) throw ConfigError("synth: channels must be 1 or 3");
  if (n_classes < 2) throw ConfigError("synth: n_classes must be >= 2");
  if (!(radius_min > 0.0) || radius_max < radius_min) {
    throw ConfigError("synth: lesion radius range must satisfy 0 < min <= max");
  }
  if (2.0 * radius_max > width || 2.0 * radius_max > height) {
    throw ConfigError("synth: lesion radius range does not fit inside the image");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("synth: noise must lie in [0,1]");
  if (distractors < 0) throw ConfigError("synth: distractor count must be >= 0");
  if (distractors > 0 && (!(distractor_radius_min > 0.0) ||
                          distractor_radius_max < distractor_radius_min ||
                          2.0 * distractor_radius_max > std::min(width, height))) {
    throw ConfigError("synth: distractor radius range is infeasible");
  }
}

bool Ellipse::Contains(int x, int y) const {
  const double dx = (x + 0.5 - cx) / rx;
  const double dy = (y + 0.5 - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

double ClassLevel(int label, int n_classes) {
  return 0.5 + 0.4 * static_cast<double>(label) / static_cast<double>(n_classes - 1);
}

BinaryMask RasterizeEllipse(const Ellipse& e, int width, int height) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      bits[static_cast<std::size_t>(y) * width + x] = e.Contains(x, y) ? 1 : 0;
    }
  }
  return BinaryMask(width, height, std::move(bits));
}

SynthSample generate_one(const SynthConfig& c, int index) {
  Xoshiro256 rng(DeriveSeed(c.seed, static_cast<std::uint64_t>(index)));
  SynthSample s{.id = {},
                .image = Image::Filled(c.width, c.height, c.channels, 0.0),
                .label = 0,
                .gt_mask = BinaryMask::Empty(c.width, c.height),
                .lesion = {},
                .distractors = {}};
  char id[32];
  std::snprintf(id, sizeof(id), "img_%05d", index);
  s.id = id;
  s.label = static_cast<int>(rng.Below(static_cast<std::uint64_t>(c.n_classes)));

  Ellipse& e = s.lesion;
  e.rx = rng.Uniform(c.radius_min, c.radius_max);
  e.ry = rng.Uniform(c.radius_min, c.radius_max);
  e.cx = rng.Uniform(e.rx, c.width - e.rx);
  e.cy = rng.Uniform(e.ry, c.height - e.ry);
  BinaryMask lesion = RasterizeEllipse(e, c.width, c.height);

  // Distractors: placed by rejection sampling, clear of the lesion.
  std::vector<double> blob_level;
  for (int d = 0; d < c.distractors; ++d) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const double r = rng.Uniform(c.distractor_radius_min, c.distractor_radius_max);
      Ellipse blob{rng.Uniform(r, c.width - r), rng.Uniform(r, c.height - r), r, r};
      if (Clear(blob, lesion)) {
        s.distractors.push_back(blob);
        placed = true;
      }
    }
    if (!placed) {
      throw ConfigError("synth: could not place distractor " + std::to_string(d) + " in image " +
                        s.id + " without touching the lesion");
    }
    blob_level.push_back(
        ClassLevel(static_cast<int>(rng.Below(static_cast<std::uint64_t>(c.n_classes))),
                   c.n_classes));
  }

  const double level = ClassLevel(s.label, c.n_classes);
  std::vector<double> data(static_cast<std::size_t>(c.width) * c.height * c.channels);
  for (int y = 0; y < c.height; ++y) {
    for (int x = 0; x < c.width; ++x) {
      double base = kBackgroundLevel;
      if (lesion.at(x, y)) {
        base = level;
      } else {
        for (std::size_t d = 0; d < s.distractors.size(); ++d) {
          if (s.distractors[d].Contains(x, y)) base = blob_level[d];
        }
      }
      for (int ch = 0; ch < c.channels; ++ch) {
        double v = base * Gain(ch, c.channels);
        if (c.noise > 0.0) v += c.noise * (rng.Uniform() - 0.5);
        data[(static_cast<std::size_t>(y) * c.width + x) * c.channels + ch] =
            std::clamp(v, 0.0, 1.0);
      }
    }
  }
  s.image = Image(c.width, c.height, c.channels, std::move(data));
  s.gt_mask = std::move(lesion);
  return s;
}

std::vector<SynthSample> generate(const SynthConfig& config) {
  config.Validate();
  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(config.n_images));
  for (int i = 0; i < config.n_images; ++i) out.push_back(generate_one(config, i));
  return out;
}

SplitIndices split(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
  if (n < 3) throw ConfigError("split: dataset needs at least 3 items");
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("split: ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must sum to 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Xoshiro256 rng(seed);
  rng.Shuffle(std::span<std::size_t>(order));
  // The epsilon absorbs representation error such as 0.7 * 10 = 6.999...
  auto count = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_train = count(ratios[0]);
  const std::size_t n_val = count(ratios[1]);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return out;
}

}  // namespace segx
