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

#ifndef SEGX_SYNTH_H_
#define SEGX_SYNTH_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segx/image.h"
#include "segx/masks.h"

namespace segx {

// Synthetic lesion images. Each image holds one axis-aligned elliptical
// lesion whose intensity encodes the class, plus round distractor blobs
// outside the lesion. Distractor intensities are drawn from the class
// levels independently of the image label, so they carry no class signal.
struct SynthConfig {
  int n_images = 100;
  int width = 64;
  int height = 64;
  int channels = 3;
  int n_classes = 2;
  double radius_min = 7.0;   // lesion semi-axes, pixels
  double radius_max = 14.0;
  double noise = 0.1;        // uniform noise amplitude, added everywhere
  int distractors = 2;
  double distractor_radius_min = 2.5;
  double distractor_radius_max = 5.5;
  std::uint64_t seed = 42;

  // Throws ConfigError for infeasible settings.
  void Validate() const;
};

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 0.0;
  double ry = 0.0;

  // Pixel (x, y) is inside when its center (x + 0.5, y + 0.5) is.
  bool Contains(int x, int y) const;
};

struct SynthSample {
  std::string id;
  Image image;
  int label = 0;
  BinaryMask gt_mask;
  Ellipse lesion;
  std::vector<Ellipse> distractors;
};

inline constexpr double kBackgroundLevel = 0.3;

// Lesion intensity for a class, before channel gains and noise.
double ClassLevel(int label, int n_classes);

BinaryMask RasterizeEllipse(const Ellipse& e, int width, int height);

// Deterministic in config (image i uses a stream derived from seed and i).
std::vector<SynthSample> generate(const SynthConfig& config);
SynthSample generate_one(const SynthConfig& config, int index);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded shuffle, then contiguous slices of floor(r_train n) and
// floor(r_val n); the remainder goes to test.
SplitIndices split(std::size_t n, std::array<double, 3> ratios = {0.7, 0.1, 0.2},
                   std::uint64_t seed = 42);

}  // namespace segx

#endif  // SEGX_SYNTH_H_
