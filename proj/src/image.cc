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

#include "segx/image.h"

#include <string>

#include "segx/error.h"

namespace segx {

Image::Image(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width_ <= 0 || height_ <= 0 || channels_ <= 0) {
    throw ArgumentError("Image: dimensions must be positive");
  }
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels_)) {
    throw ArgumentError("Image: expected " +
                        std::to_string(pixel_count() * channels_) +
                        " values, got " + std::to_string(data_.size()));
  }
}

Image Image::Filled(int width, int height, int channels, double value) {
  std::size_t n = width > 0 && height > 0 && channels > 0
                      ? static_cast<std::size_t>(width) * height * channels
                      : 0;
  return Image(width, height, channels, std::vector<double>(n, value));
}

std::vector<double> Image::ChannelMeans() const {
  std::vector<double> sums(channels_, 0.0);
  for (std::size_t i = 0; i < data_.size(); ++i) sums[i % channels_] += data_[i];
  for (auto& s : sums) s /= static_cast<double>(pixel_count());
  return sums;
}

}  // namespace segx
