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

#ifndef SEGX_IMAGE_H_
#define SEGX_IMAGE_H_

#include <cstddef>
#include <span>
#include <vector>

namespace segx {

// H x W x C pixel grid with values in [0,1], interleaved channels
// (index = (y * width + x) * channels + c).
class Image {
 public:
  Image(int width, int height, int channels, std::vector<double> data);
  static Image Filled(int width, int height, int channels, double value);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }

  double at(int x, int y, int c) const { return data_[Offset(x, y, c)]; }
  double& at(int x, int y, int c) { return data_[Offset(x, y, c)]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  // Per-channel mean over all pixels.
  std::vector<double> ChannelMeans() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t Offset(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_;
  int height_;
  int channels_;
  std::vector<double> data_;
};

}  // namespace segx

#endif  // SEGX_IMAGE_H_
