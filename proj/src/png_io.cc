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

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "segx/error.h"
#include "segx/io.h"

namespace segx {
namespace {

struct PngErrorSink {
  char message[256] = {0};
};

void OnPngError(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
  png_longjmp(png, 1);
}

void OnPngWarning(png_structp, png_const_charp) {}

struct Header {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

// Everything between setjmp and the last libpng call only touches trivially
// destructible locals; longjmp never skips a destructor.
bool ReadHeaderAndRows(png_structp png, png_infop info, std::FILE* fp, Header* header,
                       std::vector<std::uint8_t>* pixels, std::vector<png_bytep>* rows,
                       bool* unsupported) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_read_info(png, info);
  png_get_IHDR(png, info, &header->width, &header->height, &header->bit_depth,
               &header->color_type, nullptr, nullptr, nullptr);
  if (header->bit_depth != 8 ||
      (header->color_type != PNG_COLOR_TYPE_GRAY && header->color_type != PNG_COLOR_TYPE_RGB) ||
      header->width == 0 || header->height == 0 || header->width > (1u << 16) ||
      header->height > (1u << 16)) {
    *unsupported = true;
    return true;
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t channels = header->color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = channels * header->width;
  pixels->resize(stride * header->height);
  rows->resize(header->height);
  for (png_uint_32 y = 0; y < header->height; ++y) (*rows)[y] = pixels->data() + y * stride;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  return true;
}

bool WriteRows(png_structp png, png_infop info, std::FILE* fp, const Png8& image,
               std::vector<png_bytep>* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Png8 read_png(const fs::path& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (fp == nullptr) throw IoError("cannot open " + path.string());
  unsigned char sig[8] = {0};
  const std::size_t got = std::fread(sig, 1, sizeof(sig), fp);
  if (got != sizeof(sig) || png_sig_cmp(sig, 0, sizeof(sig)) != 0) {
    std::fclose(fp);
    throw FormatError(path.string() + ": not a PNG file (bad signature)");
  }
  std::rewind(fp);

  PngErrorSink sink;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, OnPngError,
                                           OnPngWarning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    if (png) png_destroy_read_struct(&png, nullptr, nullptr);
    std::fclose(fp);
    throw IoError("libpng initialization failed");
  }
  Header header;
  Png8 out;
  std::vector<png_bytep> rows;
  bool unsupported = false;
  const bool ok = ReadHeaderAndRows(png, info, fp, &header, &out.pixels, &rows, &unsupported);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  if (!ok) throw FormatError(path.string() + ": corrupt PNG: " + sink.message);
  if (unsupported) {
    throw FormatError(path.string() + ": unsupported PNG layout (bit depth " +
                      std::to_string(header.bit_depth) + ", color type " +
                      std::to_string(header.color_type) + "); expected 8-bit gray or RGB");
  }
  out.width = static_cast<int>(header.width);
  out.height = static_cast<int>(header.height);
  out.channels = header.color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  return out;
}

void write_png(const Png8& image, const fs::path& path) {
  if (image.width <= 0 || image.height <= 0 || (image.channels != 1 && image.channels != 3) ||
      image.pixels.size() !=
          static_cast<std::size_t>(image.width) * image.height * image.channels) {
    throw ArgumentError("write_png: inconsistent image layout");
  }
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) throw IoError("cannot open for writing: " + path.string());
  PngErrorSink sink;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, OnPngError,
                                            OnPngWarning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    if (png) png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_bytep> rows(image.height);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(image.pixels.data() + y * stride);
  }
  const bool ok = WriteRows(png, info, fp, image, &rows);
  png_destroy_write_struct(&png, &info);
  const bool closed = std::fclose(fp) == 0;
  if (!ok || !closed) throw IoError("failed writing PNG " + path.string() + ": " + sink.message);
}

BinaryMask read_mask(const fs::path& path) {
  const Png8 png = read_png(path);
  if (png.channels != 1) {
    throw FormatError(path.string() + ": mask must be single-channel, found RGB");
  }
  std::vector<std::uint8_t> bits(png.pixels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const std::uint8_t v = png.pixels[i];
    if (v != 0 && v != 255) {
      throw FormatError(path.string() + ": mask pixel " + std::to_string(i) + " has value " +
                        std::to_string(v) + " (only 0 and 255 allowed)");
    }
    bits[i] = v == 255;
  }
  return BinaryMask(png.width, png.height, std::move(bits));
}

void write_mask(const BinaryMask& mask, const fs::path& path) {
  Png8 png{mask.width(), mask.height(), 1, std::vector<std::uint8_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) png.pixels[i] = mask[i] ? 255 : 0;
  write_png(png, path);
}

Image read_image(const fs::path& path) {
  const Png8 png = read_png(path);
  std::vector<double> data(png.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = png.pixels[i] / 255.0;
  return Image(png.width, png.height, png.channels, std::move(data));
}

void write_image(const Image& image, const fs::path& path) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ArgumentError("write_image: only 1- or 3-channel images can be stored as PNG");
  }
  Png8 png{image.width(), image.height(), image.channels(),
           std::vector<std::uint8_t>(image.data().size())};
  for (std::size_t i = 0; i < png.pixels.size(); ++i) png.pixels[i] = to_u8(image.data()[i]);
  write_png(png, path);
}

Png8 compose_overlay(const Image& image, const BinaryMask& baseline, const BinaryMask& segx) {
  if (baseline.width() != image.width() || baseline.height() != image.height() ||
      segx.width() != image.width() || segx.height() != image.height()) {
    throw ArgumentError("render_overlay: image and mask dimensions differ");
  }
  if (image.channels() != 1 && image.channels() != 3) {
    throw ArgumentError("render_overlay: image must have 1 or 3 channels");
  }
  Png8 out{image.width(), image.height(), 3,
           std::vector<std::uint8_t>(image.pixel_count() * 3)};
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * image.width() + x;
      std::uint8_t rgb[3];
      for (int c = 0; c < 3; ++c) rgb[c] = to_u8(image.at(x, y, image.channels() == 3 ? c : 0));
      // Red replaces the white tint where both masks are set.
      if (baseline[p] && !segx[p]) {
        for (auto& v : rgb) v = static_cast<std::uint8_t>((v + 255) / 2);
      }
      if (segx[p]) {
        rgb[0] = static_cast<std::uint8_t>((rgb[0] + 255) / 2);
        rgb[1] = static_cast<std::uint8_t>(rgb[1] / 2);
        rgb[2] = static_cast<std::uint8_t>(rgb[2] / 2);
      }
      for (int c = 0; c < 3; ++c) out.pixels[p * 3 + c] = rgb[c];
    }
  }
  return out;
}

void render_overlay(const Image& image, const BinaryMask& baseline, const BinaryMask& segx,
                    const fs::path& path) {
  write_png(compose_overlay(image, baseline, segx), path);
}

}  // namespace segx
