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

#ifndef SEGX_IO_H_
#define SEGX_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segx/image.h"
#include "segx/masks.h"
#include "segx/segu.h"

namespace segx {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// NPY (format version 1.0), 2-D little-endian float32, C order.

struct NpyArray {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;
};

// Exact bytes of a v1.0 header (magic through the terminating newline),
// padded to a multiple of 64 bytes.
std::string npy_header(int rows, int cols);

std::vector<std::uint8_t> encode_npy(const NpyArray& array);
// Throws FormatError naming the offending header field (magic, version,
// descr, fortran_order, shape, payload).
NpyArray decode_npy(const std::vector<std::uint8_t>& bytes);

NpyArray read_npy(const fs::path& path);
void write_npy(const NpyArray& array, const fs::path& path);

// Saliency maps are stored as float32; values are narrowed on write.
SaliencyMap read_saliency(const fs::path& path);
void write_saliency(const SaliencyMap& map, const fs::path& path);

// ---------------------------------------------------------------------------
// PNG. Masks are 8-bit single-channel with values 0 or 255 only. Images are
// 8-bit gray or RGB.

struct Png8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
};

Png8 read_png(const fs::path& path);
void write_png(const Png8& png, const fs::path& path);

BinaryMask read_mask(const fs::path& path);
void write_mask(const BinaryMask& mask, const fs::path& path);

Image read_image(const fs::path& path);
// Values are scaled by 255 and rounded.
void write_image(const Image& image, const fs::path& path);

std::uint8_t to_u8(double v);

// ---------------------------------------------------------------------------
// Manifest: JSON lines. Line 1 is the header object, then one record object
// per (image, label). See docs/manifest.md.

inline constexpr int kManifestVersion = 1;

struct DatasetManifest {
  int version = kManifestVersion;
  LabelMode mode = LabelMode::kMulticlass;
  std::vector<std::string> class_names;
  std::vector<double> thresholds;
  std::string dataset;
  std::string model;
  std::string xai;
  std::vector<EvalRecord> records;
  fs::path base_dir;  // directory that relative paths are resolved against

  fs::path Resolve(const std::string& relative) const;
};

struct ManifestLoadOptions {
  // Check that every referenced file exists and parses.
  bool verify_files = true;
};

// Throws IoError if the manifest itself cannot be read and FormatError
// (with "<path>:<line>:" prefix) for any schema, consistency, or referenced
// file problem.
DatasetManifest load_manifest(const fs::path& path, const ManifestLoadOptions& options = {});
DatasetManifest parse_manifest(const std::string& text, const fs::path& base_dir,
                               const std::string& source_name,
                               const ManifestLoadOptions& options = {});

std::string serialize_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const fs::path& path);

// ---------------------------------------------------------------------------
// Overlays: SegX pixels blended 50% toward pure red, remaining baseline
// pixels blended 50% toward white (integer average, rounding down).

Png8 compose_overlay(const Image& image, const BinaryMask& baseline, const BinaryMask& segx);
void render_overlay(const Image& image, const BinaryMask& baseline, const BinaryMask& segx,
                    const fs::path& path);

// ---------------------------------------------------------------------------
// Report tables.

struct Table {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Six significant digits, trailing zeros kept ("0.136000"); NaN -> "NA".
std::string format_real(double v);

std::string table_csv(const Table& table);
std::string table_text(const Table& table);
// Writes <prefix><name>.csv and <prefix><name>.txt for every table.
void emit_report(const std::vector<Table>& tables, const std::string& path_prefix);
Table read_table_csv(const fs::path& path, const std::string& name);

// Whole-file helpers. Throw IoError.
std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);

}  // namespace segx

#endif  // SEGX_IO_H_
