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

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "segx/error.h"
#include "segx/io.h"

namespace segx {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreludeLen = kMagicLen + 2 + 2;  // magic, version, HEADER_LEN

// Python literal values that can appear in an NPY header dict.
struct PyValue {
  enum Kind { kString, kBool, kTuple } kind = kString;
  std::string str;
  bool boolean = false;
  std::vector<long long> ints;
};

// Parser for the restricted dict literal numpy writes, e.g.
//   {'descr': '<f4', 'fortran_order': False, 'shape': (3, 4), }
class HeaderParser {
 public:
  explicit HeaderParser(const std::string& text) : s_(text) {}

  std::map<std::string, PyValue> ParseDict() {
    std::map<std::string, PyValue> out;
    SkipSpace();
    Expect('{');
    while (true) {
      SkipSpace();
      if (Peek() == '}') {
        ++pos_;
        break;
      }
      std::string key = ParseString();
      SkipSpace();
      Expect(':');
      SkipSpace();
      if (out.count(key)) Fail("duplicate key '" + key + "'");
      out[key] = ParseValue();
      SkipSpace();
      if (Peek() == ',') {
        ++pos_;
        continue;
      }
      SkipSpace();
      Expect('}');
      break;
    }
    SkipSpace();
    if (pos_ != s_.size()) Fail("trailing characters after dict");
    return out;
  }

 private:
  [[noreturn]] void Fail(const std::string& why) {
    throw FormatError("npy header: " + why);
  }
  char Peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void SkipSpace() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void Expect(char c) {
    if (Peek() != c) Fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string ParseString() {
    const char q = Peek();
    if (q != '\'' && q != '"') Fail("expected string literal");
    ++pos_;
    const auto end = s_.find(q, pos_);
    if (end == std::string::npos) Fail("unterminated string literal");
    std::string out = s_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }
  PyValue ParseValue() {
    PyValue v;
    const char c = Peek();
    if (c == '\'' || c == '"') {
      v.kind = PyValue::kString;
      v.str = ParseString();
    } else if (s_.compare(pos_, 4, "True") == 0) {
      v.kind = PyValue::kBool;
      v.boolean = true;
      pos_ += 4;
    } else if (s_.compare(pos_, 5, "False") == 0) {
      v.kind = PyValue::kBool;
      pos_ += 5;
    } else if (c == '(') {
      v.kind = PyValue::kTuple;
      ++pos_;
      while (true) {
        SkipSpace();
        if (Peek() == ')') {
          ++pos_;
          break;
        }
        std::size_t start = pos_;
        while (std::isdigit(static_cast<unsigned char>(Peek()))) ++pos_;
        if (start == pos_) Fail("expected integer in shape tuple");
        v.ints.push_back(std::stoll(s_.substr(start, pos_ - start)));
        SkipSpace();
        if (Peek() == 'L') ++pos_;  // Python 2 long suffix
        SkipSpace();
        if (Peek() == ',') {
          ++pos_;
        } else if (Peek() != ')') {
          Fail("expected ',' or ')' in shape tuple");
        }
      }
    } else {
      Fail("unsupported value in header dict");
    }
    return v;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> ReadBytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

std::string npy_header(int rows, int cols) {
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                     std::to_string(rows) + ", " + std::to_string(cols) + "), }";
  std::size_t total = kPreludeLen + dict.size() + 1;
  const std::size_t pad = (64 - total % 64) % 64;
  dict.append(pad, ' ');
  dict.push_back('\n');
  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(dict.size());
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>(len >> 8));
  return out + dict;
}

std::vector<std::uint8_t> encode_npy(const NpyArray& array) {
  if (array.rows <= 0 || array.cols <= 0 ||
      array.values.size() != static_cast<std::size_t>(array.rows) * array.cols) {
    throw ArgumentError("encode_npy: inconsistent array shape");
  }
  const std::string header = npy_header(array.rows, array.cols);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + array.values.size() * 4);
  for (float v : array.values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

NpyArray decode_npy(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kPreludeLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw FormatError("npy: bad magic string");
  }
  if (bytes[6] != 1 || bytes[7] != 0) {
    throw FormatError("npy: unsupported format version " + std::to_string(bytes[6]) + "." +
                      std::to_string(bytes[7]) + " (expected 1.0)");
  }
  const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
  if (bytes.size() < kPreludeLen + header_len) throw FormatError("npy: truncated header");
  const std::string text(bytes.begin() + kPreludeLen,
                         bytes.begin() + static_cast<std::ptrdiff_t>(kPreludeLen + header_len));
  if (text.empty() || text.back() != '\n') {
    throw FormatError("npy: header not terminated by newline");
  }
  const auto dict = HeaderParser(text).ParseDict();
  for (const auto& [key, value] : dict) {
    if (key != "descr" && key != "fortran_order" && key != "shape") {
      throw FormatError("npy: unexpected header key '" + key + "'");
    }
  }

  auto descr = dict.find("descr");
  if (descr == dict.end() || descr->second.kind != PyValue::kString) {
    throw FormatError("npy: missing or invalid 'descr'");
  }
  const std::string& d = descr->second.str;
  if (d == ">f4") throw FormatError("npy: 'descr' is big-endian (>f4); expected '<f4'");
  if (d != "<f4") throw FormatError("npy: 'descr' dtype " + d + " unsupported; expected '<f4'");

  auto order = dict.find("fortran_order");
  if (order == dict.end() || order->second.kind != PyValue::kBool) {
    throw FormatError("npy: missing or invalid 'fortran_order'");
  }
  if (order->second.boolean) throw FormatError("npy: 'fortran_order' must be False");

  auto shape = dict.find("shape");
  if (shape == dict.end() || shape->second.kind != PyValue::kTuple) {
    throw FormatError("npy: missing or invalid 'shape'");
  }
  const auto& dims = shape->second.ints;
  if (dims.size() != 2) {
    throw FormatError("npy: 'shape' has rank " + std::to_string(dims.size()) +
                      "; expected a 2-D array");
  }
  if (dims[0] <= 0 || dims[1] <= 0 || dims[0] > (1 << 20) || dims[1] > (1 << 20)) {
    throw FormatError("npy: 'shape' dimensions must be positive");
  }

  NpyArray out;
  out.rows = static_cast<int>(dims[0]);
  out.cols = static_cast<int>(dims[1]);
  const std::size_t count = static_cast<std::size_t>(out.rows) * out.cols;
  const std::size_t payload = bytes.size() - kPreludeLen - header_len;
  if (payload != count * 4) {
    throw FormatError("npy: payload holds " + std::to_string(payload) + " bytes; shape needs " +
                      std::to_string(count * 4));
  }
  out.values.resize(count);
  const std::uint8_t* p = bytes.data() + kPreludeLen + header_len;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
    out.values[i] = std::bit_cast<float>(bits);
  }
  return out;
}

NpyArray read_npy(const fs::path& path) {
  try {
    return decode_npy(ReadBytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_npy(const NpyArray& array, const fs::path& path) {
  const auto bytes = encode_npy(array);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

SaliencyMap read_saliency(const fs::path& path) {
  const NpyArray a = read_npy(path);
  std::vector<double> values(a.values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(a.values[i])) {
      throw FormatError(path.string() + ": non-finite value at element " + std::to_string(i));
    }
    values[i] = a.values[i];
  }
  return SaliencyMap(a.cols, a.rows, std::move(values));
}

void write_saliency(const SaliencyMap& map, const fs::path& path) {
  NpyArray a;
  a.rows = map.height();
  a.cols = map.width();
  a.values.reserve(map.size());
  for (double v : map.values()) a.values.push_back(static_cast<float>(v));
  write_npy(a, path);
}

}  // namespace segx
