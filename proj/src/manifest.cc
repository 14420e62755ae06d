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

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "segx/error.h"
#include "segx/io.h"

namespace segx {
namespace {

using json = nlohmann::json;

constexpr const char* kFormatTag = "segx-manifest";

const std::set<std::string> kHeaderKeys = {"format", "version", "mode", "classes",
                                           "thresholds", "dataset", "model", "xai"};
const std::set<std::string> kRecordKeys = {
    "image_id",   "label_id",      "prob",          "predicted",    "gt_positive",
    "image_path", "saliency_path", "seg_mask_path", "gt_mask_path", "split"};

class LineError {
 public:
  LineError(const std::string& source, int line) : source_(source), line_(line) {}

  [[noreturn]] void Fail(const std::string& why) const {
    throw FormatError(source_ + ":" + std::to_string(line_) + ": " + why);
  }

 private:
  const std::string& source_;
  int line_;
};

std::string OptionalString(const json& obj, const char* key, const LineError& err) {
  auto it = obj.find(key);
  if (it == obj.end()) return {};
  if (!it->is_string()) err.Fail(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

void CheckKeys(const json& obj, const std::set<std::string>& allowed, const LineError& err) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) err.Fail("unknown field '" + it.key() + "'");
  }
}

void ParseHeader(const json& h, DatasetManifest& m, const LineError& err) {
  if (!h.is_object()) err.Fail("header line must be a JSON object");
  CheckKeys(h, kHeaderKeys, err);
  if (h.value("format", std::string()) != kFormatTag) {
    err.Fail(std::string("header 'format' must be \"") + kFormatTag + "\"");
  }
  auto version = h.find("version");
  if (version == h.end() || !version->is_number_integer()) {
    err.Fail("header 'version' must be an integer");
  }
  m.version = version->get<int>();
  if (m.version != kManifestVersion) {
    err.Fail("unsupported manifest version " + std::to_string(m.version));
  }
  auto mode = h.find("mode");
  if (mode == h.end() || !mode->is_string()) err.Fail("header 'mode' must be a string");
  try {
    m.mode = ParseLabelMode(mode->get<std::string>());
  } catch (const ArgumentError& e) {
    err.Fail(e.what());
  }
  auto classes = h.find("classes");
  if (classes == h.end() || !classes->is_array() || classes->empty()) {
    err.Fail("header 'classes' must be a non-empty array");
  }
  for (const auto& c : *classes) {
    if (!c.is_string()) err.Fail("class names must be strings");
    m.class_names.push_back(c.get<std::string>());
  }
  auto thresholds = h.find("thresholds");
  if (thresholds == h.end() || !thresholds->is_array()) {
    err.Fail("header 'thresholds' must be an array");
  }
  for (const auto& t : *thresholds) {
    if (!t.is_number()) err.Fail("thresholds must be numbers");
    const double v = t.get<double>();
    if (!(v >= 0.0 && v < 1.0)) err.Fail("thresholds must lie in [0,1)");
    m.thresholds.push_back(v);
  }
  if (m.thresholds.size() != m.class_names.size()) {
    err.Fail("thresholds length " + std::to_string(m.thresholds.size()) +
             " does not match class count " + std::to_string(m.class_names.size()));
  }
  m.dataset = OptionalString(h, "dataset", err);
  m.model = OptionalString(h, "model", err);
  m.xai = OptionalString(h, "xai", err);
}

EvalRecord ParseRecord(const json& r, const DatasetManifest& m, const LineError& err) {
  if (!r.is_object()) err.Fail("record line must be a JSON object");
  CheckKeys(r, kRecordKeys, err);
  EvalRecord rec;

  auto image_id = r.find("image_id");
  if (image_id == r.end() || !image_id->is_string() || image_id->get<std::string>().empty()) {
    err.Fail("'image_id' must be a non-empty string");
  }
  rec.image_id = image_id->get<std::string>();

  auto label = r.find("label_id");
  if (label == r.end() || !label->is_number_integer()) {
    err.Fail("'label_id' must be an integer");
  }
  const auto label_value = label->get<long long>();
  if (label_value < 0 || label_value >= static_cast<long long>(m.class_names.size())) {
    err.Fail("'label_id' " + std::to_string(label_value) + " out of range");
  }
  rec.label_id = static_cast<int>(label_value);

  auto gt = r.find("gt_positive");
  if (gt == r.end() || !gt->is_boolean()) err.Fail("'gt_positive' must be a boolean");
  rec.gt_positive = gt->get<bool>();

  auto prob = r.find("prob");
  if (prob != r.end()) {
    if (!prob->is_number()) err.Fail("'prob' must be a number");
    const double p = prob->get<double>();
    if (!(p >= 0.0 && p <= 1.0)) err.Fail("'prob' must lie in [0,1]");
    rec.prob = p;
    rec.predicted = p > m.thresholds[static_cast<std::size_t>(rec.label_id)];
  }
  auto predicted = r.find("predicted");
  if (predicted != r.end()) {
    if (!predicted->is_boolean()) err.Fail("'predicted' must be a boolean");
    if (!rec.prob) err.Fail("'predicted' given without 'prob'");
    if (predicted->get<bool>() != rec.predicted) {
      err.Fail("stored predicted=" + std::string(predicted->get<bool>() ? "true" : "false") +
               " disagrees with prob " + std::to_string(*rec.prob) + " > threshold " +
               std::to_string(m.thresholds[static_cast<std::size_t>(rec.label_id)]));
    }
  }

  rec.image_path = OptionalString(r, "image_path", err);
  rec.saliency_path = OptionalString(r, "saliency_path", err);
  rec.seg_mask_path = OptionalString(r, "seg_mask_path", err);
  if (r.contains("gt_mask_path")) rec.gt_mask_path = OptionalString(r, "gt_mask_path", err);
  rec.split = OptionalString(r, "split", err);
  rec.dataset = m.dataset;
  rec.model = m.model;
  rec.xai = m.xai;
  return rec;
}

enum class FileKind { kImage, kSaliency, kMask };

void VerifyFile(const DatasetManifest& m, const std::string& rel, FileKind kind,
                std::map<std::string, std::string>& checked, const LineError& err) {
  if (rel.empty()) return;
  const fs::path path = m.Resolve(rel);
  const std::string key = path.string();
  auto it = checked.find(key);
  if (it == checked.end()) {
    std::string problem;
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
      problem = "referenced file does not exist: " + key;
    } else {
      try {
        switch (kind) {
          case FileKind::kImage:
            read_image(path);
            break;
          case FileKind::kSaliency:
            read_saliency(path);
            break;
          case FileKind::kMask:
            read_mask(path);
            break;
        }
      } catch (const Error& e) {
        problem = e.what();
      }
    }
    it = checked.emplace(key, problem).first;
  }
  if (!it->second.empty()) err.Fail(it->second);
}

}  // namespace

fs::path DatasetManifest::Resolve(const std::string& relative) const {
  const fs::path p(relative);
  if (p.is_absolute()) return p;
  return base_dir / p;
}

DatasetManifest parse_manifest(const std::string& text, const fs::path& base_dir,
                               const std::string& source_name,
                               const ManifestLoadOptions& options) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::set<std::pair<std::string, int>> seen;
  std::map<std::string, std::string> checked;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    LineError err(source_name, line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      err.Fail(std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      ParseHeader(obj, m, err);
      have_header = true;
      continue;
    }
    EvalRecord rec = ParseRecord(obj, m, err);
    if (!seen.emplace(rec.image_id, rec.label_id).second) {
      err.Fail("duplicate record id " + rec.record_id());
    }
    if (options.verify_files) {
      VerifyFile(m, rec.image_path, FileKind::kImage, checked, err);
      VerifyFile(m, rec.saliency_path, FileKind::kSaliency, checked, err);
      VerifyFile(m, rec.seg_mask_path, FileKind::kMask, checked, err);
      if (rec.gt_mask_path) VerifyFile(m, *rec.gt_mask_path, FileKind::kMask, checked, err);
    }
    m.records.push_back(std::move(rec));
  }
  if (!have_header) {
    throw FormatError(source_name + ":1: manifest has no header line");
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path, const ManifestLoadOptions& options) {
  const std::string text = read_text_file(path);
  return parse_manifest(text, path.parent_path(), path.string(), options);
}

std::string serialize_manifest(const DatasetManifest& m) {
  json header;
  header["format"] = kFormatTag;
  header["version"] = m.version;
  header["mode"] = LabelModeName(m.mode);
  header["classes"] = m.class_names;
  header["thresholds"] = m.thresholds;
  if (!m.dataset.empty()) header["dataset"] = m.dataset;
  if (!m.model.empty()) header["model"] = m.model;
  if (!m.xai.empty()) header["xai"] = m.xai;
  std::string out = header.dump() + "\n";
  for (const auto& r : m.records) {
    json j;
    j["image_id"] = r.image_id;
    j["label_id"] = r.label_id;
    j["gt_positive"] = r.gt_positive;
    if (r.prob) {
      j["prob"] = *r.prob;
      j["predicted"] = r.predicted;
    }
    if (!r.image_path.empty()) j["image_path"] = r.image_path;
    if (!r.saliency_path.empty()) j["saliency_path"] = r.saliency_path;
    if (!r.seg_mask_path.empty()) j["seg_mask_path"] = r.seg_mask_path;
    if (r.gt_mask_path) j["gt_mask_path"] = *r.gt_mask_path;
    if (!r.split.empty()) j["split"] = r.split;
    out += j.dump() + "\n";
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  write_text_file(path, serialize_manifest(manifest));
}

std::string read_text_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace segx
