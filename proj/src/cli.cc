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

#include "segx/cli.h"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "segx/error.h"
#include "segx/io.h"
#include "segx/masks.h"
#include "segx/parallel.h"
#include "segx/rng.h"
#include "segx/seg_eval.h"
#include "segx/segu.h"
#include "segx/synth.h"
#include "segx/tinynet.h"
#include "segx/xai.h"

namespace segx::cli {
namespace {

using json = nlohmann::json;

constexpr const char* kMetaFile = "run_meta.json";
constexpr const char* kManifestFile = "manifest.jsonl";
constexpr const char* kCheckpointFile = "tinynet.tnet";

// Seed streams for the stages that share one user seed.
constexpr std::uint64_t kStreamSplit = 1;
constexpr std::uint64_t kStreamTrainInit = 2;
constexpr std::uint64_t kStreamTrainOrder = 3;
constexpr std::uint64_t kStreamShap = 4;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument:
    case ErrorKind::kConfig:
    case ErrorKind::kCapability:
      return kExitUsage;
    case ErrorKind::kNumerical:
      return kExitNumerical;
    case ErrorKind::kValidation:
    case ErrorKind::kState:
    case ErrorKind::kFormat:
    case ErrorKind::kIo:
      return kExitData;
  }
  return kExitData;
}

void MakeDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Path of `target` relative to `base`, in generic form.
std::string RelPath(const fs::path& target, const fs::path& base) {
  const fs::path t = fs::absolute(target).lexically_normal();
  const fs::path b = fs::absolute(base).lexically_normal();
  const fs::path r = t.lexically_relative(b);
  return (r.empty() ? t : r).generic_string();
}

std::string SafeName(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out;
}

std::string RecordStem(const EvalRecord& r) {
  return SafeName(r.image_id) + "_c" + std::to_string(r.label_id);
}

std::string TagOrDash(const std::string& s) { return s.empty() ? "-" : s; }

void WriteMeta(const fs::path& out_dir, const std::string& command, const json& config,
               const json& seeds, const json& stats) {
  json meta;
  meta["tool"] = "segx";
  meta["version"] = kToolVersion;
  meta["command"] = command;
  meta["config"] = config;
  meta["seeds"] = seeds;
  meta["stats"] = stats;
  write_text_file(out_dir / kMetaFile, meta.dump(2) + "\n");
}

ThresholdSweep ParseSweep(const std::string& s) {
  if (s == "value") return ThresholdSweep::kValue;
  if (s == "fraction") return ThresholdSweep::kFraction;
  throw ArgumentError("unknown sweep '" + s + "' (expected value|fraction)");
}

// Record indices grouped by image id, ids ascending.
std::map<std::string, std::vector<std::size_t>> GroupByImage(const DatasetManifest& m) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < m.records.size(); ++i) out[m.records[i].image_id].push_back(i);
  return out;
}

std::vector<std::size_t> SortedByRecordId(const DatasetManifest& m) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m.records.size(); ++i) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&m](std::size_t a, std::size_t b) {
    return m.records[a].record_id() < m.records[b].record_id();
  });
  return idx;
}

bool AnySplit(const DatasetManifest& m) {
  return std::any_of(m.records.begin(), m.records.end(),
                     [](const EvalRecord& r) { return !r.split.empty(); });
}

// Image ids selected by a split name; "all" or a manifest without splits
// selects everything.
std::vector<std::string> SelectImages(const DatasetManifest& m, const std::string& split) {
  std::vector<std::string> ids;
  const bool take_all = split == "all" || !AnySplit(m);
  for (const auto& [id, recs] : GroupByImage(m)) {
    if (take_all || m.records[recs.front()].split == split) ids.push_back(id);
  }
  return ids;
}

const std::string& ImagePathOf(const DatasetManifest& m, const std::vector<std::size_t>& recs) {
  for (std::size_t i : recs) {
    if (!m.records[i].image_path.empty()) return m.records[i].image_path;
  }
  throw ValidationError("record " + m.records[recs.front()].record_id() + " has no image_path");
}

const EvalRecord& RequireSeg(const EvalRecord& r) {
  if (r.seg_mask_path.empty()) {
    throw ValidationError("record " + r.record_id() + " has no seg_mask_path");
  }
  return r;
}

// Re-throws with the record id prepended.
template <typename Fn>
auto ForRecord(const EvalRecord& r, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string msg = "record " + r.record_id() + ": " + e.what();
    switch (e.kind()) {
      case ErrorKind::kArgument: throw ArgumentError(msg);
      case ErrorKind::kConfig: throw ConfigError(msg);
      case ErrorKind::kValidation: throw ValidationError(msg);
      case ErrorKind::kState: throw StateError(msg);
      case ErrorKind::kFormat: throw FormatError(msg);
      case ErrorKind::kIo: throw IoError(msg);
      case ErrorKind::kCapability: throw CapabilityError(msg);
      case ErrorKind::kNumerical: throw NumericalError(msg);
    }
    throw;
  }
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  SynthConfig config;
  int size = 64;
  double threshold = 0.5;
  std::string mode = "multiclass";
  std::string dataset = "synthetic";
};

int RunSynth(const SynthArgs& a) {
  SynthConfig c = a.config;
  c.width = c.height = a.size;
  c.Validate();
  const LabelMode mode = ParseLabelMode(a.mode);
  if (!(a.threshold >= 0.0 && a.threshold < 1.0)) {
    throw ConfigError("synth: --threshold must lie in [0,1)");
  }
  const std::uint64_t split_seed = DeriveSeed(c.seed, kStreamSplit);
  const SplitIndices parts = split(static_cast<std::size_t>(c.n_images), {0.7, 0.1, 0.2}, split_seed);
  const fs::path out(a.out);
  MakeDir(out / "images");
  MakeDir(out / "masks");

  std::vector<std::string> split_of(static_cast<std::size_t>(c.n_images));
  for (auto i : parts.train) split_of[i] = "train";
  for (auto i : parts.val) split_of[i] = "val";
  for (auto i : parts.test) split_of[i] = "test";

  DatasetManifest m;
  m.mode = mode;
  for (int j = 0; j < c.n_classes; ++j) m.class_names.push_back("class" + std::to_string(j));
  m.thresholds.assign(static_cast<std::size_t>(c.n_classes), a.threshold);
  m.dataset = a.dataset;

  std::vector<int> class_count(static_cast<std::size_t>(c.n_classes), 0);
  for (int i = 0; i < c.n_images; ++i) {
    const SynthSample s = generate_one(c, i);
    const std::string image_rel = "images/" + s.id + ".png";
    const std::string mask_rel = "masks/" + s.id + ".png";
    write_image(s.image, out / image_rel);
    write_mask(s.gt_mask, out / mask_rel);
    ++class_count[static_cast<std::size_t>(s.label)];
    for (int j = 0; j < c.n_classes; ++j) {
      EvalRecord r;
      r.image_id = s.id;
      r.label_id = j;
      r.gt_positive = j == s.label;
      r.image_path = image_rel;
      r.seg_mask_path = mask_rel;
      r.gt_mask_path = mask_rel;
      r.split = split_of[static_cast<std::size_t>(i)];
      m.records.push_back(std::move(r));
    }
  }
  write_manifest(m, out / kManifestFile);

  json config = {{"n_images", c.n_images},
                 {"size", a.size},
                 {"channels", c.channels},
                 {"n_classes", c.n_classes},
                 {"radius_min", c.radius_min},
                 {"radius_max", c.radius_max},
                 {"noise", c.noise},
                 {"distractors", c.distractors},
                 {"distractor_radius_min", c.distractor_radius_min},
                 {"distractor_radius_max", c.distractor_radius_max},
                 {"threshold", a.threshold},
                 {"mode", a.mode},
                 {"dataset", a.dataset},
                 {"split_ratios", {0.7, 0.1, 0.2}}};
  json seeds = {{"seed", c.seed}, {"split", split_seed}};
  json stats = {{"train", parts.train.size()},
                {"val", parts.val.size()},
                {"test", parts.test.size()},
                {"records", m.records.size()},
                {"class_counts", class_count}};
  WriteMeta(out, "synth", config, seeds, stats);
  std::cout << "synth: wrote " << c.n_images << " images, " << m.records.size()
            << " records to " << (out / kManifestFile).string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-toy

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::uint64_t seed = 42;
  int epochs = 5;
  double lr = 0.05;
  std::string split = "train";
};

int RunTrain(const TrainArgs& a) {
  if (a.epochs < 1) throw ConfigError("train-toy: --epochs must be >= 1");
  if (!(a.lr > 0.0)) throw ConfigError("train-toy: --lr must be positive");
  const DatasetManifest m = load_manifest(a.manifest);
  const int n_classes = static_cast<int>(m.class_names.size());
  const HeadKind head = m.mode == LabelMode::kMulticlass ? HeadKind::kSoftmax : HeadKind::kSigmoid;
  const auto groups = GroupByImage(m);

  std::vector<LabeledImage> data;
  int channels = 0;
  for (const auto& id : SelectImages(m, a.split)) {
    const auto& recs = groups.at(id);
    std::vector<double> target(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i : recs) {
      if (m.records[i].gt_positive) target[static_cast<std::size_t>(m.records[i].label_id)] = 1.0;
    }
    if (head == HeadKind::kSoftmax &&
        std::count(target.begin(), target.end(), 1.0) != 1) {
      throw ValidationError("image " + id + " needs exactly one positive label in multiclass mode");
    }
    Image img = read_image(m.Resolve(ImagePathOf(m, recs)));
    if (channels == 0) channels = img.channels();
    if (img.channels() != channels) {
      throw ValidationError("image " + id + " has a different channel count");
    }
    data.push_back({std::move(img), std::move(target)});
  }
  if (data.empty()) throw ValidationError("train-toy: no images in split '" + a.split + "'");

  const fs::path out(a.out);
  MakeDir(out);
  const std::uint64_t init_seed = DeriveSeed(a.seed, kStreamTrainInit);
  const std::uint64_t order_seed = DeriveSeed(a.seed, kStreamTrainOrder);
  TrainReport report;
  TinyNet net = Train(TinyNet::Init(init_seed, channels, n_classes, head), data, a.epochs, a.lr,
                      order_seed, &report);
  net.Save(out / kCheckpointFile);
  const double err = ErrorRate(net, data, m.thresholds);

  Table log{"train_log", {"epoch", "loss"}, {}};
  log.rows.push_back({"0", format_real(report.initial_loss)});
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    log.rows.push_back({std::to_string(e + 1), format_real(report.epoch_loss[e])});
  }
  write_text_file(out / "train_log.csv", table_csv(log));

  json config = {{"manifest", a.manifest}, {"epochs", a.epochs}, {"lr", a.lr},
                 {"split", a.split}, {"head", head == HeadKind::kSoftmax ? "softmax" : "sigmoid"}};
  json seeds = {{"seed", a.seed}, {"init", init_seed}, {"order", order_seed}};
  json stats = {{"images", data.size()},
                {"initial_loss", report.initial_loss},
                {"final_loss", report.final_loss},
                {"train_error", err},
                {"fingerprint", net.Fingerprint()}};
  WriteMeta(out, "train-toy", config, seeds, stats);
  std::cout << "train-toy: " << data.size() << " images, loss " << format_real(report.initial_loss)
            << " -> " << format_real(report.final_loss) << ", train error " << format_real(err)
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainArgs {
  std::string manifest;
  std::string checkpoint;
  std::string out;
  std::string xai = "gradcam";
  std::string split;
  int shap_regions = 8;
  int shap_coalitions = 2048;
  std::string polarity = "positive";
  std::string model_tag = "tinynet";
  std::uint64_t seed = 42;
  int jobs = 1;
};

int RunExplain(const ExplainArgs& a) {
  if (a.xai != "gradcam" && a.xai != "kernelshap") {
    throw ArgumentError("--xai must be gradcam or kernelshap");
  }
  AttributionPolarity polarity;
  if (a.polarity == "positive") {
    polarity = AttributionPolarity::kPositive;
  } else if (a.polarity == "absolute") {
    polarity = AttributionPolarity::kAbsolute;
  } else {
    throw ArgumentError("--shap-polarity must be positive or absolute");
  }
  if (a.shap_regions < 2) throw ArgumentError("--shap-regions must be >= 2");
  if (a.shap_coalitions < 2) throw ArgumentError("--shap-coalitions must be >= 2");

  const DatasetManifest m = load_manifest(a.manifest);
  const TinyNet net = TinyNet::Load(a.checkpoint);
  const int n_classes = static_cast<int>(m.class_names.size());
  if (net.n_classes() != n_classes) {
    throw ValidationError("checkpoint has " + std::to_string(net.n_classes()) +
                          " classes, manifest has " + std::to_string(n_classes));
  }
  const HeadKind head = m.mode == LabelMode::kMulticlass ? HeadKind::kSoftmax : HeadKind::kSigmoid;
  if (net.head() != head) throw ValidationError("checkpoint head does not match manifest mode");

  const std::string split = a.split.empty() ? "test" : a.split;
  const auto groups = GroupByImage(m);
  const std::vector<std::string> ids = SelectImages(m, split);
  if (ids.empty()) throw ValidationError("explain: no images in split '" + split + "'");

  struct Explained {
    std::vector<double> probs;
    std::vector<int> labels;
    std::vector<SaliencyMap> maps;
    std::size_t fallbacks = 0;
  };
  std::vector<std::optional<Explained>> results(ids.size());
  const TinyNetAdapter adapter(net);
  const int shap_rows = a.shap_regions;
  const std::uint64_t shap_seed = DeriveSeed(a.seed, kStreamShap);

  ParallelFor(ids.size(), a.jobs, [&](std::size_t k) {
    const auto& recs = groups.at(ids[k]);
    const EvalRecord& first = m.records[recs.front()];
    ForRecord(first, [&] {
      const Image img = read_image(m.Resolve(ImagePathOf(m, recs)));
      if (img.channels() != net.in_channels()) {
        throw ValidationError("image has " + std::to_string(img.channels()) +
                              " channels, model expects " + std::to_string(net.in_channels()));
      }
      Explained e;
      e.probs = net.Probabilities(img);
      const Prediction pred = PredictFromProbabilities(e.probs, m.thresholds, head);
      if (m.mode == LabelMode::kMulticlass) {
        e.labels.push_back(static_cast<int>(*pred.argmax));
      } else {
        for (int j = 0; j < n_classes; ++j) {
          if (e.probs[static_cast<std::size_t>(j)] > m.thresholds[static_cast<std::size_t>(j)]) {
            e.labels.push_back(j);
          }
        }
      }
      for (int j : e.labels) {
        if (a.xai == "gradcam") {
          e.maps.push_back(grad_cam(adapter, img, j));
        } else {
          const SuperpixelGrid grid(shap_rows, shap_rows, img.width(), img.height());
          KernelShapOptions o;
          o.n_coalitions = a.shap_coalitions;
          o.seed = DeriveSeed(shap_seed, static_cast<std::uint64_t>(k) * n_classes + j);
          o.polarity = polarity;
          const ShapAttribution attr = kernel_shap_attributions(adapter, img, grid, j, o);
          if (attr.least_norm_fallback) ++e.fallbacks;
          e.maps.push_back(attribution_map(attr.phi, grid, polarity));
        }
      }
      results[k] = std::move(e);
      return 0;
    });
  });

  const fs::path out(a.out);
  MakeDir(out / "saliency");
  DatasetManifest o;
  o.mode = m.mode;
  o.class_names = m.class_names;
  o.thresholds = m.thresholds;
  o.dataset = m.dataset;
  o.model = a.model_tag;
  o.xai = a.xai;

  auto rebase = [&](const std::string& p) {
    return p.empty() ? p : RelPath(m.Resolve(p), out);
  };
  std::size_t n_maps = 0;
  std::size_t fallbacks = 0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Explained& e = *results[k];
    fallbacks += e.fallbacks;
    for (std::size_t i : groups.at(ids[k])) {
      EvalRecord r = m.records[i];
      r.prob = e.probs[static_cast<std::size_t>(r.label_id)];
      r.predicted = *r.prob > m.thresholds[static_cast<std::size_t>(r.label_id)];
      r.image_path = rebase(r.image_path);
      r.seg_mask_path = rebase(r.seg_mask_path);
      if (r.gt_mask_path) r.gt_mask_path = rebase(*r.gt_mask_path);
      r.saliency_path.clear();
      for (std::size_t t = 0; t < e.labels.size(); ++t) {
        if (e.labels[t] != r.label_id) continue;
        r.saliency_path = "saliency/" + RecordStem(r) + ".npy";
        write_saliency(e.maps[t], out / r.saliency_path);
        ++n_maps;
      }
      o.records.push_back(std::move(r));
    }
  }
  write_manifest(o, out / kManifestFile);

  json config = {{"manifest", a.manifest},
                 {"checkpoint", a.checkpoint},
                 {"xai", a.xai},
                 {"split", split},
                 {"model_tag", a.model_tag}};
  json seeds = {{"seed", a.seed}};
  if (a.xai == "kernelshap") {
    config["shap_regions"] = a.shap_regions;
    config["shap_coalitions"] = a.shap_coalitions;
    config["shap_polarity"] = a.polarity;
    seeds["shap"] = shap_seed;
  }
  json stats = {{"images", ids.size()}, {"saliency_maps", n_maps},
                {"least_norm_fallbacks", fallbacks}};
  WriteMeta(out, "explain", config, seeds, stats);
  std::cout << "explain: " << n_maps << " " << a.xai << " maps for " << ids.size()
            << " images\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// segx

struct SegxArgs {
  std::string manifest;
  std::string out;
  double top_fraction = kDefaultTopFraction;
  int jobs = 1;
};

int RunSegx(const SegxArgs& a) {
  const DatasetManifest m = load_manifest(a.manifest);
  std::vector<std::size_t> todo;
  for (std::size_t i : SortedByRecordId(m)) {
    if (!m.records[i].saliency_path.empty()) {
      RequireSeg(m.records[i]);
      todo.push_back(i);
    }
  }
  if (todo.empty()) throw ValidationError("segx: manifest has no records with saliency_path");

  std::set<std::string> stems;
  for (std::size_t i : todo) {
    if (!stems.insert(RecordStem(m.records[i])).second) {
      throw ValidationError("segx: output name collision for record " + m.records[i].record_id());
    }
  }

  const fs::path out(a.out);
  MakeDir(out / "segx");
  MakeDir(out / "overlays");
  std::vector<std::size_t> baseline_px(todo.size());
  std::vector<std::size_t> segx_px(todo.size());
  ParallelFor(todo.size(), a.jobs, [&](std::size_t k) {
    const EvalRecord& r = m.records[todo[k]];
    ForRecord(r, [&] {
      const BinaryMask seg = read_mask(m.Resolve(r.seg_mask_path));
      const SaliencyMap sal =
          resample(read_saliency(m.Resolve(r.saliency_path)), seg.width(), seg.height());
      const BinaryMask baseline = threshold_top_fraction(sal, a.top_fraction);
      const BinaryMask sx = intersect(baseline, seg);
      Image background = Image::Filled(seg.width(), seg.height(), 3, 0.0);
      if (!r.image_path.empty()) {
        background = read_image(m.Resolve(r.image_path));
        if (background.width() != seg.width() || background.height() != seg.height()) {
          throw ValidationError("image and segmentation mask differ in size");
        }
      }
      const std::string stem = RecordStem(r);
      write_mask(sx, out / "segx" / (stem + ".png"));
      render_overlay(background, baseline, sx, out / "overlays" / (stem + ".png"));
      baseline_px[k] = baseline.popcount();
      segx_px[k] = sx.popcount();
      return 0;
    });
  });

  std::size_t total_baseline = 0;
  std::size_t total_segx = 0;
  for (std::size_t k = 0; k < todo.size(); ++k) {
    total_baseline += baseline_px[k];
    total_segx += segx_px[k];
  }
  json config = {{"manifest", a.manifest}, {"top_fraction", a.top_fraction}};
  json stats = {{"records", todo.size()},
                {"baseline_pixels", total_baseline},
                {"segx_pixels", total_segx}};
  WriteMeta(out, "segx", config, json::object(), stats);
  std::cout << "segx: wrote " << todo.size() << " SegX masks and overlays\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string manifest;
  std::string out;
  double top_fraction = kDefaultTopFraction;
  int auitc_samples = kDefaultAuitcSamples;
  std::string sweep = "value";
  int jobs = 1;
};

int RunEval(const EvalArgs& a) {
  const ThresholdSweep sweep = ParseSweep(a.sweep);
  const DatasetManifest m = load_manifest(a.manifest);
  std::vector<std::size_t> todo;
  for (std::size_t i : SortedByRecordId(m)) {
    if (!m.records[i].saliency_path.empty()) {
      RequireSeg(m.records[i]);
      todo.push_back(i);
    }
  }
  if (todo.empty()) throw ValidationError("eval: manifest has no records with saliency_path");

  std::vector<std::optional<AlignmentItem>> loaded(todo.size());
  ParallelFor(todo.size(), a.jobs, [&](std::size_t k) {
    const EvalRecord& r = m.records[todo[k]];
    ForRecord(r, [&] {
      std::optional<BinaryMask> gt;
      if (r.gt_mask_path) gt = read_mask(m.Resolve(*r.gt_mask_path));
      loaded[k] = AlignmentItem{r, read_saliency(m.Resolve(r.saliency_path)),
                                read_mask(m.Resolve(r.seg_mask_path)), std::move(gt)};
      return 0;
    });
  });
  std::vector<AlignmentItem> items;
  items.reserve(loaded.size());
  for (auto& it : loaded) items.push_back(std::move(*it));

  SeguOptions opt;
  opt.top_fraction = a.top_fraction;
  opt.auitc_samples = a.auitc_samples;
  opt.sweep = sweep;
  opt.jobs = a.jobs;
  const std::vector<AlignmentRow> rows = alignment_table(items, opt);

  Table t{"alignment",
          {"dataset", "model", "xai", "n", "iou_original", "iou_segx", "auitc_original",
           "auitc_segx", "skipped_missing_gt", "excluded_empty_gt"},
          {}};
  std::size_t skipped = 0;
  std::size_t empty_gt = 0;
  for (const auto& row : rows) {
    t.rows.push_back({TagOrDash(row.dataset), TagOrDash(row.model), TagOrDash(row.xai),
                      std::to_string(row.n), format_real(row.iou_original),
                      format_real(row.iou_segx), format_real(row.auitc_original),
                      format_real(row.auitc_segx), std::to_string(row.skipped_missing_gt),
                      std::to_string(row.excluded_empty_gt)});
    skipped += row.skipped_missing_gt;
    empty_gt += row.excluded_empty_gt;
  }
  const fs::path out(a.out);
  MakeDir(out);
  emit_report({t}, (out / "").string());
  if (skipped) std::cerr << "eval: warning: " << skipped << " records without gt_mask_path skipped\n";
  if (empty_gt) std::cerr << "eval: warning: " << empty_gt << " records with empty gt mask excluded\n";

  json config = {{"manifest", a.manifest}, {"top_fraction", a.top_fraction},
                 {"auitc_samples", a.auitc_samples}, {"sweep", a.sweep}};
  json stats = {{"records", todo.size()}, {"skipped_missing_gt", skipped},
                {"excluded_empty_gt", empty_gt}};
  WriteMeta(out, "eval", config, json::object(), stats);
  std::cout << table_text(t);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// segu

struct SeguArgs {
  std::string manifest;
  std::string out;
  std::string mode;
  double top_fraction = kDefaultTopFraction;
  int auitc_samples = kDefaultAuitcSamples;
  std::string sweep = "value";
  int jobs = 1;
};

int RunSegu(const SeguArgs& a) {
  const ThresholdSweep sweep = ParseSweep(a.sweep);
  const DatasetManifest m = load_manifest(a.manifest);
  const LabelMode mode = a.mode.empty() ? m.mode : ParseLabelMode(a.mode);

  std::vector<std::size_t> todo;
  for (std::size_t i : SortedByRecordId(m)) {
    if (!m.records[i].saliency_path.empty()) {
      RequireSeg(m.records[i]);
      todo.push_back(i);
    }
  }
  if (todo.empty()) throw ValidationError("segu: manifest has no records with saliency_path");

  std::vector<std::optional<ScoringItem>> loaded(todo.size());
  ParallelFor(todo.size(), a.jobs, [&](std::size_t k) {
    const EvalRecord& r = m.records[todo[k]];
    ForRecord(r, [&] {
      loaded[k] = ScoringItem{r, read_saliency(m.Resolve(r.saliency_path)),
                              read_mask(m.Resolve(r.seg_mask_path))};
      return 0;
    });
  });
  std::vector<ScoringItem> items;
  items.reserve(loaded.size());
  for (auto& it : loaded) items.push_back(std::move(*it));

  SeguOptions opt;
  opt.top_fraction = a.top_fraction;
  opt.auitc_samples = a.auitc_samples;
  opt.sweep = sweep;
  opt.jobs = a.jobs;
  const ScoringResult scored = score_certainty(items, opt);
  const Partition part = partition_by_correctness(m.records, mode);

  std::map<std::string, std::string> group_of;
  for (const auto& r : part.correct) group_of[r.record_id()] = "correct";
  for (const auto& r : part.incorrect) group_of[r.record_id()] = "incorrect";
  std::vector<CertaintyScore> grouped;
  std::size_t ungrouped = 0;
  Table cert{"certainty", {"record_id", "group", "c_iou", "c_auitc"}, {}};
  for (const auto& s : scored.scores) {
    auto it = group_of.find(s.record_id);
    const std::string group = it == group_of.end() ? "excluded" : it->second;
    if (it == group_of.end()) {
      ++ungrouped;
    } else {
      grouped.push_back(s);
    }
    cert.rows.push_back({s.record_id, group, format_real(s.c_iou), format_real(s.c_auitc)});
  }
  const std::vector<GroupStats> stats = aggregate_group_stats(grouped, part);

  Table gs{"group_stats",
           {"dataset", "model", "xai", "group", "n", "mean_c_iou", "std_c_iou", "mean_c_auitc",
            "std_c_auitc"},
           {}};
  for (const auto& g : stats) {
    gs.rows.push_back({TagOrDash(m.dataset), TagOrDash(m.model), TagOrDash(m.xai), g.group,
                       std::to_string(g.n), format_real(g.mean_c_iou), format_real(g.std_c_iou),
                       format_real(g.mean_c_auitc), format_real(g.std_c_auitc)});
  }
  const fs::path out(a.out);
  MakeDir(out);
  emit_report({cert, gs}, (out / "").string());
  for (const auto& id : scored.excluded_empty) {
    std::cerr << "segu: warning: record " << id << " has an empty segmentation mask, excluded\n";
  }

  json config = {{"manifest", a.manifest}, {"mode", LabelModeName(mode)},
                 {"top_fraction", a.top_fraction}, {"auitc_samples", a.auitc_samples},
                 {"sweep", a.sweep}, {"averaging", "per (image, label) record"}};
  json st = {{"scored", scored.scores.size()},
             {"excluded_empty_seg", scored.excluded_empty.size()},
             {"excluded_unpredicted", ungrouped},
             {"correct", stats[0].n},
             {"incorrect", stats[1].n}};
  WriteMeta(out, "segu", config, json::object(), st);
  std::cout << table_text(gs);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int RunReport(const ReportArgs& a) {
  struct Source {
    const char* file;
    const char* name;
  };
  const Source sources[] = {{"alignment.csv", "report_alignment"},
                            {"group_stats.csv", "report_segu"}};
  std::vector<Table> tables;
  json found = json::object();
  for (const auto& src : sources) {
    std::optional<Table> merged;
    json files = json::array();
    for (const auto& dir : a.inputs) {
      const fs::path p = fs::path(dir) / src.file;
      std::error_code ec;
      if (!fs::is_regular_file(p, ec)) continue;
      Table t = read_table_csv(p, src.name);
      if (!merged) {
        merged = Table{src.name, t.header, {}};
      } else if (merged->header != t.header) {
        throw FormatError(p.string() + ": header differs from earlier inputs");
      }
      for (auto& row : t.rows) merged->rows.push_back(std::move(row));
      files.push_back(p.generic_string());
    }
    if (merged) {
      std::stable_sort(merged->rows.begin(), merged->rows.end());
      tables.push_back(std::move(*merged));
      found[src.name] = files;
    }
  }
  if (tables.empty()) {
    throw ArgumentError("report: no alignment.csv or group_stats.csv found in the inputs");
  }
  const fs::path out(a.out);
  MakeDir(out);
  emit_report(tables, (out / "").string());
  WriteMeta(out, "report", {{"inputs", a.inputs}}, json::object(), found);
  for (const auto& t : tables) std::cout << table_text(t) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// segloss

struct SeglossArgs {
  std::string pred;
  std::string gt;
  std::string out;
  double lambda = 0.5;
  double epsilon = kDiceSmoothing;
};

int RunSegloss(const SeglossArgs& a) {
  const NpyArray arr = read_npy(a.pred);
  const BinaryMask gt = read_mask(a.gt);
  if (arr.cols != gt.width() || arr.rows != gt.height()) {
    throw ValidationError("segloss: prediction " + std::to_string(arr.cols) + "x" +
                          std::to_string(arr.rows) + " does not match mask " +
                          std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
  std::vector<double> probs(arr.values.begin(), arr.values.end());
  std::vector<std::uint8_t> bin(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) bin[i] = probs[i] >= 0.5 ? 1 : 0;
  const SoftMask pred(arr.cols, arr.rows, std::move(probs));
  const double ce = cross_entropy_loss(pred, gt);
  const double dl = dice_loss(pred, gt, a.epsilon);
  const double total = composite_loss(pred, gt, a.lambda, a.epsilon);
  const double ds = dice_score(BinaryMask(arr.cols, arr.rows, std::move(bin)), gt);

  Table t{"segloss",
          {"lambda", "epsilon", "cross_entropy", "dice_loss", "composite_loss", "dice_score"},
          {{format_real(a.lambda), format_real(a.epsilon), format_real(ce), format_real(dl),
            format_real(total), format_real(ds)}}};
  const fs::path out(a.out);
  MakeDir(out);
  emit_report({t}, (out / "").string());
  WriteMeta(out, "segloss",
            {{"pred", a.pred}, {"gt", a.gt}, {"lambda", a.lambda}, {"epsilon", a.epsilon}},
            json::object(), {{"composite_loss", total}, {"dice_score", ds}});
  std::cout << table_text(t);
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string>& args) {
  CLI::App app{"SegX toolkit: explanation alignment and certainty scoring", "segx"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  auto add_common_metrics = [&](CLI::App* sub, double& p, int& n, std::string& sweep) {
    sub->add_option("--top-fraction", p, "Top saliency fraction p")
        ->check(CLI::Range(1e-12, 1.0));
    sub->add_option("--auitc-samples", n, "Threshold samples for AUITC")
        ->check(CLI::Range(2, 100000));
    sub->add_option("--sweep", sweep, "AUITC threshold sweep")
        ->check(CLI::IsMember({"value", "fraction"}));
  };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic lesion dataset and manifest");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.config.seed, "Random seed");
  s->add_option("--n-images", synth.config.n_images, "Number of images");
  s->add_option("--size", synth.size, "Image width and height");
  s->add_option("--channels", synth.config.channels, "1 or 3");
  s->add_option("--classes", synth.config.n_classes, "Number of classes");
  s->add_option("--noise", synth.config.noise, "Noise amplitude");
  s->add_option("--distractors", synth.config.distractors, "Distractor blobs per image");
  s->add_option("--radius-min", synth.config.radius_min, "Lesion semi-axis minimum");
  s->add_option("--radius-max", synth.config.radius_max, "Lesion semi-axis maximum");
  s->add_option("--distractor-radius-min", synth.config.distractor_radius_min);
  s->add_option("--distractor-radius-max", synth.config.distractor_radius_max);
  s->add_option("--threshold", synth.threshold, "Class threshold written to the manifest");
  s->add_option("--mode", synth.mode)->check(CLI::IsMember({"multiclass", "multilabel"}));
  s->add_option("--dataset", synth.dataset, "Dataset tag");

  TrainArgs train;
  auto* t = app.add_subcommand("train-toy", "Train the reference CNN on a manifest split");
  t->add_option("--manifest", train.manifest)->required();
  t->add_option("--out", train.out)->required();
  t->add_option("--seed", train.seed);
  t->add_option("--epochs", train.epochs);
  t->add_option("--lr", train.lr);
  t->add_option("--split", train.split, "Split to train on, or 'all'");

  ExplainArgs explain;
  auto* e = app.add_subcommand("explain", "Compute saliency maps and an augmented manifest");
  e->add_option("--manifest", explain.manifest)->required();
  e->add_option("--checkpoint", explain.checkpoint)->required();
  e->add_option("--out", explain.out)->required();
  e->add_option("--xai", explain.xai)->check(CLI::IsMember({"gradcam", "kernelshap"}));
  e->add_option("--split", explain.split, "Split to explain (default test), or 'all'");
  e->add_option("--shap-regions", explain.shap_regions, "Grid side R (R x R regions)");
  e->add_option("--shap-coalitions", explain.shap_coalitions);
  e->add_option("--shap-polarity", explain.polarity)
      ->check(CLI::IsMember({"positive", "absolute"}));
  e->add_option("--model-tag", explain.model_tag);
  e->add_option("--seed", explain.seed);
  e->add_option("--jobs", explain.jobs)->check(CLI::PositiveNumber);

  SegxArgs segx;
  auto* x = app.add_subcommand("segx", "Write SegX masks and overlays");
  x->add_option("--manifest", segx.manifest)->required();
  x->add_option("--out", segx.out)->required();
  x->add_option("--top-fraction", segx.top_fraction)->check(CLI::Range(1e-12, 1.0));
  x->add_option("--jobs", segx.jobs)->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Alignment of original and SegX maps with gt masks");
  v->add_option("--manifest", ev.manifest)->required();
  v->add_option("--out", ev.out)->required();
  add_common_metrics(v, ev.top_fraction, ev.auitc_samples, ev.sweep);
  v->add_option("--jobs", ev.jobs)->check(CLI::PositiveNumber);

  SeguArgs segu;
  auto* u = app.add_subcommand("segu", "Certainty scores and correct/incorrect group stats");
  u->add_option("--manifest", segu.manifest)->required();
  u->add_option("--out", segu.out)->required();
  u->add_option("--mode", segu.mode)->check(CLI::IsMember({"multiclass", "multilabel"}));
  add_common_metrics(u, segu.top_fraction, segu.auitc_samples, segu.sweep);
  u->add_option("--jobs", segu.jobs)->check(CLI::PositiveNumber);

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Merge eval and segu tables");
  r->add_option("--input", report.inputs, "Output directory of a prior run")->required();
  r->add_option("--out", report.out)->required();

  SeglossArgs segloss;
  auto* l = app.add_subcommand("segloss", "Composite CE + Dice loss of a soft mask");
  l->add_option("--pred", segloss.pred, "Soft mask, 2-D NPY")->required();
  l->add_option("--gt", segloss.gt, "Ground-truth mask PNG")->required();
  l->add_option("--lambda", segloss.lambda)->required()->check(CLI::Range(0.0, 1.0));
  l->add_option("--epsilon", segloss.epsilon)->check(CLI::PositiveNumber);
  l->add_option("--out", segloss.out)->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "synth") return RunSynth(synth);
    if (name == "train-toy") return RunTrain(train);
    if (name == "explain") return RunExplain(explain);
    if (name == "segx") return RunSegx(segx);
    if (name == "eval") return RunEval(ev);
    if (name == "segu") return RunSegu(segu);
    if (name == "report") return RunReport(report);
    if (name == "segloss") return RunSegloss(segloss);
  } catch (const Error& err) {
    std::cerr << "segx " << name << ": " << ErrorKindName(err.kind()) << ": " << err.what()
              << "\n";
    return ExitCodeFor(err.kind());
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "segx " << name << ": io error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "segx " << name << ": error: " << err.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace segx::cli
