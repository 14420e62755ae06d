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

#ifndef SEGX_SEGU_H_
#define SEGX_SEGU_H_

#include <optional>
#include <string>
#include <vector>

#include "segx/masks.h"

namespace segx {

enum class LabelMode { kMulticlass, kMultilabel };

const char* LabelModeName(LabelMode mode);
LabelMode ParseLabelMode(const std::string& name);

// One (image, label) evaluation unit.
struct EvalRecord {
  std::string image_id;
  int label_id = 0;
  std::optional<double> prob;   // p_ij; absent before a model has run
  bool predicted = false;       // prob > tau_j
  bool gt_positive = false;
  std::string image_path;       // optional; needed by explain and overlays
  std::string saliency_path;    // empty when no explanation exists
  std::string seg_mask_path;
  std::optional<std::string> gt_mask_path;
  std::string split;            // "train" / "val" / "test" or empty

  // Tags copied from the manifest header.
  std::string dataset;
  std::string model;
  std::string xai;

  // "<image_id>/<label_id>"; unique within a manifest.
  std::string record_id() const;
};

struct CertaintyScore {
  std::string record_id;
  double c_iou = 0.0;
  double c_auitc = 0.0;
};

inline constexpr double kDefaultTopFraction = 0.05;

// IoU of the top-p saliency mask with the segmentation mask. Dimensions
// must already agree. Throws ValidationError for an empty seg mask.
double certainty_iou(const SaliencyMap& saliency, const BinaryMask& seg,
                     double p = kDefaultTopFraction);

// AUITC of the normalized saliency against the segmentation mask.
double certainty_auitc(const SaliencyMap& saliency, const BinaryMask& seg,
                       int n_samples = kDefaultAuitcSamples,
                       ThresholdSweep sweep = ThresholdSweep::kValue);

struct ScoringItem {
  EvalRecord record;
  SaliencyMap saliency;
  BinaryMask seg;
};

struct SeguOptions {
  double top_fraction = kDefaultTopFraction;
  int auitc_samples = kDefaultAuitcSamples;
  ThresholdSweep sweep = ThresholdSweep::kValue;
  int jobs = 1;
};

struct ScoringResult {
  std::vector<CertaintyScore> scores;       // ascending record_id
  std::vector<std::string> excluded_empty;  // records with an empty seg mask
};

// Scores every item (saliency resampled to the mask size when needed).
ScoringResult score_certainty(const std::vector<ScoringItem>& items,
                              const SeguOptions& options);

struct Partition {
  std::vector<EvalRecord> correct;
  std::vector<EvalRecord> incorrect;
  std::size_t excluded = 0;  // multilabel records with predicted = false
};

// Multiclass: an image is correct iff its arg-max probability label (lowest
// index on ties) is its single ground-truth label; all of the image's
// records follow the image. Multilabel: predicted records are correct iff
// gt_positive; unpredicted records are excluded.
Partition partition_by_correctness(const std::vector<EvalRecord>& records, LabelMode mode);

struct GroupStats {
  std::string group;  // "correct" or "incorrect"
  std::size_t n = 0;
  bool defined = false;  // false when n == 0; means/stds are NaN then
  double mean_c_iou = 0.0;
  double mean_c_auitc = 0.0;
  double std_c_iou = 0.0;
  double std_c_auitc = 0.0;
};

// Population mean and standard deviation per group, summed in ascending
// record_id order. Output order: correct, incorrect.
std::vector<GroupStats> aggregate_group_stats(const std::vector<CertaintyScore>& scores,
                                              const Partition& partition);

// SegX mask: top-p saliency pixels restricted to the segmentation mask.
BinaryMask segx_mask(const SaliencyMap& saliency, const BinaryMask& seg,
                     double p = kDefaultTopFraction);

// Area under tau -> IoU(gt, m(tau) ∩ seg) on a normalized map.
double segx_auitc(const SaliencyMap& map, const BinaryMask& seg, const BinaryMask& gt,
                  int n_samples = kDefaultAuitcSamples,
                  ThresholdSweep sweep = ThresholdSweep::kValue);

struct AlignmentScores {
  double iou_original = 0.0;
  double iou_segx = 0.0;
  double auitc_original = 0.0;
  double auitc_segx = 0.0;
};

// Original-vs-SegX alignment of one explanation against a ground-truth
// clinical mask. The saliency is resampled to the mask size if needed.
AlignmentScores align_record(const SaliencyMap& saliency, const BinaryMask& seg,
                             const BinaryMask& gt, double p = kDefaultTopFraction,
                             int n_samples = kDefaultAuitcSamples,
                             ThresholdSweep sweep = ThresholdSweep::kValue);

struct AlignmentItem {
  EvalRecord record;
  SaliencyMap saliency;
  BinaryMask seg;
  std::optional<BinaryMask> gt;
};

struct AlignmentRow {
  std::string dataset;
  std::string model;
  std::string xai;
  std::size_t n = 0;                 // records in the means
  std::size_t skipped_missing_gt = 0;
  std::size_t excluded_empty_gt = 0;
  double iou_original = 0.0;
  double iou_segx = 0.0;
  double auitc_original = 0.0;
  double auitc_segx = 0.0;
};

// One row per (dataset, model, xai) tag triple, sorted by tags.
std::vector<AlignmentRow> alignment_table(const std::vector<AlignmentItem>& items,
                                          const SeguOptions& options);

}  // namespace segx

#endif  // SEGX_SEGU_H_
