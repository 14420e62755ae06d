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

#include "segx/segu.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "segx/error.h"
#include "segx/parallel.h"

namespace segx {
namespace {

SaliencyMap AlignTo(const SaliencyMap& saliency, const BinaryMask& mask) {
  if (saliency.width() == mask.width() && saliency.height() == mask.height()) {
    return saliency;
  }
  return resample(saliency, mask.width(), mask.height());
}

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

// Two-pass population moments in the given order.
Moments PopulationMoments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(sq / static_cast<double>(xs.size()));
  return m;
}

}  // namespace

const char* LabelModeName(LabelMode mode) {
  return mode == LabelMode::kMulticlass ? "multiclass" : "multilabel";
}

LabelMode ParseLabelMode(const std::string& name) {
  if (name == "multiclass") return LabelMode::kMulticlass;
  if (name == "multilabel") return LabelMode::kMultilabel;
  throw ArgumentError("unknown label mode '" + name + "' (expected multiclass|multilabel)");
}

std::string EvalRecord::record_id() const {
  return image_id + "/" + std::to_string(label_id);
}

double certainty_iou(const SaliencyMap& saliency, const BinaryMask& seg, double p) {
  if (saliency.width() != seg.width() || saliency.height() != seg.height()) {
    throw ArgumentError("certainty_iou: saliency and mask dimensions differ");
  }
  if (seg.empty()) throw ValidationError("certainty_iou: segmentation mask is empty");
  return iou(threshold_top_fraction(saliency, p), seg);
}

double certainty_auitc(const SaliencyMap& saliency, const BinaryMask& seg, int n_samples,
                       ThresholdSweep sweep) {
  if (saliency.width() != seg.width() || saliency.height() != seg.height()) {
    throw ArgumentError("certainty_auitc: saliency and mask dimensions differ");
  }
  if (seg.empty()) throw ValidationError("certainty_auitc: segmentation mask is empty");
  return auitc(normalize(saliency), seg, n_samples, sweep);
}

ScoringResult score_certainty(const std::vector<ScoringItem>& items,
                              const SeguOptions& options) {
  std::vector<std::optional<CertaintyScore>> slots(items.size());
  ParallelFor(items.size(), options.jobs, [&](std::size_t i) {
    const auto& item = items[i];
    if (item.seg.empty()) return;
    const SaliencyMap aligned = AlignTo(item.saliency, item.seg);
    slots[i] = CertaintyScore{
        item.record.record_id(),
        certainty_iou(aligned, item.seg, options.top_fraction),
        certainty_auitc(aligned, item.seg, options.auitc_samples, options.sweep)};
  });
  ScoringResult out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (slots[i]) {
      out.scores.push_back(*slots[i]);
    } else {
      out.excluded_empty.push_back(items[i].record.record_id());
    }
  }
  std::sort(out.scores.begin(), out.scores.end(),
            [](const auto& a, const auto& b) { return a.record_id < b.record_id; });
  std::sort(out.excluded_empty.begin(), out.excluded_empty.end());
  return out;
}

Partition partition_by_correctness(const std::vector<EvalRecord>& records, LabelMode mode) {
  Partition out;
  if (mode == LabelMode::kMultilabel) {
    for (const auto& r : records) {
      if (!r.predicted) {
        ++out.excluded;
      } else if (r.gt_positive) {
        out.correct.push_back(r);
      } else {
        out.incorrect.push_back(r);
      }
    }
    return out;
  }

  // Multiclass: decide per image, then route every record of the image.
  struct ImageVote {
    int positives = 0;
    int gt_label = -1;
    int best_label = -1;
    double best_prob = -std::numeric_limits<double>::infinity();
  };
  std::map<std::string, ImageVote> votes;
  for (const auto& r : records) {
    auto& v = votes[r.image_id];
    if (r.gt_positive) {
      ++v.positives;
      v.gt_label = r.label_id;
    }
    if (!r.prob) {
      throw ValidationError("partition: record " + r.record_id() + " has no probability");
    }
    if (*r.prob > v.best_prob || (*r.prob == v.best_prob && r.label_id < v.best_label)) {
      v.best_prob = *r.prob;
      v.best_label = r.label_id;
    }
  }
  for (const auto& [image, v] : votes) {
    if (v.positives != 1) {
      throw ValidationError("partition: multiclass image " + image + " has " +
                            std::to_string(v.positives) +
                            " positive ground-truth labels (expected exactly 1)");
    }
  }
  for (const auto& r : records) {
    const auto& v = votes.at(r.image_id);
    (v.best_label == v.gt_label ? out.correct : out.incorrect).push_back(r);
  }
  return out;
}

std::vector<GroupStats> aggregate_group_stats(const std::vector<CertaintyScore>& scores,
                                              const Partition& partition) {
  std::unordered_map<std::string, int> group_of;
  for (const auto& r : partition.correct) group_of[r.record_id()] = 0;
  for (const auto& r : partition.incorrect) {
    auto [it, inserted] = group_of.emplace(r.record_id(), 1);
    if (!inserted) {
      throw ArgumentError("aggregate: record " + r.record_id() + " is in both groups");
    }
  }

  std::vector<const CertaintyScore*> sorted;
  sorted.reserve(scores.size());
  for (const auto& s : scores) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->record_id < b->record_id; });

  std::vector<double> iou_vals[2];
  std::vector<double> auitc_vals[2];
  for (const auto* s : sorted) {
    auto it = group_of.find(s->record_id);
    if (it == group_of.end()) {
      throw ArgumentError("aggregate: score for " + s->record_id + " belongs to no group");
    }
    iou_vals[it->second].push_back(s->c_iou);
    auitc_vals[it->second].push_back(s->c_auitc);
  }

  std::vector<GroupStats> out;
  const char* names[2] = {"correct", "incorrect"};
  for (int g = 0; g < 2; ++g) {
    GroupStats st;
    st.group = names[g];
    st.n = iou_vals[g].size();
    st.defined = st.n > 0;
    if (st.defined) {
      const Moments mi = PopulationMoments(iou_vals[g]);
      const Moments ma = PopulationMoments(auitc_vals[g]);
      st.mean_c_iou = mi.mean;
      st.std_c_iou = mi.stddev;
      st.mean_c_auitc = ma.mean;
      st.std_c_auitc = ma.stddev;
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      st.mean_c_iou = st.mean_c_auitc = st.std_c_iou = st.std_c_auitc = nan;
    }
    out.push_back(st);
  }
  return out;
}

BinaryMask segx_mask(const SaliencyMap& saliency, const BinaryMask& seg, double p) {
  return intersect(threshold_top_fraction(saliency, p), seg);
}

double segx_auitc(const SaliencyMap& map, const BinaryMask& seg, const BinaryMask& gt,
                  int n_samples, ThresholdSweep sweep) {
  if (map.width() != gt.width() || map.height() != gt.height() ||
      seg.width() != gt.width() || seg.height() != gt.height()) {
    throw ArgumentError("segx_auitc: dimension mismatch");
  }
  if (n_samples < 2) throw ArgumentError("segx_auitc: n_samples must be >= 2");
  const double step = 1.0 / static_cast<double>(n_samples - 1);
  double area = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double tau = i == n_samples - 1 ? 1.0 : i * step;
    const double cur = iou(gt, intersect(sweep_mask(map, tau, sweep), seg));
    if (i > 0) area += 0.5 * (prev + cur) * step;
    prev = cur;
  }
  return std::clamp(area, 0.0, 1.0);
}

AlignmentScores align_record(const SaliencyMap& saliency, const BinaryMask& seg,
                             const BinaryMask& gt, double p, int n_samples,
                             ThresholdSweep sweep) {
  if (seg.width() != gt.width() || seg.height() != gt.height()) {
    throw ArgumentError("align_record: segmentation and ground-truth masks differ in size");
  }
  const SaliencyMap aligned = AlignTo(saliency, gt);
  const SaliencyMap norm = normalize(aligned);
  const BinaryMask top = threshold_top_fraction(aligned, p);
  AlignmentScores s;
  s.iou_original = iou(top, gt);
  s.iou_segx = iou(intersect(top, seg), gt);
  s.auitc_original = auitc(norm, gt, n_samples, sweep);
  s.auitc_segx = segx_auitc(norm, seg, gt, n_samples, sweep);
  return s;
}

std::vector<AlignmentRow> alignment_table(const std::vector<AlignmentItem>& items,
                                          const SeguOptions& options) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::vector<std::optional<AlignmentScores>> scored(items.size());
  ParallelFor(items.size(), options.jobs, [&](std::size_t i) {
    const auto& it = items[i];
    if (!it.gt || it.gt->empty()) return;
    scored[i] = align_record(it.saliency, it.seg, *it.gt, options.top_fraction,
                             options.auitc_samples, options.sweep);
  });

  struct Bucket {
    AlignmentRow row;
    std::vector<std::pair<std::string, AlignmentScores>> members;
  };
  std::map<Key, Bucket> buckets;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& rec = items[i].record;
    auto& b = buckets[{rec.dataset, rec.model, rec.xai}];
    b.row.dataset = rec.dataset;
    b.row.model = rec.model;
    b.row.xai = rec.xai;
    if (!items[i].gt) {
      ++b.row.skipped_missing_gt;
    } else if (!scored[i]) {
      ++b.row.excluded_empty_gt;
    } else {
      b.members.emplace_back(rec.record_id(), *scored[i]);
    }
  }

  std::vector<AlignmentRow> rows;
  for (auto& [key, b] : buckets) {
    std::sort(b.members.begin(), b.members.end(),
              [](const auto& a, const auto& c) { return a.first < c.first; });
    AlignmentRow row = b.row;
    row.n = b.members.size();
    for (const auto& [id, s] : b.members) {
      row.iou_original += s.iou_original;
      row.iou_segx += s.iou_segx;
      row.auitc_original += s.auitc_original;
      row.auitc_segx += s.auitc_segx;
    }
    if (row.n > 0) {
      const double n = static_cast<double>(row.n);
      row.iou_original /= n;
      row.iou_segx /= n;
      row.auitc_original /= n;
      row.auitc_segx /= n;
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.iou_original = row.iou_segx = row.auitc_original = row.auitc_segx = nan;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace segx
