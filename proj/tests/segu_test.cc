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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "segx/error.h"
#include "segx/segu.h"
#include "test_util.h"

namespace segx {
namespace {

using testing::KindOf;
using testing::MaskFromString;
using testing::RandomMap;
using testing::RandomMask;

EvalRecord Rec(const std::string& image, int label, double prob, bool gt, double tau = 0.5) {
  EvalRecord r;
  r.image_id = image;
  r.label_id = label;
  r.prob = prob;
  r.predicted = prob > tau;
  r.gt_positive = gt;
  return r;
}

std::vector<std::string> Ids(const std::vector<EvalRecord>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.record_id());
  return out;
}

TEST_CASE("certainty iou examples") {
  // 20x20: top 20 pixels are the first row; the seg mask covers pixels 10..29.
  std::vector<double> v(400, 0.0);
  for (int i = 0; i < 20; ++i) v[i] = 1.0;
  std::vector<std::uint8_t> seg(400, 0);
  for (int i = 10; i < 30; ++i) seg[i] = 1;
  const SaliencyMap map(20, 20, v);
  CHECK(certainty_iou(map, BinaryMask(20, 20, seg)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  std::vector<std::uint8_t> exact(400, 0);
  for (int i = 0; i < 20; ++i) exact[i] = 1;
  CHECK(certainty_iou(map, BinaryMask(20, 20, exact)) == 1.0);
  std::vector<std::uint8_t> far(400, 0);
  for (int i = 380; i < 400; ++i) far[i] = 1;
  CHECK(certainty_iou(map, BinaryMask(20, 20, far)) == 0.0);
  CHECK(KindOf([&] { certainty_iou(map, BinaryMask::Empty(20, 20)); }) == ErrorKind::kValidation);
}

TEST_CASE("certainty auitc examples") {
  CHECK(certainty_auitc(SaliencyMap(3, 3, std::vector<double>(9, 1.0)), BinaryMask::Full(3, 3)) ==
        0.0 + 1.0 * (1.0 / 100.0 / 2.0));
  std::vector<double> ramp(100);
  for (int i = 0; i < 100; ++i) ramp[i] = 3.0 * i + 1.0;
  CHECK(std::abs(certainty_auitc(SaliencyMap(10, 10, ramp), BinaryMask::Full(10, 10)) - 0.5) <=
        0.02);
  const auto seg = MaskFromString(3, 3, "110 000 000");
  CHECK(certainty_auitc(SaliencyMap(3, 3, std::vector<double>(9, 0.0)), seg) ==
        doctest::Approx(2.0 / 9.0 * 0.005).epsilon(1e-12));
  CHECK(KindOf([] { certainty_auitc(SaliencyMap::Zeros(2, 2), BinaryMask::Empty(2, 2)); }) ==
        ErrorKind::kValidation);
}

TEST_CASE("certainty auitc of an all-ones normalized map over a full seg") {
  // Normalizing a constant map gives zeros, so the normalized flag path is
  // what yields the constant-one integrand.
  const SaliencyMap ones(3, 3, std::vector<double>(9, 1.0), true);
  CHECK(auitc(ones, BinaryMask::Full(3, 3)) == 1.0);
}

TEST_CASE("certainty scores are invariant under positive affine maps") {
  std::mt19937_64 g(91);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto map = RandomMap(g, 12, 9);
    const auto seg = RandomMask(g, 12, 9, 0.3);
    if (seg.empty()) continue;
    const double a = u(g), b = u(g) - 2.5;
    std::vector<double> t(map.values().begin(), map.values().end());
    for (auto& x : t) x = a * x + b;
    const SaliencyMap moved(12, 9, t);
    CHECK(certainty_iou(map, seg) == certainty_iou(moved, seg));
    CHECK(std::abs(certainty_auitc(map, seg) - certainty_auitc(moved, seg)) <= 1e-12);
  }
}

TEST_CASE("score certainty sorts, resamples, and excludes empty masks") {
  std::mt19937_64 g(93);
  std::vector<ScoringItem> items;
  items.push_back({Rec("b", 0, 0.9, true), RandomMap(g, 4, 4), RandomMask(g, 8, 8, 0.5)});
  items.push_back({Rec("a", 1, 0.9, true), RandomMap(g, 8, 8), RandomMask(g, 8, 8, 0.5)});
  items.push_back({Rec("a", 0, 0.9, true), RandomMap(g, 8, 8), BinaryMask::Empty(8, 8)});
  SeguOptions o;
  const auto r = score_certainty(items, o);
  REQUIRE(r.scores.size() == 2);
  CHECK(r.scores[0].record_id == "a/1");
  CHECK(r.scores[1].record_id == "b/0");
  CHECK(r.excluded_empty == std::vector<std::string>{"a/0"});
  CHECK(r.scores[1].c_iou ==
        certainty_iou(resample(items[0].saliency, 8, 8), items[0].seg, o.top_fraction));
  o.jobs = 3;
  const auto par = score_certainty(items, o);
  CHECK(par.scores[0].c_iou == r.scores[0].c_iou);
  CHECK(par.scores[1].c_auitc == r.scores[1].c_auitc);
}

TEST_CASE("partition: multilabel") {
  const std::vector<EvalRecord> rs = {Rec("x", 0, 0.9, true), Rec("x", 1, 0.8, false),
                                      Rec("x", 2, 0.1, true), Rec("y", 0, 0.2, false)};
  const auto p = partition_by_correctness(rs, LabelMode::kMultilabel);
  CHECK(Ids(p.correct) == std::vector<std::string>{"x/0"});
  CHECK(Ids(p.incorrect) == std::vector<std::string>{"x/1"});
  CHECK(p.excluded == 2);
}

TEST_CASE("partition: multiclass argmax") {
  const std::vector<EvalRecord> rs = {
      Rec("i", 0, 0.2, false), Rec("i", 1, 0.5, true),  Rec("i", 2, 0.3, false),
      Rec("j", 0, 0.6, false), Rec("j", 1, 0.4, true),
      // Tie: the lowest label wins, so k is correct.
      Rec("k", 0, 0.5, true),  Rec("k", 1, 0.5, false)};
  const auto p = partition_by_correctness(rs, LabelMode::kMulticlass);
  CHECK(Ids(p.correct) == std::vector<std::string>{"i/0", "i/1", "i/2", "k/0", "k/1"});
  CHECK(Ids(p.incorrect) == std::vector<std::string>{"j/0", "j/1"});
  CHECK(p.excluded == 0);

  const std::vector<EvalRecord> two = {Rec("m", 0, 0.5, true), Rec("m", 1, 0.5, true)};
  CHECK(KindOf([&] { partition_by_correctness(two, LabelMode::kMulticlass); }) ==
        ErrorKind::kValidation);
  const std::vector<EvalRecord> none = {Rec("m", 0, 0.5, false), Rec("m", 1, 0.5, false)};
  CHECK(KindOf([&] { partition_by_correctness(none, LabelMode::kMulticlass); }) ==
        ErrorKind::kValidation);
  EvalRecord noprob;
  noprob.image_id = "n";
  noprob.gt_positive = true;
  CHECK(KindOf([&] { partition_by_correctness({noprob}, LabelMode::kMulticlass); }) ==
        ErrorKind::kValidation);
}

Partition Groups(const std::vector<std::string>& correct, const std::vector<std::string>& incorrect) {
  Partition p;
  for (const auto& id : correct) p.correct.push_back(Rec(id, 0, 0.9, true));
  for (const auto& id : incorrect) p.incorrect.push_back(Rec(id, 0, 0.9, false));
  return p;
}

TEST_CASE("group stats arithmetic") {
  const auto single = aggregate_group_stats({{"a/0", 0.5, 0.25}}, Groups({"a"}, {}));
  REQUIRE(single.size() == 2);
  CHECK(single[0].group == "correct");
  CHECK(single[0].n == 1);
  CHECK(single[0].mean_c_iou == 0.5);
  CHECK(single[0].std_c_iou == 0.0);
  CHECK(single[1].group == "incorrect");
  CHECK(single[1].n == 0);
  CHECK_FALSE(single[1].defined);
  CHECK(std::isnan(single[1].mean_c_iou));
  CHECK(std::isnan(single[1].std_c_auitc));

  const auto pair = aggregate_group_stats({{"a/0", 0.2, 0.1}, {"b/0", 0.4, 0.3}}, Groups({}, {"a", "b"}));
  CHECK(pair[1].mean_c_iou == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(pair[1].std_c_iou == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(pair[1].mean_c_auitc == doctest::Approx(0.2).epsilon(1e-15));

  CHECK(KindOf([] { aggregate_group_stats({{"z/0", 0.2, 0.1}}, Groups({"a"}, {})); }) ==
        ErrorKind::kArgument);
  CHECK(KindOf([] { aggregate_group_stats({}, Groups({"a"}, {"a"})); }) == ErrorKind::kArgument);
}

TEST_CASE("group stats do not depend on input order") {
  std::mt19937_64 g(97);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<CertaintyScore> scores;
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) {
    ids.push_back("img" + std::to_string(i));
    scores.push_back({ids.back() + "/0", u(g), u(g)});
  }
  const auto part = Groups(ids, {});
  const auto a = aggregate_group_stats(scores, part);
  std::shuffle(scores.begin(), scores.end(), g);
  const auto b = aggregate_group_stats(scores, part);
  CHECK(a[0].mean_c_iou == b[0].mean_c_iou);
  CHECK(a[0].std_c_auitc == b[0].std_c_auitc);
}

TEST_CASE("segx mask and alignment of a single record") {
  // Top 25% of the map is the top-left 2x2 block; seg = gt = centre block.
  const SaliencyMap map(4, 4, {9, 9, 1, 1, 9, 9, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto gt = MaskFromString(4, 4, "0000 0110 0110 0000");
  const auto sx = segx_mask(map, gt, 0.25);
  CHECK(sx == MaskFromString(4, 4, "0000 0100 0000 0000"));
  const auto s = align_record(map, gt, gt, 0.25);
  CHECK(s.iou_original == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(s.iou_segx == 0.25);
  CHECK(s.auitc_segx >= s.auitc_original);

  AlignmentItem item{Rec("r", 0, 0.9, true), map, gt, gt};
  item.record.dataset = "d";
  item.record.model = "m";
  item.record.xai = "x";
  SeguOptions o;
  o.top_fraction = 0.25;
  const auto rows = alignment_table({item}, o);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n == 1);
  CHECK(rows[0].iou_original == s.iou_original);
  CHECK(rows[0].iou_segx == 0.25);
}

TEST_CASE("alignment table with seg = gt: SegX dominates") {
  std::mt19937_64 g(101);
  std::vector<AlignmentItem> items;
  for (int i = 0; i < 60; ++i) {
    auto gt = RandomMask(g, 10, 10, 0.15);
    if (gt.empty()) continue;
    auto map = RandomMap(g, 10, 10);
    auto rec = Rec("img" + std::to_string(i), 0, 0.9, true);
    rec.model = i % 2 ? "m1" : "m2";
    rec.xai = "gradcam";
    const auto s = align_record(map, gt, gt);
    CHECK(s.iou_segx >= s.iou_original);
    CHECK(s.auitc_segx >= s.auitc_original);
    items.push_back({rec, map, gt, gt});
  }
  auto missing = items.front();
  missing.record.image_id = "zz_missing";
  missing.gt.reset();
  items.push_back(missing);
  auto empty = items.front();
  empty.record.image_id = "zz_empty";
  empty.gt = BinaryMask::Empty(10, 10);
  items.push_back(empty);

  const auto rows = alignment_table(items, {});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].model == "m1");
  CHECK(rows[1].model == "m2");
  std::size_t skipped = 0, excluded = 0, n = 0;
  for (const auto& r : rows) {
    CHECK(r.iou_segx >= r.iou_original);
    CHECK(r.auitc_segx >= r.auitc_original);
    skipped += r.skipped_missing_gt;
    excluded += r.excluded_empty_gt;
    n += r.n;
  }
  CHECK(skipped == 1);
  CHECK(excluded == 1);
  CHECK(n == items.size() - 2);
}

TEST_CASE("label mode names") {
  CHECK(ParseLabelMode("multiclass") == LabelMode::kMulticlass);
  CHECK(ParseLabelMode("multilabel") == LabelMode::kMultilabel);
  CHECK(std::string(LabelModeName(LabelMode::kMultilabel)) == "multilabel");
  CHECK(KindOf([] { ParseLabelMode("binary"); }) == ErrorKind::kArgument);
}

}  // namespace
}  // namespace segx
