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
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "segx/error.h"
#include "segx/masks.h"
#include "test_util.h"

namespace segx {
namespace {

using testing::KindOf;
using testing::MaskFromString;
using testing::RandomMap;
using testing::RandomMask;

std::vector<double> Values(const SaliencyMap& m) {
  return {m.values().begin(), m.values().end()};
}

std::vector<int> SetIndices(const BinaryMask& m) {
  std::vector<int> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

// Independent reference: full stable sort by (value desc, index asc).
std::vector<int> TopKOracle(const std::vector<double>& v, std::size_t k) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&v](int a, int b) { return v[a] > v[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double BruteIou(const BinaryMask& a, const BinaryMask& b) {
  int inter = 0;
  int uni = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      inter += a.at(x, y) && b.at(x, y);
      uni += a.at(x, y) || b.at(x, y);
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

TEST_CASE("normalize: affine min-max") {
  const auto n = normalize(SaliencyMap(2, 2, {0, 2, 4, 8}));
  CHECK(Values(n) == std::vector<double>{0, 0.25, 0.5, 1.0});
  CHECK(n.normalized());
}

TEST_CASE("normalize: constant map becomes zeros") {
  const auto n = normalize(SaliencyMap(2, 2, {3, 3, 3, 3}));
  CHECK(Values(n) == std::vector<double>{0, 0, 0, 0});
  CHECK(n.normalized());
}

TEST_CASE("normalize: already normalized grid is unchanged") {
  const SaliencyMap m(2, 2, {0, 0.3, 1, 0.7});
  CHECK(Values(normalize(m)) == Values(m));
}

TEST_CASE("saliency map rejects bad input") {
  CHECK(KindOf([] { SaliencyMap(2, 1, {0, NAN}); }) == ErrorKind::kValidation);
  CHECK(KindOf([] { SaliencyMap(2, 1, {0, INFINITY}); }) == ErrorKind::kValidation);
  CHECK(KindOf([] { SaliencyMap(2, 1, {0, 2}, true); }) == ErrorKind::kValidation);
  CHECK(KindOf([] { SaliencyMap(0, 1, {}); }) == ErrorKind::kArgument);
  CHECK(KindOf([] { SaliencyMap(2, 2, {1, 2, 3}); }) == ErrorKind::kArgument);
  CHECK(KindOf([] { BinaryMask(2, 2, {1, 0}); }) == ErrorKind::kArgument);
}

TEST_CASE("top fraction: ascending 4x4 ramp selects the bottom row") {
  std::vector<double> v(16);
  std::iota(v.begin(), v.end(), 0.0);
  const auto m = threshold_top_fraction(SaliencyMap(4, 4, v), 0.25);
  const auto expected = TopKOracle(v, 4);
  CHECK(SetIndices(m) == expected);
  CHECK(expected == std::vector<int>{12, 13, 14, 15});
}

TEST_CASE("top fraction: all ties take the first row-major pixels") {
  const auto m = threshold_top_fraction(SaliencyMap(4, 4, std::vector<double>(16, 0.5)), 0.25);
  CHECK(SetIndices(m) == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("top fraction: p = 1 selects everything; bad p rejected") {
  std::mt19937_64 g(1);
  const auto map = RandomMap(g, 5, 3);
  CHECK(threshold_top_fraction(map, 1.0).popcount() == 15);
  CHECK(KindOf([&] { threshold_top_fraction(map, 0.0); }) == ErrorKind::kArgument);
  CHECK(KindOf([&] { threshold_top_fraction(map, 1.5); }) == ErrorKind::kArgument);
  CHECK(KindOf([&] { threshold_top_fraction(map, NAN); }) == ErrorKind::kArgument);
}

TEST_CASE("top fraction: cardinality and selection match the sort oracle") {
  std::mt19937_64 g(7);
  std::uniform_int_distribution<int> side(1, 20);
  std::uniform_real_distribution<double> frac(0.001, 1.0);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 500; ++trial) {
    const int w = side(g);
    const int h = side(g);
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    // Few distinct levels, so ties are common.
    for (auto& x : v) x = level(g);
    const double p = frac(g);
    const auto k = static_cast<std::size_t>(std::ceil(p * w * h - 1e-9 * p * w * h));
    const auto m = threshold_top_fraction(SaliencyMap(w, h, v), p);
    CHECK(m.popcount() == std::max<std::size_t>(k, 1));
    CHECK(SetIndices(m) == TopKOracle(v, m.popcount()));
  }
}

TEST_CASE("top fraction: 5% of a 64x64 grid is 205 pixels") {
  std::mt19937_64 g(3);
  CHECK(threshold_top_fraction(RandomMap(g, 64, 64), 0.05).popcount() == 205);
  CHECK(threshold_top_fraction(RandomMap(g, 10, 10), 0.05).popcount() == 5);
}

TEST_CASE("threshold value") {
  const SaliencyMap m(2, 2, {0, 0.25, 0.5, 1.0}, true);
  CHECK(threshold_value(m, 0.0).popcount() == 4);
  CHECK(SetIndices(threshold_value(m, 1.0)) == std::vector<int>{3});
  CHECK(SetIndices(threshold_value(m, 0.5)) == std::vector<int>{2, 3});
  CHECK(KindOf([&] { threshold_value(m, std::nextafter(1.0, 2.0)); }) == ErrorKind::kArgument);
  CHECK(KindOf([&] { threshold_value(m, -0.1); }) == ErrorKind::kArgument);
  CHECK(KindOf([] { threshold_value(SaliencyMap(1, 2, {0, 1}), 0.5); }) == ErrorKind::kState);
}

TEST_CASE("threshold value masks are nested") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = normalize(RandomMap(g, 7, 6));
    double t1 = u(g);
    double t2 = u(g);
    if (t1 > t2) std::swap(t1, t2);
    CHECK(is_subset(threshold_value(m, t2), threshold_value(m, t1)));
  }
}

TEST_CASE("intersect: block example and algebra") {
  const auto a = MaskFromString(4, 4, "1100 1100 0000 0000");
  const auto b = MaskFromString(4, 4, "0000 0110 0110 0000");
  const auto c = intersect(a, b);
  CHECK(SetIndices(c) == std::vector<int>{1 * 4 + 1});
  CHECK(intersect(a, a) == a);
  CHECK(intersect(a, BinaryMask::Full(4, 4)) == a);
  CHECK(intersect(a, b) == intersect(b, a));
  CHECK(KindOf([&] { intersect(a, BinaryMask::Full(3, 4)); }) == ErrorKind::kArgument);
}

TEST_CASE("intersect: containment on random masks") {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = RandomMask(g, 9, 4);
    const auto b = RandomMask(g, 9, 4);
    const auto c = intersect(a, b);
    CHECK(is_subset(c, a));
    CHECK(is_subset(c, b));
    CHECK(c.popcount() <= std::min(a.popcount(), b.popcount()));
  }
}

TEST_CASE("iou examples") {
  const auto a = MaskFromString(4, 4, "1100 1100 0000 0000");
  const auto b = MaskFromString(4, 4, "0000 0110 0110 0000");
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, MaskFromString(4, 4, "0000 0000 0011 0011")) == 0.0);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou(a, b) == BruteIou(a, b));
  const auto e = BinaryMask::Empty(4, 4);
  CHECK(iou(e, e) == 1.0);
  CHECK(iou_is_vacuous(e, e));
  CHECK_FALSE(iou_is_vacuous(a, a));
  CHECK(KindOf([&] { iou(a, BinaryMask::Empty(4, 3)); }) == ErrorKind::kArgument);
}

TEST_CASE("iou matches pixel counting on every 3x3 pair") {
  std::vector<BinaryMask> all;
  for (int bits = 0; bits < 512; ++bits) {
    std::vector<std::uint8_t> v(9);
    for (int i = 0; i < 9; ++i) v[i] = (bits >> i) & 1;
    all.emplace_back(3, 3, v);
  }
  long mismatches = 0;
  for (const auto& a : all) {
    for (const auto& b : all) {
      if (iou(a, b) != BruteIou(a, b) || iou(a, b) != iou(b, a)) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("perfect segmentation never lowers iou") {
  std::mt19937_64 g(9);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = RandomMask(g, 8, 8, 0.3);
    auto gt = RandomMask(g, 8, 8, 0.2);
    if (gt.empty()) continue;
    CHECK(iou(intersect(x, gt), gt) >= iou(x, gt));
  }
}

TEST_CASE("auitc: uniform ramp with full reference is one half") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i / 99.0;
  const SaliencyMap ramp(10, 10, v, true);
  const double a = auitc(ramp, BinaryMask::Full(10, 10));
  // Oracle: IoU(tau) = #{v >= tau} / 100 integrated by the trapezoid rule.
  double oracle = 0.0;
  auto f = [&v](double t) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [t](double x) { return x >= t; })) /
           100.0;
  };
  for (int i = 0; i < 100; ++i) oracle += 0.5 * (f(i / 100.0) + f((i + 1) / 100.0)) / 100.0;
  CHECK(a == doctest::Approx(0.5).epsilon(0.04));
  CHECK(std::abs(a - 0.5) <= 0.02);
  CHECK(a == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("auitc: all-zero map is a single trapezoid") {
  const SaliencyMap z(4, 4, std::vector<double>(16, 0.0), true);
  const auto ref = MaskFromString(4, 4, "1100 1100 0000 0000");
  CHECK(auitc(z, ref) == doctest::Approx(4.0 / 16.0 * (0.01 / 2.0)).epsilon(1e-12));
}

TEST_CASE("auitc: constant one map with full reference") {
  const SaliencyMap ones(3, 3, std::vector<double>(9, 1.0), true);
  CHECK(auitc(ones, BinaryMask::Full(3, 3)) == 1.0);
}

TEST_CASE("auitc: errors") {
  const SaliencyMap m(2, 2, {0, 0.2, 0.6, 1}, true);
  CHECK(KindOf([&] { auitc(m, BinaryMask::Full(2, 3)); }) == ErrorKind::kArgument);
  CHECK(KindOf([&] { auitc(m, BinaryMask::Full(2, 2), 1); }) == ErrorKind::kArgument);
  CHECK(KindOf([] { auitc(SaliencyMap(1, 2, {0, 2}), BinaryMask::Full(1, 2)); }) ==
        ErrorKind::kState);
}

TEST_CASE("auitc: range and refinement stability on smooth maps") {
  std::mt19937_64 g(13);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 24;
    const int h = 20;
    const double a = u(g) * 0.3, b = u(g) * 0.3, c = u(g) * 4;
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) v[y * w + x] = std::sin(a * x + b * y + c) + 0.05 * x;
    }
    const auto map = normalize(SaliencyMap(w, h, v));
    const auto ref = RandomMask(g, w, h, 0.3);
    for (auto sweep : {ThresholdSweep::kValue, ThresholdSweep::kFraction}) {
      const double a101 = auitc(map, ref, 101, sweep);
      const double a201 = auitc(map, ref, 201, sweep);
      CHECK(a101 >= 0.0);
      CHECK(a101 <= 1.0);
      worst = std::max(worst, std::abs(a101 - a201));
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("sweep mask: fraction reading") {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 0.0);
  const auto m = normalize(SaliencyMap(10, 1, v));
  CHECK(sweep_mask(m, 0.0, ThresholdSweep::kFraction).popcount() == 10);
  CHECK(SetIndices(sweep_mask(m, 0.7, ThresholdSweep::kFraction)) == std::vector<int>{7, 8, 9});
  CHECK(sweep_mask(m, 1.0, ThresholdSweep::kFraction).popcount() == 0);
}

TEST_CASE("resample: identity at same size") {
  std::mt19937_64 g(17);
  const auto map = RandomMap(g, 6, 5);
  CHECK(Values(resample(map, 6, 5)) == Values(map));
  const auto mask = RandomMask(g, 6, 5);
  CHECK(resample(mask, 6, 5) == mask);
}

TEST_CASE("resample: nearest neighbour mask upsampling") {
  const auto up = resample(MaskFromString(2, 2, "10 00"), 4, 4);
  // Oracle: source index floor(dst * src / dst_size).
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) CHECK(up.at(x, y) == (x * 2 / 4 == 0 && y * 2 / 4 == 0));
  }
  CHECK(SetIndices(up) == std::vector<int>{0, 1, 4, 5});
}

TEST_CASE("resample: bilinear align-corners") {
  const auto r = resample(SaliencyMap(2, 1, {0, 1}), 4, 1);
  const std::vector<double> expected = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  for (int i = 0; i < 4; ++i) CHECK(r[i] == doctest::Approx(expected[i]).epsilon(1e-15));
  CHECK(KindOf([] { resample(SaliencyMap(2, 1, {0, 1}), 0, 1); }) == ErrorKind::kArgument);
  CHECK(KindOf([] { resample(BinaryMask::Full(2, 2), 2, 0); }) == ErrorKind::kArgument);
}

TEST_CASE("resample: bilinear 2-D oracle") {
  std::mt19937_64 g(19);
  const auto src = RandomMap(g, 5, 4);
  const auto dst = resample(src, 9, 7);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 9; ++x) {
      const double sx = x * 4.0 / 8.0;
      const double sy = y * 3.0 / 6.0;
      const int x0 = std::min(static_cast<int>(sx), 3);
      const int y0 = std::min(static_cast<int>(sy), 2);
      const double fx = sx - x0, fy = sy - y0;
      const double top = src.at(x0, y0) * (1 - fx) + src.at(x0 + 1, y0) * fx;
      const double bot = src.at(x0, y0 + 1) * (1 - fx) + src.at(x0 + 1, y0 + 1) * fx;
      CHECK(dst.at(x, y) == doctest::Approx(top * (1 - fy) + bot * fy).epsilon(1e-12));
    }
  }
}

}  // namespace
}  // namespace segx
