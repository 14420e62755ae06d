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
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "fd_check.h"
#include "segx/error.h"
#include "segx/io.h"
#include "segx/synth.h"
#include "segx/tinynet.h"
#include "test_util.h"
#include "tinynet_reference.h"

namespace segx {
namespace {

using testing::GoldenImage;
using testing::KindOf;
using testing::RandomImage;

TEST_CASE("init: deterministic, seed-sensitive, fan-in bounds") {
  const auto a = TinyNet::Init(42, 3, 2, HeadKind::kSoftmax);
  const auto b = TinyNet::Init(42, 3, 2, HeadKind::kSoftmax);
  const auto c = TinyNet::Init(43, 3, 2, HeadKind::kSoftmax);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.param_count() == 8 * 27 + 8 + 16 * 72 + 16 + 2 * 16 + 2);

  auto max_abs = [&a](std::size_t from, std::size_t to) {
    double m = 0.0;
    for (std::size_t i = from; i < to; ++i) m = std::max(m, std::abs(a.params()[i]));
    return m;
  };
  const double s1 = std::sqrt(6.0 / 27.0);
  const double s2 = std::sqrt(6.0 / 72.0);
  const double s3 = std::sqrt(6.0 / 16.0);
  CHECK(max_abs(0, a.conv1_bias_offset()) <= s1);
  CHECK(max_abs(0, a.conv1_bias_offset()) > 0.9 * s1);
  CHECK(max_abs(a.conv2_weight_offset(), a.conv2_bias_offset()) <= s2);
  CHECK(max_abs(a.conv2_weight_offset(), a.conv2_bias_offset()) > 0.95 * s2);
  CHECK(max_abs(a.head_weight_offset(), a.head_bias_offset()) <= s3);
  CHECK(max_abs(a.conv1_bias_offset(), a.conv2_weight_offset()) == 0.0);
  CHECK(max_abs(a.conv2_bias_offset(), a.head_weight_offset()) == 0.0);
  CHECK(max_abs(a.head_bias_offset(), a.param_count()) == 0.0);
  CHECK(KindOf([] { TinyNet::Init(1, 0, 2, HeadKind::kSoftmax); }) == ErrorKind::kArgument);
  CHECK(KindOf([] { TinyNet::Init(1, 3, 0, HeadKind::kSoftmax); }) == ErrorKind::kArgument);
}

TEST_CASE("zero weights give uniform outputs") {
  const auto img = GoldenImage(12, 10, 3);
  const auto soft = TinyNet::Zeros(3, 4, HeadKind::kSoftmax).Probabilities(img);
  for (double p : soft) CHECK(p == 0.25);
  const auto sig = TinyNet::Zeros(3, 3, HeadKind::kSigmoid).Probabilities(img);
  for (double p : sig) CHECK(p == 0.5);
}

TEST_CASE("forward matches the frozen golden trace") {
  const auto img = GoldenImage(16, 16, 3);
  const auto net = TinyNet::Init(42, 3, 3, HeadKind::kSoftmax);
  const auto t = net.Forward(img);
  // Produced once by the straight-line reference in tinynet_reference.h.
  const double logits[] = {-2.5548162355428108, -0.80338722875952095, 0.16227446752128333};
  const double probs[] = {0.045664072390606811, 0.2631543740011843, 0.69118155360820888};
  for (int j = 0; j < 3; ++j) {
    CHECK(t.logits[j] == doctest::Approx(logits[j]).epsilon(1e-12));
    CHECK(t.probs[j] == doctest::Approx(probs[j]).epsilon(1e-12));
  }
  const auto sig = TinyNet::Init(42, 3, 3, HeadKind::kSigmoid).Probabilities(img);
  const double sig_probs[] = {0.07210359193023301, 0.30930142443408404, 0.54047982622692248};
  for (int j = 0; j < 3; ++j) CHECK(sig[j] == doctest::Approx(sig_probs[j]).epsilon(1e-12));
}

TEST_CASE("forward matches the reference on random nets and sizes") {
  std::mt19937_64 g(21);
  for (int trial = 0; trial < 8; ++trial) {
    const int C = 1 + 2 * (trial % 2);
    const int N = 2 + trial % 3;
    const bool softmax = trial % 3 != 0;
    const auto net =
        TinyNet::Init(100 + trial, C, N, softmax ? HeadKind::kSoftmax : HeadKind::kSigmoid);
    const auto img = RandomImage(g, 8 + trial, 9 + 2 * trial, C);
    const auto t = net.Forward(img);
    const auto r = testing::RefForward(net.params(), C, N, softmax, img);
    for (int j = 0; j < N; ++j) CHECK(t.probs[j] == doctest::Approx(r.probs[j]).epsilon(1e-12));
    REQUIRE(t.features.channels == 16);
    REQUIRE(t.features.height == static_cast<int>(r.features[0].size()));
    REQUIRE(t.features.width == static_cast<int>(r.features[0][0].size()));
    for (int k = 0; k < 16; ++k) {
      for (int y = 0; y < t.features.height; ++y) {
        for (int x = 0; x < t.features.width; ++x) {
          CHECK(t.features.at(k, y, x) == doctest::Approx(r.features[k][y][x]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("forward is bit-reproducible and softmax sums to one") {
  std::mt19937_64 g(4);
  const auto net = TinyNet::Init(9, 3, 5, HeadKind::kSoftmax);
  for (int trial = 0; trial < 30; ++trial) {
    const auto img = RandomImage(g, 16, 16, 3);
    const auto a = net.Forward(img);
    const auto b = net.Forward(img);
    CHECK(a.probs == b.probs);
    CHECK(a.features.values == b.features.values);
    double s = 0.0;
    for (double p : a.probs) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      s += p;
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("forward rejects NaN and undersized images") {
  const auto net = TinyNet::Init(1, 1, 2, HeadKind::kSoftmax);
  std::vector<double> v(64, 0.5);
  v[10] = NAN;
  CHECK(KindOf([&] { net.Forward(Image(8, 8, 1, v)); }) == ErrorKind::kValidation);
  CHECK(KindOf([&] { net.Forward(Image::Filled(7, 9, 1, 0.5)); }) == ErrorKind::kArgument);
  CHECK(KindOf([&] { net.Forward(Image::Filled(8, 8, 3, 0.5)); }) == ErrorKind::kArgument);
}

TEST_CASE("activation gradients match central differences") {
  std::mt19937_64 g(31);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int N = 2 + trial % 3;
    const auto net = TinyNet::Init(500 + trial, 3, N, HeadKind::kSoftmax);
    const auto img = RandomImage(g, 16, 16, 3);
    const int j = trial % N;
    const auto t = net.Forward(img);
    const auto grad = net.LogitGradients(t, j);
    auto A = testing::RefForward(net.params(), 3, N, true, img).features;
    for (int k = 0; k < 16; ++k) {
      for (int y = 0; y < t.features.height; ++y) {
        for (int x = 0; x < t.features.width; ++x) {
          const double keep = A[k][y][x];
          A[k][y][x] = keep + testing::kFdStep;
          const double up = testing::RefHeadLogit(net.params(), 3, N, j, A);
          A[k][y][x] = keep - testing::kFdStep;
          const double down = testing::RefHeadLogit(net.params(), 3, N, j, A);
          A[k][y][x] = keep;
          const double fd = (up - down) / (2 * testing::kFdStep);
          worst = std::max(worst, testing::RelError(grad.at(k, y, x), fd));
        }
      }
    }
  }
  MESSAGE("max relative error d logit / dA: " << worst);
  CHECK(worst < 1e-6);
}

TEST_CASE("parameter gradients match central differences") {
  std::mt19937_64 g(37);
  const auto stats = testing::ParameterGradientCheck(g, 10);
  MESSAGE("max relative error dL/dtheta: " << stats.worst << " over " << stats.checked
                                           << " coordinates, " << stats.skipped
                                           << " skipped at kinks");
  CHECK(stats.checked > 10000);
  CHECK(stats.skipped * 100 < stats.checked);
  CHECK(stats.worst < 1e-5);
}

TEST_CASE("zero head row gives zero gradients; other rows do not matter") {
  std::mt19937_64 g(41);
  auto net = TinyNet::Init(7, 3, 3, HeadKind::kSoftmax);
  const auto img = RandomImage(g, 16, 16, 3);
  for (int k = 0; k < 16; ++k) net.set_head_weight(1, k, 0.0);
  const auto zero = net.LogitGradients(net.Forward(img), 1);
  for (double v : zero.values) CHECK(v == 0.0);

  const auto before = net.LogitGradients(net.Forward(img), 0);
  for (int k = 0; k < 16; ++k) net.set_head_weight(2, k, 5.0 * k - 3.0);
  const auto after = net.LogitGradients(net.Forward(img), 0);
  CHECK(before.values == after.values);
}

TEST_CASE("stale traces are refused") {
  auto net = TinyNet::Init(7, 1, 2, HeadKind::kSoftmax);
  const auto t = net.Forward(Image::Filled(8, 8, 1, 0.3));
  net.mutable_params()[0] += 1e-3;
  CHECK(KindOf([&] { net.LogitGradients(t, 0); }) == ErrorKind::kState);
  CHECK(KindOf([&] { net.LogitGradients(net.Forward(Image::Filled(8, 8, 1, 0.3)), 2); }) ==
        ErrorKind::kArgument);
}

TEST_CASE("loss values") {
  const auto img = GoldenImage(16, 16, 3);
  const auto net = TinyNet::Init(42, 3, 3, HeadKind::kSoftmax);
  const std::vector<double> onehot = {0, 0, 1};
  CHECK(net.Loss(img, onehot) == doctest::Approx(-std::log(0.69118155360820888)).epsilon(1e-12));
  const auto sig = TinyNet::Init(42, 3, 3, HeadKind::kSigmoid);
  const std::vector<double> multi = {1, 0, 1};
  const double p[] = {0.07210359193023301, 0.30930142443408404, 0.54047982622692248};
  const double bce = -(std::log(p[0]) + std::log(1 - p[1]) + std::log(p[2])) / 3.0;
  CHECK(sig.Loss(img, multi) == doctest::Approx(bce).epsilon(1e-12));
  CHECK(KindOf([&] { net.Loss(img, std::vector<double>{1, 0}); }) == ErrorKind::kArgument);
}

TEST_CASE("lr = 0 leaves parameters unchanged") {
  std::mt19937_64 g(43);
  const auto net = TinyNet::Init(3, 3, 2, HeadKind::kSoftmax);
  std::vector<LabeledImage> data = {{RandomImage(g, 8, 8, 3), {1, 0}},
                                    {RandomImage(g, 8, 8, 3), {0, 1}}};
  CHECK(Train(net, data, 2, 0.0, 1) == net);
  CHECK(KindOf([&] { Train(net, data, 1, -0.1, 1); }) == ErrorKind::kArgument);
  CHECK(KindOf([&] { Train(net, {}, 1, 0.1, 1); }) == ErrorKind::kArgument);
}

TEST_CASE("one SGD step equals theta - lr * finite-difference gradient") {
  std::mt19937_64 g(47);
  const auto net = TinyNet::Init(11, 3, 2, HeadKind::kSoftmax);
  const std::vector<LabeledImage> data = {{RandomImage(g, 12, 12, 3), {0, 1}}};
  const double lr = 0.1;
  const auto stepped = Train(net, data, 1, lr, 5);
  const auto fd = testing::FiniteDifferenceGradient(net, data[0].image, data[0].target);
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    if (!fd.valid[i]) continue;
    const double expected = net.params()[i] - lr * fd.grad[i];
    worst = std::max(worst, testing::RelError(stepped.params()[i] - net.params()[i],
                                              expected - net.params()[i]));
    ++checked;
  }
  MESSAGE("max relative error of the SGD update: " << worst);
  CHECK(checked > net.param_count() * 9 / 10);
  CHECK(worst < 1e-5);
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 g(53);
  std::vector<LabeledImage> data;
  for (int i = 0; i < 6; ++i) data.push_back({RandomImage(g, 8, 8, 1), {i % 2 ? 1.0 : 0.0, i % 2 ? 0.0 : 1.0}});
  const auto net = TinyNet::Init(2, 1, 2, HeadKind::kSoftmax);
  TrainReport r1, r2;
  const auto a = Train(net, data, 3, 0.05, 9, &r1);
  const auto b = Train(net, data, 3, 0.05, 9, &r2);
  CHECK(a == b);
  CHECK(r1.epoch_loss == r2.epoch_loss);
  CHECK(r1.epoch_loss.size() == 3);
  CHECK_FALSE(Train(net, data, 3, 0.05, 10) == a);
}

TEST_CASE("predict thresholds") {
  const std::vector<double> t3 = {0.5, 0.5, 0.5};
  const auto p = PredictFromProbabilities(std::vector<double>{0.7, 0.2, 0.6}, t3, HeadKind::kSigmoid);
  CHECK(p.labels == std::vector<int>{0, 2});
  CHECK_FALSE(p.argmax.has_value());
  const auto all = PredictFromProbabilities(std::vector<double>{0.1, 0.0001, 0.9},
                                            std::vector<double>{0, 0, 0}, HeadKind::kSigmoid);
  CHECK(all.labels == std::vector<int>{0, 1, 2});
  const auto s = PredictFromProbabilities(std::vector<double>{0.4, 0.6},
                                          std::vector<double>{0.5, 0.5}, HeadKind::kSoftmax);
  CHECK(s.labels == std::vector<int>{1});
  CHECK(s.argmax == 1);
  const auto net = TinyNet::Init(1, 1, 3, HeadKind::kSoftmax);
  CHECK(KindOf([&] { net.Predict(Image::Filled(8, 8, 1, 0.5), std::vector<double>{0.5, 0.5}); }) ==
        ErrorKind::kArgument);
}

TEST_CASE("checkpoint layout and round trip") {
  testing::TempDir dir("ckpt");
  const auto net = TinyNet::Init(42, 3, 4, HeadKind::kSigmoid);
  const auto path = dir.path() / "net.tnet";
  net.Save(path);
  const std::string bytes = read_text_file(path);
  REQUIRE(bytes.size() == 5 + 4 * 3 + 8 + 8 * net.param_count());
  CHECK(bytes.substr(0, 5) == "TNET1");
  auto u32 = [&bytes](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
  };
  CHECK(u32(5) == 3);
  CHECK(u32(9) == 4);
  CHECK(u32(13) == 1);
  CHECK(u32(17) == net.param_count());
  CHECK(u32(21) == 0);
  std::uint64_t first = 0;
  for (int i = 7; i >= 0; --i) first = (first << 8) | static_cast<unsigned char>(bytes[25 + i]);
  CHECK(std::bit_cast<double>(first) == net.params()[0]);
  CHECK(TinyNet::Load(path) == net);

  write_text_file(dir.path() / "bad.tnet", "TNET2" + bytes.substr(5));
  CHECK(KindOf([&] { TinyNet::Load(dir.path() / "bad.tnet"); }) == ErrorKind::kFormat);
  write_text_file(dir.path() / "short.tnet", bytes.substr(0, bytes.size() - 3));
  CHECK(KindOf([&] { TinyNet::Load(dir.path() / "short.tnet"); }) == ErrorKind::kFormat);
  write_text_file(dir.path() / "long.tnet", bytes + "x");
  CHECK(KindOf([&] { TinyNet::Load(dir.path() / "long.tnet"); }) == ErrorKind::kFormat);
  CHECK(KindOf([&] { TinyNet::Load(dir.path() / "missing.tnet"); }) == ErrorKind::kIo);
}

TEST_CASE("synthetic blob task: 500 training images, 5 epochs, >= 90% test accuracy") {
  SynthConfig c;
  c.n_images = 715;
  const auto samples = generate(c);
  const auto parts = split(samples.size(), {0.7, 0.1, 0.2}, 42);
  REQUIRE(parts.train.size() == 500);
  auto make = [&samples](const std::vector<std::size_t>& idx) {
    std::vector<LabeledImage> out;
    for (auto i : idx) {
      std::vector<double> t(2, 0.0);
      t[samples[i].label] = 1.0;
      out.push_back({samples[i].image, t});
    }
    return out;
  };
  const auto train = make(parts.train);
  const auto test = make(parts.test);
  TrainReport report;
  const auto net = Train(TinyNet::Init(42, 3, 2, HeadKind::kSoftmax), train, 5, 0.05, 42, &report);
  const double accuracy = 1.0 - ErrorRate(net, test);
  MESSAGE("test accuracy " << accuracy << ", loss " << report.initial_loss << " -> "
                           << report.final_loss);
  CHECK(accuracy >= 0.9);
  CHECK(report.final_loss < report.initial_loss);
}

}  // namespace
}  // namespace segx
