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

#include "segx/xai.h"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "segx/error.h"
#include "segx/parallel.h"
#include "segx/rng.h"

namespace segx {
namespace {

double Binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Shapley kernel weight for a coalition of size s out of m players.
double KernelWeight(int m, int s) {
  return (m - 1) / (Binomial(m, s) * s * (m - s));
}

std::vector<std::uint8_t> BitsOf(std::uint64_t subset, int m) {
  std::vector<std::uint8_t> z(m);
  for (int i = 0; i < m; ++i) z[i] = (subset >> i) & 1u;
  return z;
}

void CheckClass(const ModelAdapter& adapter, int class_j) {
  if (class_j < 0 || class_j >= adapter.n_classes()) {
    throw ArgumentError("class index " + std::to_string(class_j) + " out of range");
  }
}

std::vector<double> ResolveBaseline(const Image& image,
                                    const std::optional<std::vector<double>>& baseline) {
  if (!baseline) return image.ChannelMeans();
  if (baseline->size() != static_cast<std::size_t>(image.channels())) {
    throw ArgumentError("baseline must have one value per channel");
  }
  return *baseline;
}

}  // namespace

SuperpixelGrid::SuperpixelGrid(int rows, int cols, int width, int height)
    : rows_(rows), cols_(cols), width_(width), height_(height) {
  if (rows <= 0 || cols <= 0 || width <= 0 || height <= 0) {
    throw ArgumentError("SuperpixelGrid: dimensions must be positive");
  }
  if (rows > height || cols > width) {
    throw ArgumentError("SuperpixelGrid: more grid cells than pixels along an axis");
  }
  if (rows * cols < 2) throw ArgumentError("SuperpixelGrid: need at least 2 regions");
  region_of_.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const int r = static_cast<int>(static_cast<long long>(y) * rows / height);
    for (int x = 0; x < width; ++x) {
      const int c = static_cast<int>(static_cast<long long>(x) * cols / width);
      region_of_[static_cast<std::size_t>(y) * width + x] = r * cols + c;
    }
  }
}

SaliencyMap grad_cam_raw(const ModelAdapter& adapter, const Image& image, int class_j) {
  const WhiteBoxHooks* hooks = adapter.hooks();
  if (hooks == nullptr) {
    throw CapabilityError("grad_cam: model adapter exposes no gradient hooks");
  }
  CheckClass(adapter, class_j);
  const ForwardTrace trace = hooks->Trace(image);
  const FeatureVolume grads = hooks->LogitGradients(trace, class_j);
  const FeatureVolume& acts = trace.features;
  const std::size_t plane = acts.plane();

  std::vector<double> alpha(acts.channels, 0.0);
  for (int k = 0; k < acts.channels; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += grads.values[k * plane + i];
    alpha[k] = s / static_cast<double>(plane);
  }
  std::vector<double> cam(plane, 0.0);
  for (std::size_t i = 0; i < plane; ++i) {
    double s = 0.0;
    for (int k = 0; k < acts.channels; ++k) s += alpha[k] * acts.values[k * plane + i];
    cam[i] = std::max(s, 0.0);
  }
  return SaliencyMap(acts.width, acts.height, std::move(cam));
}

SaliencyMap grad_cam(const ModelAdapter& adapter, const Image& image, int class_j) {
  const SaliencyMap raw = grad_cam_raw(adapter, image, class_j);
  return normalize(resample(raw, image.width(), image.height()));
}

CoalitionGame MaskingGame(const ModelAdapter& adapter, const Image& image,
                          const SuperpixelGrid& grid, int class_j,
                          std::span<const double> baseline) {
  CheckClass(adapter, class_j);
  if (grid.width() != image.width() || grid.height() != image.height()) {
    throw ArgumentError("superpixel grid does not match image dimensions");
  }
  std::vector<double> base(baseline.begin(), baseline.end());
  return [&adapter, &image, &grid, class_j, base](std::span<const std::uint8_t> z) {
    Image masked = image;
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        if (z[grid.region(x, y)]) continue;
        for (int c = 0; c < image.channels(); ++c) masked.at(x, y, c) = base[c];
      }
    }
    const auto probs = adapter.Forward(masked);
    return probs.at(static_cast<std::size_t>(class_j));
  };
}

ShapAttribution kernel_shap_game(const CoalitionGame& game, int m,
                                 const KernelShapOptions& options) {
  if (m < 2) throw ArgumentError("kernel_shap: need at least 2 regions");
  ShapAttribution out;
  out.exact_enumeration = m <= options.exact_max_regions && m <= 62;

  // Interior coalitions with their regression weights.
  std::vector<std::vector<std::uint8_t>> coalitions;
  std::vector<double> weights;
  if (out.exact_enumeration) {
    const std::uint64_t total = std::uint64_t{1} << m;
    for (std::uint64_t s = 1; s + 1 < total; ++s) {
      auto z = BitsOf(s, m);
      const int size = static_cast<int>(std::count(z.begin(), z.end(), 1));
      coalitions.push_back(std::move(z));
      weights.push_back(KernelWeight(m, size));
    }
  } else {
    if (options.n_coalitions < 2) {
      throw ArgumentError("kernel_shap: n_coalitions must be >= 2");
    }
    // Sizes drawn proportionally to their total kernel mass; each sample
    // then carries unit weight. Samples come in complementary pairs.
    std::vector<double> size_mass(m, 0.0);
    double mass = 0.0;
    for (int s = 1; s < m; ++s) {
      size_mass[s] = (m - 1.0) / (static_cast<double>(s) * (m - s));
      mass += size_mass[s];
    }
    Xoshiro256 rng(options.seed);
    std::vector<int> players(m);
    const int budget = options.n_coalitions - 2;
    while (static_cast<int>(coalitions.size()) < budget) {
      double u = rng.Uniform() * mass;
      int size = 1;
      while (size < m - 1 && u >= size_mass[size]) u -= size_mass[size++];
      for (int i = 0; i < m; ++i) players[i] = i;
      std::vector<std::uint8_t> z(m, 0);
      for (int i = 0; i < size; ++i) {
        const auto j = i + static_cast<int>(rng.Below(static_cast<std::uint64_t>(m - i)));
        std::swap(players[i], players[j]);
        z[players[i]] = 1;
      }
      std::vector<std::uint8_t> complement(m);
      for (int i = 0; i < m; ++i) complement[i] = 1 - z[i];
      coalitions.push_back(std::move(z));
      weights.push_back(1.0);
      if (static_cast<int>(coalitions.size()) < budget) {
        coalitions.push_back(std::move(complement));
        weights.push_back(1.0);
      }
    }
  }

  const std::vector<std::uint8_t> none(m, 0);
  const std::vector<std::uint8_t> all(m, 1);
  out.base_value = game(none);
  out.full_value = game(all);
  std::vector<double> values(coalitions.size());
  ParallelFor(coalitions.size(), options.jobs,
              [&](std::size_t i) { values[i] = game(coalitions[i]); });
  out.evaluations = coalitions.size() + 2;

  // Eliminate the last player with the efficiency constraint:
  //   y - z_last * delta = sum_{i<last} phi_i (z_i - z_last).
  const double delta = out.full_value - out.base_value;
  const int last = m - 1;
  const auto rows = static_cast<Eigen::Index>(coalitions.size());
  Eigen::MatrixXd design(rows, last);
  Eigen::VectorXd target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& z = coalitions[static_cast<std::size_t>(r)];
    const double sw = std::sqrt(weights[static_cast<std::size_t>(r)]);
    for (int i = 0; i < last; ++i) design(r, i) = sw * (z[i] - z[last]);
    target(r) = sw * (values[static_cast<std::size_t>(r)] - out.base_value - z[last] * delta);
  }

  out.phi.assign(m, 0.0);
  if (last > 0 && rows > 0) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    out.least_norm_fallback = cod.rank() < last;
    const Eigen::VectorXd sol = cod.solve(target);
    double partial = 0.0;
    for (int i = 0; i < last; ++i) {
      out.phi[i] = sol(i);
      partial += sol(i);
    }
    out.phi[last] = delta - partial;
  } else {
    out.least_norm_fallback = true;
    for (auto& p : out.phi) p = delta / m;
  }
  return out;
}

ShapAttribution kernel_shap_attributions(const ModelAdapter& adapter, const Image& image,
                                         const SuperpixelGrid& grid, int class_j,
                                         const KernelShapOptions& options) {
  const auto baseline = ResolveBaseline(image, options.baseline);
  const CoalitionGame game = MaskingGame(adapter, image, grid, class_j, baseline);
  return kernel_shap_game(game, grid.region_count(), options);
}

SaliencyMap attribution_map(std::span<const double> phi, const SuperpixelGrid& grid,
                            AttributionPolarity polarity) {
  if (phi.size() != static_cast<std::size_t>(grid.region_count())) {
    throw ArgumentError("attribution_map: one attribution per region required");
  }
  std::vector<double> values(grid.region_map().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double a = phi[static_cast<std::size_t>(grid.region_map()[i])];
    values[i] = polarity == AttributionPolarity::kPositive ? std::max(a, 0.0) : std::abs(a);
  }
  return normalize(SaliencyMap(grid.width(), grid.height(), std::move(values)));
}

SaliencyMap kernel_shap(const ModelAdapter& adapter, const Image& image,
                        const SuperpixelGrid& grid, int class_j,
                        const KernelShapOptions& options) {
  const ShapAttribution attr = kernel_shap_attributions(adapter, image, grid, class_j, options);
  return attribution_map(attr.phi, grid, options.polarity);
}

std::vector<double> exact_shapley_game(const CoalitionGame& game, int m) {
  if (m < 1) throw ArgumentError("exact_shapley: need at least one player");
  if (m > kMaxExactRegions) {
    throw ArgumentError("exact_shapley: " + std::to_string(m) +
                        " regions exceeds the enumeration limit of 12");
  }
  const std::uint64_t total = std::uint64_t{1} << m;
  std::vector<double> value(total);
  for (std::uint64_t s = 0; s < total; ++s) value[s] = game(BitsOf(s, m));

  // |S|! (m - |S| - 1)! / m!
  std::vector<double> fact(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) fact[i] = fact[i - 1] * i;
  std::vector<double> w(m);
  for (int s = 0; s < m; ++s) w[s] = fact[s] * fact[m - s - 1] / fact[m];

  std::vector<double> phi(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    for (std::uint64_t s = 0; s < total; ++s) {
      if (s & bit) continue;
      phi[i] += w[std::popcount(s)] * (value[s | bit] - value[s]);
    }
  }
  return phi;
}

std::vector<double> exact_shapley(const ModelAdapter& adapter, const Image& image,
                                  const SuperpixelGrid& grid, int class_j,
                                  std::optional<std::vector<double>> baseline) {
  if (grid.region_count() > kMaxExactRegions) {
    throw ArgumentError("exact_shapley: " + std::to_string(grid.region_count()) +
                        " regions exceeds the enumeration limit of 12");
  }
  const auto base = ResolveBaseline(image, baseline);
  return exact_shapley_game(MaskingGame(adapter, image, grid, class_j, base),
                            grid.region_count());
}

}  // namespace segx
