// SPDX-License-Identifier: Apache-2.0
#include "hsnet/synthetic.hpp"

#include <algorithm>
#include <random>

#include "hsnet/ops.hpp"
#include "hsnet/tensor_ops.hpp"

namespace hsnet {

void SyntheticEpisodeSpec::validate() const {
  const auto sched = backbone_schedule(backbone);
  const std::size_t cells = sched.levels[0].size;
  if (shots == 0) throw Error(ErrorCode::kInvalidSpec, "shots must be at least 1");
  if (blobs == 0) throw Error(ErrorCode::kInvalidSpec, "need at least one blob");
  if (min_blob == 0 || min_blob > max_blob || max_blob >= cells) {
    throw Error(ErrorCode::kInvalidSpec, "blob sizes must satisfy 1 <= min <= max < " + std::to_string(cells));
  }
  if (sched.image_size % cells != 0) throw Error(ErrorCode::kInvalidSpec, "image size is not a multiple of the cell grid");
  if (!(noise >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "noise must be non-negative");
}

template <typename T>
Tensor<T> synthetic_mask(std::size_t image, std::size_t cells, const SyntheticEpisodeSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> side(spec.min_blob, spec.max_blob);
  std::vector<bool> grid(cells * cells, false);
  for (std::size_t b = 0; b < spec.blobs; ++b) {
    const std::size_t h = side(rng), w = side(rng);
    const std::size_t top = std::uniform_int_distribution<std::size_t>(0, cells - h)(rng);
    const std::size_t left = std::uniform_int_distribution<std::size_t>(0, cells - w)(rng);
    for (std::size_t i = top; i < top + h; ++i) {
      for (std::size_t j = left; j < left + w; ++j) grid[i * cells + j] = true;
    }
  }
  // Traced through the decoder's own upsampling path (x2, then to the image)
  // so every boundary is one a bilinear decoder can reproduce exactly.
  Tensor<T> coarse({1, cells, cells}, T{0});
  for (std::size_t i = 0; i < grid.size(); ++i) coarse[i] = grid[i] ? T{1} : T{0};
  const auto field = bilinear_resize(bilinear_resize(coarse, 2 * cells, 2 * cells), image, image);
  Tensor<T> mask({image, image}, T{0});
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = field[i] > T{0.5} ? T{1} : T{0};
  return mask;
}

namespace {

template <typename T>
FeatureSet<T> plant(const BackboneSchedule& sched, const std::vector<std::vector<double>>& patterns,
                    const Tensor<T>& mask, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureSet<T> fs;
  fs.group_sizes = sched.group_sizes();
  const auto shapes = sched.feature_shapes();
  const auto image = mask.reshaped({1, mask.dim(0), mask.dim(1)});
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const std::size_t c = shapes[l][0], h = shapes[l][1], w = shapes[l][2];
    const auto frac = bilinear_resize(image, h, w);
    Tensor<T> f(shapes[l]);
    for (std::size_t i = 0; i < h * w; ++i) {
      const double a = frac[i];
      for (std::size_t k = 0; k < c; ++k) {
        const double bg = normal(rng);
        f[k * h * w + i] = static_cast<T>(a * patterns[l][k] + (1.0 - a) * bg + noise * normal(rng));
      }
    }
    fs.layer_ids.push_back(l);
    fs.features.push_back(std::move(f));
  }
  return fs;
}

template <typename T>
void add_ignore_band(Tensor<T>& mask, std::size_t band) {
  if (band == 0) return;
  const std::size_t n = mask.dim(0), m = mask.dim(1);
  const Tensor<T> src = mask;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < m; ++x) {
      if (src(y, x) != T{0}) continue;
      bool near = false;
      const std::size_t y0 = y >= band ? y - band : 0, x0 = x >= band ? x - band : 0;
      for (std::size_t yy = y0; yy <= std::min(n - 1, y + band) && !near; ++yy) {
        for (std::size_t xx = x0; xx <= std::min(m - 1, x + band); ++xx) {
          if (src(yy, xx) == T{1}) {
            near = true;
            break;
          }
        }
      }
      if (near) mask(y, x) = static_cast<T>(ad::kIgnoreLabel);
    }
  }
}

}  // namespace

template <typename T>
Episode<T> generate_synthetic_episode(const SyntheticEpisodeSpec& spec) {
  spec.validate();
  const auto sched = backbone_schedule(spec.backbone);
  const std::size_t image = sched.image_size, cells = sched.levels[0].size;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> patterns;
  for (const auto& s : sched.feature_shapes()) {
    std::vector<double> p(s[0]);
    for (auto& v : p) v = normal(rng);
    patterns.push_back(std::move(p));
  }

  Episode<T> ep;
  ep.class_id = spec.class_id;
  const Tensor<T> query_mask = synthetic_mask<T>(image, cells, spec, rng());
  ep.query = plant(sched, patterns, query_mask, spec.noise, rng);
  ep.query_mask = query_mask;
  add_ignore_band(ep.query_mask, spec.ignore_band);
  for (std::size_t k = 0; k < spec.shots; ++k) {
    SupportEntry<T> s;
    s.mask = synthetic_mask<T>(image, cells, spec, rng());
    s.features = plant(sched, patterns, s.mask, spec.noise, rng);
    ep.supports.push_back(std::move(s));
  }
  return ep;
}

template Episode<float> generate_synthetic_episode(const SyntheticEpisodeSpec&);
template Episode<double> generate_synthetic_episode(const SyntheticEpisodeSpec&);
template Tensor<float> synthetic_mask(std::size_t, std::size_t, const SyntheticEpisodeSpec&, std::uint64_t);
template Tensor<double> synthetic_mask(std::size_t, std::size_t, const SyntheticEpisodeSpec&, std::uint64_t);

}  // namespace hsnet
