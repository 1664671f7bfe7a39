// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hsnet/config.hpp"
#include "hsnet/correlation.hpp"
#include "hsnet/evaluate.hpp"
#include "hsnet/manifest.hpp"
#include "hsnet/synthetic.hpp"
#include "hsnet/tensor_io.hpp"
#include "test_util.hpp"

using namespace hsnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("hsnet_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool same(const FeatureSet<float>& a, const FeatureSet<float>& b) {
  return a.layer_ids == b.layer_ids && a.group_sizes == b.group_sizes && a.features == b.features;
}

bool same(const Episode<float>& a, const Episode<float>& b) {
  if (a.class_id != b.class_id || !same(a.query, b.query) || a.query_mask != b.query_mask) return false;
  if (a.supports.size() != b.supports.size()) return false;
  for (std::size_t k = 0; k < a.supports.size(); ++k) {
    if (!same(a.supports[k].features, b.supports[k].features) || a.supports[k].mask != b.supports[k].mask) return false;
  }
  return true;
}

Config parse(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in, "test.cfg");
}

}  // namespace

TEST(Synthetic, DeterministicBySeed) {
  SyntheticEpisodeSpec spec;
  spec.seed = 11;
  spec.shots = 3;
  const auto a = generate_synthetic_episode<float>(spec);
  EXPECT_TRUE(same(a, generate_synthetic_episode<float>(spec)));
  spec.seed = 12;
  EXPECT_FALSE(same(a, generate_synthetic_episode<float>(spec)));
}

TEST(Synthetic, ShapesFollowSchedule) {
  for (auto bb : {Backbone::kToy, Backbone::kVgg16}) {
    SyntheticEpisodeSpec spec;
    spec.backbone = bb;
    spec.shots = 2;
    spec.max_blob = 3;
    const auto ep = generate_synthetic_episode<float>(spec);
    const auto sched = backbone_schedule(bb);
    const auto shapes = sched.feature_shapes();
    ASSERT_EQ(ep.query.features.size(), shapes.size());
    for (std::size_t l = 0; l < shapes.size(); ++l) EXPECT_EQ(ep.query.features[l].dims(), shapes[l]);
    EXPECT_EQ(ep.query.group_sizes, sched.group_sizes());
    EXPECT_EQ(ep.query_mask.dims(), (Shape{sched.image_size, sched.image_size}));
    ASSERT_EQ(ep.supports.size(), 2u);
    double fg = 0;
    for (float v : ep.query_mask.values()) {
      EXPECT_TRUE(v == 0.0f || v == 1.0f);
      fg += v;
    }
    EXPECT_GT(fg, 0.0);
    EXPECT_LT(fg, double(ep.query_mask.size()));
  }
}

TEST(Synthetic, NoiselessForegroundCorrelatesPerfectly) {
  SyntheticEpisodeSpec spec;
  spec.noise = 0;
  spec.seed = 5;
  const auto ep = generate_synthetic_episode<double>(spec);
  const auto& s = ep.supports[0];
  const auto sched = backbone_schedule(spec.backbone);
  // Finest layer: positions whose resized mask is exactly 1 carry the
  // planted vector alone, so query-support cosine there is 1.
  const auto& q = ep.query.features[0];
  const auto& f = s.features.features[0];
  const std::size_t n = sched.levels[0].size;
  const auto qfrac = bilinear_resize(ep.query_mask.reshaped({1, 64, 64}), n, n);
  const auto sfrac = bilinear_resize(s.mask.reshaped({1, 64, 64}), n, n);
  const auto corr = correlation_4d(q, f);
  std::size_t checked = 0;
  for (std::size_t a = 0; a < n * n; ++a) {
    if (qfrac[a] != 1.0) continue;
    for (std::size_t b = 0; b < n * n; ++b) {
      if (sfrac[b] != 1.0) continue;
      EXPECT_NEAR(corr[a * n * n + b], 1.0, 1e-12);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(Synthetic, IgnoreBandSurroundsForeground) {
  SyntheticEpisodeSpec spec;
  spec.ignore_band = 2;
  const auto banded = generate_synthetic_episode<float>(spec);
  spec.ignore_band = 0;
  const auto plain = generate_synthetic_episode<float>(spec);
  std::size_t ignored = 0;
  for (std::size_t i = 0; i < plain.query_mask.size(); ++i) {
    const float b = banded.query_mask[i], p = plain.query_mask[i];
    if (b == 255.0f) {
      EXPECT_EQ(p, 0.0f);
      ++ignored;
    } else {
      EXPECT_EQ(b, p);
    }
  }
  EXPECT_GT(ignored, 0u);
  EXPECT_EQ(banded.supports[0].mask, plain.supports[0].mask);
}

TEST(Synthetic, SpecValidation) {
  SyntheticEpisodeSpec spec;
  spec.min_blob = 5;
  spec.max_blob = 3;
  EXPECT_CODE(spec.validate(), ErrorCode::kInvalidSpec);
  spec = {};
  spec.max_blob = 9;  // larger than the 8-cell toy grid
  EXPECT_CODE(spec.validate(), ErrorCode::kInvalidSpec);
  spec = {};
  spec.shots = 0;
  EXPECT_CODE(spec.validate(), ErrorCode::kInvalidSpec);
}

TEST(Config, ParsesCommentsAndWhitespace) {
  const auto cfg = parse("# model\n\n backbone = vgg16 \nkernel=original\nlr=0.25\nsteps = 40\n");
  EXPECT_EQ(cfg.get("backbone"), "vgg16");
  EXPECT_EQ(cfg.get_double("lr", 1), 0.25);
  EXPECT_EQ(cfg.get_size("steps", 1), 40u);
  EXPECT_EQ(cfg.get_size("missing", 7), 7u);
  EXPECT_EQ(cfg.get_or("missing", "x"), "x");
  EXPECT_FALSE(cfg.has("# model"));
  const auto arch = architecture_from_config(cfg);
  EXPECT_EQ(arch.backbone.tag, Backbone::kVgg16);
  EXPECT_EQ(arch.variant(), Conv4dVariant::kOriginal);
}

TEST(Config, Errors) {
  EXPECT_CODE(parse("backbone=vgg16\nbackbone=resnet50\n"), ErrorCode::kInvalidSpec);
  try {
    parse("a=1\nno equals sign\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidSpec);
    EXPECT_NE(std::string(e.what()).find("test.cfg:2"), std::string::npos) << e.what();
  }
  const auto cfg = parse("steps=-3\nlr=fast\nbackbone=alexnet\n");
  EXPECT_CODE(cfg.get_size("steps", 1), ErrorCode::kInvalidSpec);
  EXPECT_CODE(cfg.get_double("lr", 1), ErrorCode::kInvalidSpec);
  EXPECT_CODE(cfg.get("absent"), ErrorCode::kInvalidSpec);
  EXPECT_CODE(architecture_from_config(cfg), ErrorCode::kInvalidSpec);
  EXPECT_CODE(Config::load("/nonexistent/hsnet.cfg"), ErrorCode::kIo);
}

TEST(Manifest, WriteReadLoadRoundTrip) {
  const auto dir = scratch("roundtrip");
  EpisodeManifest m;
  m.backbone = Backbone::kToy;
  std::vector<Episode<float>> episodes;
  for (std::uint64_t s = 0; s < 2; ++s) {
    SyntheticEpisodeSpec spec;
    spec.seed = s;
    spec.shots = 2;
    spec.class_id = s + 3;
    episodes.push_back(generate_synthetic_episode<float>(spec));
    m.episodes.push_back(write_episode_files(episodes.back(), dir, "ep" + std::to_string(s)));
  }
  write_manifest(m, dir / "manifest.txt");
  std::ifstream text(dir / "manifest.txt");
  std::string first;
  std::getline(text, first);
  EXPECT_EQ(first, "backbone=toy");

  const auto back = read_manifest(dir / "manifest.txt");
  EXPECT_EQ(back.backbone, Backbone::kToy);
  ASSERT_EQ(back.episodes.size(), 2u);
  EXPECT_TRUE(validate_manifest(back).empty());
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.episodes[i].name, m.episodes[i].name);
    EXPECT_EQ(back.episodes[i].class_id, m.episodes[i].class_id);
    EXPECT_EQ(back.episodes[i].supports.size(), 2u);
    EXPECT_TRUE(same(load_episode<float>(back.episodes[i], backbone_schedule(Backbone::kToy)), episodes[i]));
  }
  fs::remove_all(dir);
}

TEST(Manifest, ValidationNamesTheBadFile) {
  const auto dir = scratch("validate");
  EpisodeManifest m;
  m.backbone = Backbone::kToy;
  m.episodes.push_back(write_episode_files(generate_synthetic_episode<float>({}), dir, "e0"));
  const auto bad = m.episodes[0].query_features[1];
  write_tensor(Tensor<float>({32, 8, 9}), bad);
  fs::remove(m.episodes[0].supports[0].mask);
  const auto problems = validate_manifest(m);
  ASSERT_EQ(problems.size(), 2u);
  EXPECT_EQ(problems[0], "e0: " + bad.string() + ": shape (32, 8, 9), expected (32, 8, 8)");
  EXPECT_EQ(problems[1].rfind("e0: " + m.episodes[0].supports[0].mask.string() + ": ", 0), 0u) << problems[1];

  m.backbone = Backbone::kResNet101;
  const auto wrong = validate_manifest(m);
  ASSERT_FALSE(wrong.empty());
  EXPECT_EQ(wrong[0], "e0: query_features: 5 files, backbone resnet101 needs 30");
  fs::remove_all(dir);
}

TEST(Manifest, ParseErrorsCarryLocation) {
  const auto dir = scratch("parse");
  auto write = [&](const std::string& text) {
    std::ofstream(dir / "m.txt") << text;
    return dir / "m.txt";
  };
  try {
    read_manifest(write("backbone=toy\nepisode=a\nclass=1\nwhatever=3\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kManifest);
    EXPECT_NE(std::string(e.what()).find("m.txt:4"), std::string::npos) << e.what();
  }
  EXPECT_CODE(read_manifest(write("episode=a\n")), ErrorCode::kManifest);
  EXPECT_CODE(read_manifest(write("backbone=toy\nepisode=a\nquery_features=x\nquery_mask=y\n")), ErrorCode::kManifest);
  EXPECT_CODE(read_manifest(dir / "absent.txt"), ErrorCode::kIo);
  fs::remove_all(dir);
}

TEST(Evaluate, PredictionsEqualToTruthScorePerfectly) {
  const auto dir = scratch("eval");
  EpisodeManifest m;
  m.backbone = Backbone::kToy;
  for (std::uint64_t s = 0; s < 3; ++s) {
    SyntheticEpisodeSpec spec;
    spec.seed = s;
    spec.class_id = s;
    spec.ignore_band = 1;
    const auto ep = generate_synthetic_episode<float>(spec);
    auto entry = write_episode_files(ep, dir, "ep" + std::to_string(s));
    auto pred = ep.query_mask;
    for (auto& v : pred.values()) v = v == 1.0f ? 1.0f : 0.0f;
    entry.prediction = dir / ("pred" + std::to_string(s) + ".hstn");
    write_tensor(pred.reshaped({1, 64, 64}), *entry.prediction);
    m.episodes.push_back(entry);
  }
  write_manifest(m, dir / "manifest.txt");
  const auto r = evaluate_manifest<float>(read_manifest(dir / "manifest.txt"), nullptr);
  EXPECT_EQ(r.from_files, 3u);
  EXPECT_EQ(miou(r.accumulator), 1.0);
  EXPECT_EQ(fbiou(r.accumulator), 1.0);

  // Without prediction files the model is required and must match.
  for (auto& e : m.episodes) e.prediction.reset();
  EXPECT_CODE(evaluate_manifest<float>(m, nullptr), ErrorCode::kInvalidSpec);
  HsNet<float> toy(make_architecture(Backbone::kToy), 0);
  const auto scored = evaluate_manifest(m, &toy);
  EXPECT_EQ(scored.from_model, 3u);
  EXPECT_EQ(scored.accumulator.episodes(), 3u);
  HsNet<float> vgg(make_architecture(Backbone::kVgg16), 0);
  EXPECT_CODE(evaluate_manifest(m, &vgg), ErrorCode::kInvalidSpec);
  fs::remove_all(dir);
}
