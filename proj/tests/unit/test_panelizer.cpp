#include <algorithm>
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vpanel/panelizer.hpp"
#include "vpanel/png_io.hpp"
#include "vpanel/version.hpp"

using namespace vpanel;
using vpanel::testing::Gen;
using vpanel::testing::TempDir;

namespace {

constexpr Rgb kRed{255, 0, 0};
constexpr Rgb kGreen{0, 255, 0};
constexpr Rgb kBlue{0, 0, 255};
constexpr Rgb kWhite{255, 255, 255};

// Reference bilinear resize from the definition: destination pixel centre
// (x + 1/2) maps to source position (x + 1/2) * W / w - 1/2, clamped to
// [0, W - 1]; the four neighbours are blended by area weights and the result
// rounded half up (all values are non-negative). Exact rational arithmetic.
Image reference_resize(const Image& src, int w, int h) {
  const std::int64_t W = src.width();
  const std::int64_t H = src.height();
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    // position = py / (2h)
    std::int64_t py = std::clamp<std::int64_t>((2 * y + 1) * H - h, 0, (H - 1) * 2 * h);
    const std::int64_t y0 = py / (2 * h);
    const std::int64_t y1 = std::min(y0 + 1, H - 1);
    const std::int64_t wy1 = py - y0 * 2 * h;
    const std::int64_t wy0 = 2 * h - wy1;
    for (int x = 0; x < w; ++x) {
      std::int64_t px = std::clamp<std::int64_t>((2 * x + 1) * W - w, 0, (W - 1) * 2 * w);
      const std::int64_t x0 = px / (2 * w);
      const std::int64_t x1 = std::min(x0 + 1, W - 1);
      const std::int64_t wx1 = px - x0 * 2 * w;
      const std::int64_t wx0 = 2 * w - wx1;
      const Rgb a = src.at(static_cast<int>(x0), static_cast<int>(y0));
      const Rgb b = src.at(static_cast<int>(x1), static_cast<int>(y0));
      const Rgb c = src.at(static_cast<int>(x0), static_cast<int>(y1));
      const Rgb d = src.at(static_cast<int>(x1), static_cast<int>(y1));
      const std::int64_t total = 4 * static_cast<std::int64_t>(w) * h;
      auto blend = [&](std::uint8_t va, std::uint8_t vb, std::uint8_t vc, std::uint8_t vd) {
        const std::int64_t num = va * wx0 * wy0 + vb * wx1 * wy0 + vc * wx0 * wy1 + vd * wx1 * wy1;
        return static_cast<std::uint8_t>((2 * num + total) / (2 * total));
      };
      out.set(x, y, {blend(a.r, b.r, c.r, d.r), blend(a.g, b.g, c.g, d.g), blend(a.b, b.b, c.b, d.b)});
    }
  }
  return out;
}

Frame solid_frame(std::int64_t index, int w, int h, Rgb c) { return {index, index * 0.5, Image(w, h, c)}; }

// Tile k carries its id in every pixel.
Frame numbered_tile(std::int64_t k, int w, int h) {
  return solid_frame(k, w, h, {static_cast<std::uint8_t>(k), static_cast<std::uint8_t>(k * 7), 200});
}

SamplePlan make_plan(std::int64_t frames, int rows, int cols, int tw, int th, bool active = true) {
  SamplePlan p;
  p.panel_active = active;
  p.frames_to_sample = frames;
  p.grid_rows = rows;
  p.grid_cols = cols;
  p.tile_width = tw;
  p.tile_height = th;
  const std::int64_t per = rows * cols;
  p.panel_count = (frames + per - 1) / per;
  p.pad_frames = p.panel_count * per - frames;
  for (std::int64_t i = 0; i < frames; ++i) p.frame_indices.push_back(3 * i + 1);
  return p;
}

std::vector<Frame> frames_for(const SamplePlan& plan, int w, int h, Gen& g) {
  std::vector<Frame> out;
  for (const auto i : plan.frame_indices) out.push_back({i, i * 0.5, g.noise(w, h)});
  return out;
}

}  // namespace

TEST(Resize, ConstantFieldIsExact) {
  const Image red(640, 480, kRed);
  const Image out = resize_bilinear(red, 320, 240);
  EXPECT_EQ(out.width(), 320);
  EXPECT_EQ(out.height(), 240);
  EXPECT_TRUE(out.is_uniform(kRed));

  Gen g(301);
  for (int t = 0; t < 50; ++t) {
    const Rgb c{static_cast<std::uint8_t>(g.range(0, 255)), static_cast<std::uint8_t>(g.range(0, 255)),
                static_cast<std::uint8_t>(g.range(0, 255))};
    const Image img(g.irange(1, 50), g.irange(1, 50), c);
    ASSERT_TRUE(resize_bilinear(img, g.irange(1, 60), g.irange(1, 60)).is_uniform(c));
  }
}

TEST(Resize, CheckerboardAveragesToHalf) {
  Image board(2, 2);
  board.set(0, 0, {0, 0, 0});
  board.set(1, 0, {255, 255, 255});
  board.set(0, 1, {255, 255, 255});
  board.set(1, 1, {0, 0, 0});
  // Exact mean is 127.5; half rounds away from zero.
  EXPECT_EQ(resize_bilinear(board, 1, 1).at(0, 0), (Rgb{128, 128, 128}));
}

TEST(Resize, SameSizeIsCopy) {
  Gen g(302);
  const Image img = g.noise(320, 240);
  EXPECT_EQ(resize_bilinear(img, 320, 240), img);
}

TEST(Resize, MatchesReferenceOracle) {
  Gen g(303);
  for (int t = 0; t < 200; ++t) {
    const Image img = g.noise(g.irange(1, 24), g.irange(1, 24));
    const int w = g.irange(1, 30);
    const int h = g.irange(1, 30);
    ASSERT_EQ(resize_bilinear(img, w, h), reference_resize(img, w, h))
        << img.width() << "x" << img.height() << " -> " << w << "x" << h;
  }
}

TEST(Resize, HalvingAveragesPairs) {
  // 2:1 reduction samples exactly between source pixels.
  Image src(4, 1);
  src.set(0, 0, {10, 0, 0});
  src.set(1, 0, {20, 0, 0});
  src.set(2, 0, {30, 0, 0});
  src.set(3, 0, {41, 0, 0});
  const Image out = resize_bilinear(src, 2, 1);
  EXPECT_EQ(out.at(0, 0).r, 15);
  EXPECT_EQ(out.at(1, 0).r, 36);  // 35.5 rounds up
}

TEST(Resize, RejectsEmptyTargets) {
  EXPECT_VPANEL_ERROR(resize_bilinear(Image(4, 4), 0, 2), ErrorKind::InvalidGeometry);
  EXPECT_VPANEL_ERROR(resize_bilinear(Image(), 2, 2), ErrorKind::InvalidGeometry);
}

TEST(Compose, TwoByTwoBlockOrder) {
  const Frame tiles[] = {solid_frame(0, 8, 6, kRed), solid_frame(1, 8, 6, kGreen),
                         solid_frame(2, 8, 6, kBlue), solid_frame(3, 8, 6, kWhite)};
  const PanelImage p = compose_panel(tiles, 2, 2);
  EXPECT_EQ(p.image.width(), 16);
  EXPECT_EQ(p.image.height(), 12);
  EXPECT_TRUE(p.image.crop(0, 0, 8, 6).is_uniform(kRed));
  EXPECT_TRUE(p.image.crop(8, 0, 8, 6).is_uniform(kGreen));
  EXPECT_TRUE(p.image.crop(0, 6, 8, 6).is_uniform(kBlue));
  EXPECT_TRUE(p.image.crop(8, 6, 8, 6).is_uniform(kWhite));
  EXPECT_EQ(p.source_indices, (std::vector<std::int64_t>{0, 1, 2, 3}));
}

TEST(Compose, SingleTileIdentity) {
  Gen g(304);
  const Frame f{5, 2.5, g.noise(13, 7)};
  const PanelImage p = compose_panel(std::span(&f, 1), 1, 1);
  EXPECT_EQ(p.image, f.image);
}

TEST(Compose, ThreeByThreeReadingOrder) {
  std::vector<Frame> tiles;
  for (int k = 0; k < 9; ++k) tiles.push_back(numbered_tile(k, 5, 4));
  const PanelImage p = compose_panel(tiles, 3, 3);
  const auto parts = slice_panel(p.image, 3, 3);
  ASSERT_EQ(parts.size(), 9u);
  for (int k = 0; k < 9; ++k) EXPECT_EQ(parts[static_cast<std::size_t>(k)].at(2, 2).r, k);
}

TEST(Compose, SliceBackRoundTrip) {
  Gen g(305);
  const std::vector<std::pair<int, int>> grids{{1, 2}, {2, 1}, {2, 2}, {3, 3}, {4, 4}, {2, 3}};
  for (const auto& [rows, cols] : grids) {
    for (int t = 0; t < 10; ++t) {
      const int w = g.irange(1, 20);
      const int h = g.irange(1, 20);
      std::vector<Frame> tiles;
      for (int k = 0; k < rows * cols; ++k) tiles.push_back({k, 0.0, g.noise(w, h)});
      const PanelImage p = compose_panel(tiles, rows, cols);
      const auto back = slice_panel(p.image, rows, cols);
      ASSERT_EQ(back.size(), tiles.size());
      for (std::size_t k = 0; k < back.size(); ++k) ASSERT_EQ(back[k], tiles[k].image);
    }
  }
}

TEST(Compose, GeometryErrors) {
  const Frame a = solid_frame(0, 4, 4, kRed);
  const Frame b = solid_frame(1, 4, 5, kRed);
  const Frame mismatched[] = {a, b};
  EXPECT_VPANEL_ERROR(compose_panel(mismatched, 1, 2), ErrorKind::InvalidGeometry);
  const Frame three[] = {a, a, a};
  EXPECT_VPANEL_ERROR(compose_panel(three, 2, 2), ErrorKind::InvalidGeometry);
  EXPECT_VPANEL_ERROR(slice_panel(Image(5, 4), 2, 2), ErrorKind::InvalidGeometry);
}

TEST(PanelizeSequence, EightFramesTwoPanels) {
  Gen g(306);
  const SamplePlan plan = make_plan(8, 2, 2, 4, 3);
  const auto frames = frames_for(plan, 8, 6, g);
  const PanelizedVideo pv = panelize_sequence(frames, plan);
  ASSERT_EQ(pv.panels.size(), 2u);
  EXPECT_EQ(pv.panels[0].source_indices, (std::vector<std::int64_t>{1, 4, 7, 10}));
  EXPECT_EQ(pv.panels[1].source_indices, (std::vector<std::int64_t>{13, 16, 19, 22}));
  EXPECT_EQ(pv.panels[1].panel_ordinal, 1);
  // Tiles hold the downsampled frames verbatim.
  const auto parts = slice_panel(pv.panels[1].image, 2, 2);
  EXPECT_EQ(parts[2], resize_bilinear(frames[6].image, 4, 3));
}

TEST(PanelizeSequence, PadsLastPanelWithBlack) {
  Gen g(307);
  const SamplePlan plan = make_plan(5, 2, 2, 4, 3);
  const PanelizedVideo pv = panelize_sequence(frames_for(plan, 8, 6, g), plan);
  ASSERT_EQ(pv.panels.size(), 2u);
  EXPECT_EQ(pv.panels[1].source_indices, (std::vector<std::int64_t>{13, -1, -1, -1}));
  EXPECT_EQ(pv.panels[1].source_timestamps[1], -1.0);
  const auto parts = slice_panel(pv.panels[1].image, 2, 2);
  for (int k = 1; k < 4; ++k) EXPECT_TRUE(parts[static_cast<std::size_t>(k)].is_uniform({0, 0, 0}));
  EXPECT_NO_THROW(pv.manifest.validate());
}

TEST(PanelizeSequence, PassthroughWhenInactive) {
  Gen g(308);
  const SamplePlan plan = make_plan(32, 1, 1, 16, 9, false);
  const auto frames = frames_for(plan, 16, 9, g);
  const PanelizedVideo pv = panelize_sequence(frames, plan);
  ASSERT_EQ(pv.panels.size(), 32u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    ASSERT_EQ(pv.panels[i].image, frames[i].image);
    ASSERT_EQ(pv.panels[i].source_indices, (std::vector<std::int64_t>{frames[i].index}));
  }
}

TEST(PanelizeSequence, LowResPassthroughShrinks) {
  Gen g(309);
  SamplePlan plan = make_plan(4, 1, 1, 8, 6, false);
  plan.mode = PlanMode::LowResInput;
  const auto frames = frames_for(plan, 16, 12, g);
  const PanelizedVideo pv = panelize_sequence(frames, plan);
  ASSERT_EQ(pv.panels.size(), 4u);
  EXPECT_EQ(pv.panels[0].image, resize_bilinear(frames[0].image, 8, 6));
}

TEST(PanelizeSequence, PlanMismatch) {
  Gen g(310);
  const SamplePlan plan = make_plan(8, 2, 2, 4, 3);
  auto frames = frames_for(plan, 8, 6, g);
  frames.pop_back();
  EXPECT_VPANEL_ERROR(panelize_sequence(frames, plan), ErrorKind::PlanViolation);
  frames = frames_for(plan, 8, 6, g);
  frames[3].index = 99;
  EXPECT_VPANEL_ERROR(panelize_sequence(frames, plan), ErrorKind::PlanViolation);
}

TEST(PanelizeSequence, ChunkwiseEqualsWhole) {
  Gen g(311);
  for (int t = 0; t < 20; ++t) {
    const int rows = g.irange(1, 3);
    const int cols = g.irange(1, 3);
    const int per = rows * cols;
    const std::int64_t n = g.range(1, 20);
    const SamplePlan plan = make_plan(n, rows, cols, 3, 2);
    const auto frames = frames_for(plan, 7, 5, g);
    const PanelizedVideo whole = panelize_sequence(frames, plan);
    for (std::size_t p = 0; p < whole.panels.size(); ++p) {
      const std::size_t begin = p * static_cast<std::size_t>(per);
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(per), frames.size() - begin);
      SamplePlan sub = make_plan(static_cast<std::int64_t>(len), rows, cols, 3, 2);
      sub.frame_indices.assign(plan.frame_indices.begin() + static_cast<std::ptrdiff_t>(begin),
                               plan.frame_indices.begin() + static_cast<std::ptrdiff_t>(begin + len));
      const PanelizedVideo piece =
          panelize_sequence(std::span(frames).subspan(begin, len), sub);
      ASSERT_EQ(piece.panels.size(), 1u);
      ASSERT_EQ(piece.panels[0].image, whole.panels[p].image);
      ASSERT_EQ(piece.panels[0].source_indices, whole.panels[p].source_indices);
    }
  }
}

TEST(Manifest, ProvenanceProperty) {
  Gen g(312);
  for (int t = 0; t < 100; ++t) {
    SamplingPolicy policy;
    policy.context_window = g.irange(1, 16);
    policy.alpha = g.irange(1, 3);
    policy.beta = g.irange(1, 3);
    policy.gamma = g.coin() ? GammaSpec::fps_multiple(g.uniform(0, 2)) : GammaSpec::frames(g.range(0, 20));
    const VideoMeta meta = VideoMeta::from_count(g.range(1, 400), 2.0, 12, 12);
    const SamplePlan plan = plan_sampling(policy, meta);
    const auto frames = GeneratedSource("gen", meta, [](std::int64_t i) {
                          return Image(12, 12, Rgb{static_cast<std::uint8_t>(i % 256), 0, 0});
                        }).read_frames(plan.frame_indices);
    const PanelizedVideo pv = panelize_sequence(frames, plan);
    std::vector<std::int64_t> flat;
    for (std::size_t p = 0; p < pv.panels.size(); ++p) {
      for (const auto i : pv.panels[p].source_indices) {
        if (i == kPaddingIndex) {
          ASSERT_EQ(p + 1, pv.panels.size()) << "padding outside the final panel";
        } else {
          flat.push_back(i);
        }
      }
    }
    ASSERT_EQ(flat, plan.frame_indices);
    ASSERT_EQ(static_cast<std::int64_t>(pv.panels.size()), plan.panel_count);
    ASSERT_NO_THROW(pv.manifest.validate());
  }
}

TEST(Manifest, ValidateRejectsBrokenProvenance) {
  Gen g(313);
  const SamplePlan plan = make_plan(6, 2, 2, 4, 3);
  Manifest m = panelize_sequence(frames_for(plan, 8, 6, g), plan).manifest;
  EXPECT_NO_THROW(m.validate());
  Manifest dropped = m;
  dropped.panels[0].source_indices[1] = kPaddingIndex;
  EXPECT_VPANEL_ERROR(dropped.validate(), ErrorKind::PlanViolation);
  Manifest swapped = m;
  std::swap(swapped.panels[0].source_indices[0], swapped.panels[0].source_indices[1]);
  EXPECT_VPANEL_ERROR(swapped.validate(), ErrorKind::PlanViolation);
}

TEST(PanelizeVideo, WritesPanelsAndManifest) {
  TempDir out;
  const VideoMeta meta = VideoMeta::from_count(200, 2.0, 16, 12);
  GeneratedSource src("gen://ramp", meta, [](std::int64_t i) {
    return Image(16, 12, Rgb{static_cast<std::uint8_t>(i), 0, 0});
  });
  SamplingPolicy policy;
  policy.context_window = 4;
  const nlohmann::json echo = {{"seed", 3}};
  const Manifest m = panelize_video(src, policy, PlanMode::Auto, out.path(), echo);
  EXPECT_TRUE(m.plan.panel_active);
  ASSERT_EQ(m.panels.size(), 4u);
  EXPECT_EQ(m.toolkit_version, kToolkitVersion);
  EXPECT_EQ(m.config, echo);
  EXPECT_EQ(m.video_uri, "gen://ramp");

  const Manifest back = read_manifest(out / "manifest.json");
  EXPECT_EQ(back, m);
  const Image first = png::read_file(out / m.panels[0].output_path);
  EXPECT_EQ(first.width(), 16);
  EXPECT_EQ(first.height(), 12);
  // Top-left tile is the first sampled frame, shrunk but still uniform.
  EXPECT_TRUE(first.crop(0, 0, 8, 6).is_uniform(Rgb{static_cast<std::uint8_t>(m.plan.frame_indices[0]), 0, 0}));
}

TEST(PanelizeVideo, EmptyVideo) {
  TempDir out;
  GeneratedSource src("empty", VideoMeta::from_count(0, 1.0, 4, 4), [](std::int64_t) { return Image(4, 4); });
  EXPECT_VPANEL_ERROR(panelize_video(src, SamplingPolicy{}, PlanMode::Auto, out.path()), ErrorKind::EmptyVideo);
}

TEST(Manifest, JsonShape) {
  Gen g(314);
  const SamplePlan plan = make_plan(4, 2, 2, 4, 3);
  Manifest m = panelize_sequence(frames_for(plan, 8, 6, g), plan).manifest;
  m.video_uri = "v.mp4";
  m.video = VideoMeta::from_count(20, 2.0, 8, 6);
  const nlohmann::json j = m;
  for (const char* key : {"schema", "toolkit_version", "video_uri", "video", "policy", "plan", "panels", "config"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["panels"][0]["source_indices"], nlohmann::json({1, 4, 7, 10}));
  EXPECT_EQ(j.get<Manifest>(), m);
  nlohmann::json bad = j;
  bad["schema"] = "something/9";
  EXPECT_ANY_THROW(bad.get<Manifest>());
}
