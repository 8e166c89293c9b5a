#include <doctest.h>

#include <fstream>

#include "testutil.hpp"
#include "tpt/pyramid.hpp"

using tpt::Mask;
using tpt::Mat;
using tpt::RawVideoFeatures;
using tpt::Span;
using tpt::Tape;
using tpt::TptError;

namespace {

// Simple in-memory provider: motion vector = mean of the window's frames,
// truncated/padded to motion_dim.
RawVideoFeatures mean_motion_video(const Mat<float>& frames, int motion_dim) {
  RawVideoFeatures raw;
  raw.frame_features = frames;
  raw.motion_dim = motion_dim;
  Mat<float> copy = frames;
  raw.motion_fn = [copy, motion_dim](const Span& s) {
    std::vector<float> v(static_cast<std::size_t>(motion_dim), 0.0f);
    for (int f = s.begin; f < s.end; ++f) {
      for (int j = 0; j < motion_dim && j < copy.cols(); ++j) {
        v[static_cast<std::size_t>(j)] += copy(f, j);
      }
    }
    for (float& x : v) x /= static_cast<float>(s.length());
    return v;
  };
  return raw;
}

}  // namespace

TEST_CASE("segment sampling: stride, exact split, duplication") {
  // Hand oracle: one 32-frame span sampled 16 times has stride exactly 2.
  auto one = tpt::segment_video(32, 1, 16);
  REQUIRE(one.size() == 1);
  for (int j = 0; j < 16; ++j) CHECK(one[0][static_cast<std::size_t>(j)] == 2 * j);

  auto two = tpt::segment_video(4, 2, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == std::vector<int>{0, 1});
  CHECK(two[1] == std::vector<int>{2, 3});

  auto dup = tpt::segment_video(1, 1, 4);
  REQUIRE(dup.size() == 1);
  CHECK(dup[0] == std::vector<int>{0, 0, 0, 0});

  CHECK_THROWS_AS((void)tpt::segment_video(4, 0, 2), TptError);
  CHECK_THROWS_AS((void)tpt::segment_video(4, 1, 0), TptError);
  CHECK_THROWS_AS((void)tpt::segment_video(0, 1, 2), TptError);
}

TEST_CASE("segment spans: counts, coverage, refinement") {
  for (int frames : {1, 2, 3, 5, 7, 16, 31, 37}) {
    for (int level = 1; level <= 4; ++level) {
      auto spans = tpt::segment_spans(frames, level);
      CHECK(spans.size() == static_cast<std::size_t>(1 << (level - 1)));
      CHECK(spans.front().begin == 0);
      CHECK(spans.back().end == frames);
      // Temporal order and contiguity of non-duplicated neighbors.
      for (std::size_t i = 0; i + 1 < spans.size(); ++i) {
        CHECK(spans[i].begin <= spans[i + 1].begin);
        CHECK(spans[i].end <= spans[i + 1].end);
      }
      // Refinement: each span is the union of its two children.
      if (level < 4) {
        auto children = tpt::segment_spans(frames, level + 1);
        REQUIRE(children.size() == spans.size() * 2);
        for (std::size_t i = 0; i < spans.size(); ++i) {
          const Span& a = children[2 * i];
          const Span& b = children[2 * i + 1];
          CHECK(a.begin == spans[i].begin);
          CHECK(b.end == spans[i].end);
          const bool contiguous = a.end == b.begin;
          const bool duplicated = a == b && a == spans[i];
          CHECK((contiguous || duplicated));
        }
      }
    }
  }
}

TEST_CASE("sampled indices stay inside their span and are non-decreasing") {
  for (int frames : {1, 3, 9, 17}) {
    for (int level = 1; level <= 3; ++level) {
      for (int per : {1, 2, 4, 16}) {
        auto spans = tpt::segment_spans(frames, level);
        for (const Span& s : spans) {
          auto idx = tpt::sample_indices(s, per);
          CHECK(static_cast<int>(idx.size()) == per);
          for (std::size_t j = 0; j < idx.size(); ++j) {
            CHECK(idx[j] >= s.begin);
            CHECK(idx[j] < s.end);
            if (j > 0) CHECK(idx[j] >= idx[j - 1]);
          }
        }
      }
    }
  }
}

TEST_CASE("feature file round trip preserves bytes and windows") {
  tptt::TempDir dir("feat");
  tpt::Rng rng(21);
  Mat<float> frames = tptt::random_mat(rng, 6, 5).cast<float>();
  std::vector<tpt::MotionWindow> windows;
  windows.push_back({Span{0, 6}, {1.f, 2.f, 3.f}});
  windows.push_back({Span{0, 3}, {4.f, 5.f, 6.f}});
  windows.push_back({Span{3, 6}, {7.f, 8.f, 9.f}});
  const std::string path = dir.file("v.tptf");
  tpt::write_feature_file(path, frames, 3, windows);

  RawVideoFeatures raw = tpt::read_feature_file(path);
  CHECK(raw.frame_count() == 6);
  CHECK(raw.appearance_dim() == 5);
  CHECK(raw.motion_dim == 3);
  CHECK((raw.frame_features.array() == frames.array()).all());
  CHECK(raw.motion_fn(Span{0, 3}) == std::vector<float>{4.f, 5.f, 6.f});
  CHECK_THROWS_AS((void)raw.motion_fn(Span{1, 4}), TptError);  // unlisted window
}

TEST_CASE("feature file reader rejects bad magic and truncation") {
  tptt::TempDir dir("featbad");
  const std::string bad = dir.file("bad.tptf");
  std::ofstream(bad, std::ios::binary) << "NOPE";
  CHECK_THROWS_AS((void)tpt::read_feature_file(bad), TptError);

  tpt::Rng rng(22);
  Mat<float> frames = tptt::random_mat(rng, 4, 3).cast<float>();
  const std::string good = dir.file("good.tptf");
  tpt::write_feature_file(good, frames, 2, {{Span{0, 4}, {1.f, 2.f}}});
  // Truncate the tail.
  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream(dir.file("trunc.tptf"), std::ios::binary)
      << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS((void)tpt::read_feature_file(dir.file("trunc.tptf")), TptError);

  CHECK_THROWS_AS((void)tpt::read_feature_file(dir.file("missing.tptf")), TptError);
}

TEST_CASE("extract_level gathers constant features and per-segment motion") {
  Mat<float> frames = Mat<float>::Constant(8, 4, 2.5f);
  RawVideoFeatures raw = mean_motion_video(frames, 4);
  auto lvl = tpt::extract_level(raw, 2, 3);
  CHECK(lvl.appearance.size() == 2);
  CHECK(lvl.motion.rows() == 2);  // 2^(n-1) motion vectors at n=2
  for (const auto& seg : lvl.appearance) {
    CHECK((seg.array() == 2.5f).all());
  }
}

TEST_CASE("extract_level motion matches an independently computed window mean") {
  tpt::Rng rng(23);
  Mat<float> frames = tptt::random_mat(rng, 10, 3).cast<float>();
  RawVideoFeatures raw = mean_motion_video(frames, 3);
  auto lvl = tpt::extract_level(raw, 2, 2);
  auto spans = tpt::segment_spans(10, 2);
  for (std::size_t s = 0; s < spans.size(); ++s) {
    for (int j = 0; j < 3; ++j) {
      double mean = 0.0;  // oracle: plain loop over the raw window
      for (int f = spans[s].begin; f < spans[s].end; ++f) mean += frames(f, j);
      mean /= spans[s].length();
      CHECK(lvl.motion(static_cast<Eigen::Index>(s), j) ==
            doctest::Approx(mean).epsilon(1e-6));
    }
  }
}

TEST_CASE("extract_level rejects a provider with the wrong dimension") {
  Mat<float> frames = Mat<float>::Ones(4, 2);
  RawVideoFeatures raw;
  raw.frame_features = frames;
  raw.motion_dim = 3;
  raw.motion_fn = [](const Span&) { return std::vector<float>{1.f}; };
  CHECK_THROWS_AS((void)tpt::extract_level(raw, 1, 2), TptError);
}

TEST_CASE("assemble_level obeys the row-count law across (N, T)") {
  tpt::Rng rng(24);
  const int d = 6;
  for (int level : {1, 2, 3}) {
    for (int per : {2, 4, 16}) {
      Mat<float> frames = tptt::random_mat(rng, 19, 3).cast<float>();
      RawVideoFeatures raw = mean_motion_video(frames, 3);
      auto app = tpt::make_linear<double>(rng, "app", 3, d);
      auto mot = tpt::make_linear<double>(rng, "mot", 3, d);
      const int rows = (1 << (level - 1)) * (per + 1);
      tpt::Parameter<double> pos("pos", tptt::random_mat(rng, rows, d));
      Tape<double> t;
      auto ex = tpt::extract_level(raw, level, per);
      auto lf = tpt::assemble_level(t, ex, level, app, mot, pos);
      CHECK(lf.x.rows() == rows);
      CHECK(lf.x.cols() == d);
      CHECK(lf.mask.size() == rows);
      CHECK(lf.mask.all());
    }
  }
}

TEST_CASE("assemble_level zero projections and zero positions give zero tokens") {
  tpt::Rng rng(25);
  Mat<float> frames = tptt::random_mat(rng, 8, 3).cast<float>();
  RawVideoFeatures raw = mean_motion_video(frames, 3);
  auto app = tpt::make_linear<double>(rng, "app", 3, 4);
  auto mot = tpt::make_linear<double>(rng, "mot", 3, 4);
  app.weight.value.setZero();
  app.bias.value.setZero();
  mot.weight.value.setZero();
  mot.bias.value.setZero();
  tpt::Parameter<double> pos("pos", Mat<double>::Zero(2 * (2 + 1), 4));
  Tape<double> t;
  auto lf = tpt::assemble_level(t, tpt::extract_level(raw, 2, 2), 2, app, mot, pos);
  CHECK(lf.x.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("token order: positions T mod (T+1) hold motion tokens") {
  // Identity projections with distinct constants make the streams traceable.
  const int d = 3, per = 2;
  Mat<float> frames = Mat<float>::Constant(8, d, 1.0f);
  RawVideoFeatures raw;
  raw.frame_features = frames;
  raw.motion_dim = d;
  raw.motion_fn = [](const Span&) { return std::vector<float>{2.f, 2.f, 2.f}; };
  tpt::Rng rng(26);
  auto app = tpt::make_linear<double>(rng, "app", d, d);
  auto mot = tpt::make_linear<double>(rng, "mot", d, d);
  app.weight.value = Mat<double>::Identity(d, d);
  app.bias.value.setZero();
  mot.weight.value = Mat<double>::Identity(d, d);
  mot.bias.value.setZero();
  const int rows = 4 * (per + 1);  // level 3 of 8 frames
  tpt::Parameter<double> pos("pos", Mat<double>::Zero(rows, d));
  Tape<double> t;
  auto lf = tpt::assemble_level(t, tpt::extract_level(raw, 3, per), 3, app, mot, pos);
  for (int r = 0; r < rows; ++r) {
    const double expected = (r % (per + 1) == per) ? 2.0 : 1.0;
    CHECK(lf.x.value()(r, 0) == expected);
  }
}

TEST_CASE("positional embedding is added exactly once") {
  tpt::Rng rng(27);
  Mat<float> frames = tptt::random_mat(rng, 6, 3).cast<float>();
  RawVideoFeatures raw = mean_motion_video(frames, 3);
  auto app = tpt::make_linear<double>(rng, "app", 3, 4);
  auto mot = tpt::make_linear<double>(rng, "mot", 3, 4);
  tpt::Parameter<double> zero_pos("pos0", Mat<double>::Zero(3, 4));
  tpt::Parameter<double> pos("pos", tptt::random_mat(rng, 3, 4));
  Tape<double> t;
  auto base = tpt::assemble_level(t, tpt::extract_level(raw, 1, 2), 1, app, mot, zero_pos);
  Tape<double> t2;
  auto with_pos = tpt::assemble_level(t2, tpt::extract_level(raw, 1, 2), 1, app, mot, pos);
  CHECK(tptt::max_abs_diff(Mat<double>(with_pos.x.value() - base.x.value()), pos.value) < 1e-12);
}

TEST_CASE("build_pyramid level lengths and determinism") {
  tpt::Rng rng(28);
  Mat<float> frames = tptt::random_mat(rng, 16, 3).cast<float>();
  RawVideoFeatures raw = mean_motion_video(frames, 3);
  tpt::TptConfig cfg;
  cfg.levels = 3;
  cfg.frames_per_segment = 4;
  cfg.model_dim = 4;
  auto app = tpt::make_linear<double>(rng, "app", 3, 4);
  auto mot = tpt::make_linear<double>(rng, "mot", 3, 4);
  std::vector<tpt::Parameter<double>> pos;
  for (int n = 1; n <= 3; ++n) {
    pos.emplace_back("pos" + std::to_string(n),
                     tptt::random_mat(rng, (1 << (n - 1)) * 5, 4));
  }
  Tape<double> t;
  auto pyr = tpt::build_pyramid(t, raw, cfg, app, mot, pos);
  REQUIRE(pyr.size() == 3);
  CHECK(pyr[0].x.rows() == 5);
  CHECK(pyr[1].x.rows() == 10);
  CHECK(pyr[2].x.rows() == 20);
  // Level-1 spans cover the whole video.
  CHECK(pyr[0].spans.size() == 1);
  CHECK(pyr[0].spans[0] == Span{0, 16});

  Tape<double> t2;
  auto pyr2 = tpt::build_pyramid(t2, raw, cfg, app, mot, pos);
  for (int n = 0; n < 3; ++n) {
    CHECK((pyr[static_cast<std::size_t>(n)].x.value().array() ==
           pyr2[static_cast<std::size_t>(n)].x.value().array())
              .all());
  }

  cfg.fixed_level = 2;
  Tape<double> t3;
  auto fixed = tpt::build_pyramid(t3, raw, cfg, app, mot, pos);
  REQUIRE(fixed.size() == 1);
  CHECK(fixed[0].level == 2);
  CHECK(fixed[0].x.rows() == 10);

  tpt::TptConfig one;
  one.levels = 1;
  one.frames_per_segment = 4;
  Tape<double> t4;
  auto single = tpt::build_pyramid(t4, raw, one, app, mot, pos);
  REQUIRE(single.size() == 1);
  CHECK(single[0].x.rows() == 5);
}
