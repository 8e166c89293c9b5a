#pragma once

#include <vector>

#include "tpt/config.hpp"
#include "tpt/errors.hpp"
#include "tpt/features.hpp"
#include "tpt/nn.hpp"
#include "tpt/spans.hpp"
#include "tpt/tensor.hpp"

namespace tpt {

// Raw (pre-projection) per-level gather: appearance matrices per segment and
// one motion vector per segment, still in provider precision.
struct ExtractedLevel {
  std::vector<Mat<float>> appearance;  // 2^(n-1) matrices, each T x D_a
  Mat<float> motion;                   // 2^(n-1) x D_m
  std::vector<Span> spans;
};

// Gathers the frame/motion features for one pyramid level.
ExtractedLevel extract_level(const RawVideoFeatures& raw, int level, int per_segment);

// One level's model input: projected, interleaved, position-augmented tokens.
template <class S>
struct LevelFeatures {
  int level = 1;
  Var<S> x;   // rows = 2^(n-1) * (T+1), cols = d
  Mask mask;  // all-true for full videos
  std::vector<Span> spans;
};

// Projects appearance (D_a -> d) and motion (D_m -> d), interleaves tokens as
// [T appearance, 1 motion] per segment in temporal order, and adds the
// level's learned positional embedding.
template <class S>
LevelFeatures<S> assemble_level(Tape<S>& tape, const ExtractedLevel& ex, int level,
                                LinearLayer<S>& appearance_proj, LinearLayer<S>& motion_proj,
                                Parameter<S>& pos_embed) {
  const int segments = static_cast<int>(ex.appearance.size());
  require(segments >= 1, ErrorKind::Shape, "assemble_level: no segments");
  const Eigen::Index per_segment = ex.appearance[0].rows();
  const Eigen::Index rows_total = segments * (per_segment + 1);
  require(ex.motion.rows() == segments, ErrorKind::Shape, "assemble_level: ", segments,
          " segments but ", ex.motion.rows(), " motion vectors");

  // Stack all appearance tokens, then all motion tokens, project each stream
  // once, and reorder into the interleaved layout with a single gather.
  Mat<float> app_stack(segments * per_segment, ex.appearance[0].cols());
  for (int s = 0; s < segments; ++s) {
    require(ex.appearance[static_cast<std::size_t>(s)].rows() == per_segment, ErrorKind::Shape,
            "assemble_level: ragged appearance segments");
    app_stack.middleRows(s * per_segment, per_segment) = ex.appearance[static_cast<std::size_t>(s)];
  }
  Var<S> app = linear(appearance_proj, tape.constant(app_stack.template cast<S>()));
  Var<S> mot = linear(motion_proj, tape.constant(ex.motion.template cast<S>()));
  Var<S> stacked = concat_rows<S>({app, mot});

  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(rows_total));
  for (int s = 0; s < segments; ++s) {
    for (Eigen::Index j = 0; j < per_segment; ++j) {
      order.push_back(s * static_cast<int>(per_segment) + static_cast<int>(j));
    }
    order.push_back(segments * static_cast<int>(per_segment) + s);
  }
  Var<S> tokens = row_gather(stacked, order);

  require(pos_embed.value.rows() == rows_total && pos_embed.value.cols() == tokens.cols(),
          ErrorKind::Shape, "assemble_level: positional embedding '", pos_embed.name, "' is ",
          pos_embed.value.rows(), "x", pos_embed.value.cols(), ", expected ", rows_total, "x",
          tokens.cols());
  Var<S> x = add(tokens, tape.leaf(pos_embed));

  LevelFeatures<S> out;
  out.level = level;
  out.x = x;
  out.mask = Mask::Constant(rows_total, true);
  out.spans = ex.spans;
  return out;
}

// Builds the LevelFeatures for every active level (1..N, or just the fixed
// level under ablation). `pos_embeds` is indexed by level-1 and must cover
// level N. Projections are shared across levels; only P^n differs.
template <class S>
std::vector<LevelFeatures<S>> build_pyramid(Tape<S>& tape, const RawVideoFeatures& raw,
                                            const TptConfig& cfg,
                                            LinearLayer<S>& appearance_proj,
                                            LinearLayer<S>& motion_proj,
                                            std::vector<Parameter<S>>& pos_embeds) {
  require(raw.frame_count() >= 1, ErrorKind::Data, "build_pyramid: video has no frames");
  require(static_cast<int>(pos_embeds.size()) >= cfg.levels, ErrorKind::Config,
          "build_pyramid: ", pos_embeds.size(), " positional tables for ", cfg.levels,
          " levels");
  std::vector<LevelFeatures<S>> out;
  for (int n : cfg.active_levels()) {
    ExtractedLevel ex = extract_level(raw, n, cfg.frames_per_segment);
    out.push_back(assemble_level(tape, ex, n, appearance_proj, motion_proj,
                                 pos_embeds[static_cast<std::size_t>(n - 1)]));
  }
  return out;
}

}  // namespace tpt
