#pragma once

#include <string>
#include <vector>

#include "tpt/config.hpp"
#include "tpt/errors.hpp"
#include "tpt/mma.hpp"
#include "tpt/nn.hpp"
#include "tpt/pyramid.hpp"
#include "tpt/tensor.hpp"
#include "tpt/text_encoder.hpp"

namespace tpt {

// ---- module parameter bundles -------------------------------------------------

// Question-side pyramid: one transformer block per active level, visited
// coarse to fine (level 1 upward).
template <class S>
struct QtParams {
  std::vector<BlockParams<S>> blocks;  // blocks[i] serves active level i
};

// Visual-side pyramid: one block per active level, visited fine to coarse
// (level N downward), plus one fusion layer per level transition.
template <class S>
struct ViParams {
  std::vector<BlockParams<S>> blocks;  // blocks[i] serves active level i
  std::vector<MtlParams<S>> fusion;    // fusion[i] enters active level i from level i+1
};

template <class S>
QtParams<S> make_qt(Rng& rng, const TptConfig& cfg) {
  QtParams<S> p;
  for (int n : cfg.active_levels()) {
    p.blocks.push_back(make_block<S>(rng, "qt.level" + std::to_string(n), cfg.model_dim,
                                     cfg.heads, cfg.ff_dim, cfg.layers_per_block,
                                     cfg.scale_per_head));
  }
  return p;
}

template <class S>
ViParams<S> make_vi(Rng& rng, const TptConfig& cfg) {
  ViParams<S> p;
  std::vector<int> levels = cfg.active_levels();
  for (int n : levels) {
    p.blocks.push_back(make_block<S>(rng, "vi.level" + std::to_string(n), cfg.model_dim,
                                     cfg.heads, cfg.ff_dim, cfg.layers_per_block,
                                     cfg.scale_per_head));
  }
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    p.fusion.push_back(make_mtl<S>(rng, "vi.fuse.level" + std::to_string(levels[i]),
                                   cfg.model_dim, cfg.heads, cfg.ff_dim, cfg.scale_per_head));
  }
  return p;
}

template <class S>
void append_parameters(QtParams<S>& p, std::vector<Parameter<S>*>& out) {
  for (auto& b : p.blocks) append_parameters(b, out);
}

template <class S>
void append_parameters(ViParams<S>& p, std::vector<Parameter<S>*>& out) {
  for (auto& b : p.blocks) append_parameters(b, out);
  for (auto& f : p.fusion) append_parameters(f, out);
}

// ---- forward passes -----------------------------------------------------------

// Question refinement, coarse to fine. Each level runs its block with the
// question as queries and the level's visual tokens as context, then adds the
// block input back through the across-block skip. Returns the refined
// question matrix, always question-length x d.
template <class S>
Var<S> qt_forward(QtParams<S>& p, const TokenSequence<S>& question,
                  std::vector<LevelFeatures<S>>& pyramid, S ln_eps = S(1e-5),
                  AttnTrace<S>* trace = nullptr) {
  require(p.blocks.size() == pyramid.size(), ErrorKind::Config, "qt_forward: ",
          p.blocks.size(), " blocks for ", pyramid.size(), " pyramid levels");
  require(question.length >= 1, ErrorKind::Data, "qt_forward: empty question");
  Var<S> q = question.tokens;
  for (std::size_t i = 0; i < pyramid.size(); ++i) {
    Var<S> refined = mt_block(p.blocks[i], q, pyramid[i].x, pyramid[i].mask,
                              ResidualMode::LnPrimary, ln_eps,
                              static_cast<Var<S>*>(nullptr), trace);
    q = add(refined, q);
  }
  return q;
}

// Per-level intermediate values, captured for inspection (ablation reports,
// collapse checks). Values only; gradients flow through the returned output.
template <class S>
struct ViTrace {
  std::vector<Mat<S>> block_out;  // block output at each visited level, before the skip
  std::vector<Mat<S>> x_hat;      // level output after the across-block skip
  std::vector<Mat<S>> x_tilde;    // fusion output entering each level below the top
};

// Visual refinement, fine to coarse. The top level runs its block directly on
// the level's tokens; every level below first fuses the previous level's
// output into its own tokens through a single cross-attention layer. The
// question matrix (already refined) is the context everywhere.
template <class S>
Var<S> vi_forward(ViParams<S>& p, Var<S> q_hat, const Mask& q_mask,
                  std::vector<LevelFeatures<S>>& pyramid, S ln_eps = S(1e-5),
                  ViTrace<S>* trace = nullptr) {
  const std::size_t levels = pyramid.size();
  require(levels >= 1, ErrorKind::Config, "vi_forward: empty pyramid");
  require(p.blocks.size() == levels, ErrorKind::Config, "vi_forward: ", p.blocks.size(),
          " blocks for ", levels, " pyramid levels");
  require(p.fusion.size() + 1 == levels, ErrorKind::Config, "vi_forward: ", p.fusion.size(),
          " fusion layers for ", levels, " pyramid levels (need one per transition)");
  require(q_mask.size() == q_hat.rows(), ErrorKind::Shape, "vi_forward: question mask length ",
          q_mask.size(), " != question rows ", q_hat.rows());

  auto run_level = [&](std::size_t i, Var<S> x_in) {
    Var<S> out = mt_block(p.blocks[i], x_in, q_hat, q_mask, ResidualMode::PlainPrimary, ln_eps);
    Var<S> x_hat = add(out, x_in);
    if (trace) {
      trace->block_out.push_back(out.value());
      trace->x_hat.push_back(x_hat.value());
    }
    return x_hat;
  };

  Var<S> x_hat = run_level(levels - 1, pyramid[levels - 1].x);
  for (std::size_t i = levels - 1; i-- > 0;) {
    Mask above = Mask::Constant(x_hat.rows(), true);
    Var<S> x_tilde = mt_layer(p.fusion[i], pyramid[i].x, x_hat, above,
                              ResidualMode::PlainPrimary, ln_eps);
    if (trace) trace->x_tilde.push_back(x_tilde.value());
    x_hat = run_level(i, x_tilde);
  }
  return x_hat;
}

// Mean-pooled question and visual outputs, concatenated. Padded question
// positions are excluded from the pool; visual tokens are always real.
template <class S>
struct FusedOutput {
  Var<S> o_bar;     // 1 x 2d
  Var<S> q_pooled;  // 1 x d
  Var<S> x_pooled;  // 1 x d
};

template <class S>
FusedOutput<S> fuse(Var<S> q_hat, const Mask& q_mask, Var<S> x_hat) {
  require(q_hat.cols() == x_hat.cols(), ErrorKind::Shape, "fuse: question width ",
          q_hat.cols(), " != visual width ", x_hat.cols());
  FusedOutput<S> out;
  out.q_pooled = masked_mean_rows(q_hat, q_mask);
  out.x_pooled = mean_rows(x_hat);
  out.o_bar = concat_cols(std::vector<Var<S>>{out.q_pooled, out.x_pooled});
  return out;
}

// ---- the full model -----------------------------------------------------------

template <class S>
struct TptModel {
  TptConfig cfg;

  EmbeddingTable<S> word_embed;            // vocab x text_embed_dim
  LinearLayer<S> text_proj;                // text_embed_dim -> d
  std::vector<MtlParams<S>> text_encoder;  // self-attention layers over tokens
  LinearLayer<S> appearance_proj;          // appearance_dim -> d
  LinearLayer<S> motion_proj;              // motion_dim -> d
  std::vector<Parameter<S>> pos_embeds;    // per level 1..levels, rows = level length
  QtParams<S> qt;
  ViParams<S> vi;

  // Fixed traversal order; optimizer moments and checkpoint tensors follow it.
  std::vector<Parameter<S>*> parameters() {
    std::vector<Parameter<S>*> out;
    append_parameters(word_embed, out);
    append_parameters(text_proj, out);
    for (auto& layer : text_encoder) append_parameters(layer, out);
    append_parameters(appearance_proj, out);
    append_parameters(motion_proj, out);
    for (auto& pos : pos_embeds) out.push_back(&pos);
    append_parameters(qt, out);
    append_parameters(vi, out);
    return out;
  }
};

template <class S>
TptModel<S> make_tpt_model(Rng& rng, const TptConfig& cfg, int vocab_size) {
  validate(cfg);
  require(vocab_size >= 2, ErrorKind::Config, "make_tpt_model: vocabulary size ", vocab_size,
          " < 2 (padding and unknown ids are reserved)");
  TptModel<S> m;
  m.cfg = cfg;
  m.word_embed = make_embedding<S>(rng, "text.embed", vocab_size, cfg.text_embed_dim);
  m.text_proj = make_linear<S>(rng, "text.proj", cfg.text_embed_dim, cfg.model_dim);
  for (int i = 0; i < cfg.text_layers; ++i) {
    m.text_encoder.push_back(make_mtl<S>(rng, "text.layer" + std::to_string(i), cfg.model_dim,
                                         cfg.heads, cfg.ff_dim, cfg.scale_per_head));
  }
  m.appearance_proj = make_linear<S>(rng, "video.appearance", cfg.appearance_dim, cfg.model_dim);
  m.motion_proj = make_linear<S>(rng, "video.motion", cfg.motion_dim, cfg.model_dim);
  for (int n = 1; n <= cfg.levels; ++n) {
    Eigen::Index rows = static_cast<Eigen::Index>(level_token_count(cfg.frames_per_segment, n));
    m.pos_embeds.push_back(Parameter<S>("video.pos.level" + std::to_string(n),
                                        glorot_uniform<S>(rng, rows, cfg.model_dim)));
  }
  m.qt = make_qt<S>(rng, cfg);
  m.vi = make_vi<S>(rng, cfg);
  return m;
}

// Token ids -> contextual token matrix (the model's text front end).
template <class S>
TokenSequence<S> encode_text(TptModel<S>& m, Tape<S>& tape, const std::vector<int>& ids) {
  Var<S> x = embed_tokens(tape, m.word_embed, m.text_proj, ids);
  Mask mask = Mask::Constant(static_cast<Eigen::Index>(ids.size()), true);
  return self_encode(x, mask, m.text_encoder, S(m.cfg.ln_eps));
}

// Full pass: pyramid assembly, question refinement (skipped under drop_qt,
// which feeds the encoded question straight through), visual refinement, and
// pooling. Deterministic for fixed parameters and inputs.
template <class S>
FusedOutput<S> tpt_forward(TptModel<S>& m, Tape<S>& tape, const TokenSequence<S>& text,
                           const RawVideoFeatures& raw) {
  std::vector<LevelFeatures<S>> pyramid =
      build_pyramid(tape, raw, m.cfg, m.appearance_proj, m.motion_proj, m.pos_embeds);
  S eps = S(m.cfg.ln_eps);
  Var<S> q_hat = m.cfg.drop_qt ? text.tokens : qt_forward(m.qt, text, pyramid, eps);
  Var<S> x_hat = vi_forward(m.vi, q_hat, text.mask, pyramid, eps);
  return fuse(q_hat, text.mask, x_hat);
}

}  // namespace tpt
