#pragma once

#include <string>
#include <vector>

#include "tpt/config.hpp"
#include "tpt/errors.hpp"
#include "tpt/nn.hpp"
#include "tpt/tensor.hpp"

namespace tpt {

// First-residual flavor of a multimodal transformer layer. The reference
// formulation differs between modules: the question pyramid normalizes the
// residual term, the level-N visual block adds the raw primary stream, and
// the fusion layer adds a caller-supplied tensor.
enum class ResidualMode { LnPrimary, PlainPrimary, External };

// Multi-head multimodal attention parameters. Projections are stored as
// full d x d matrices and split into H column blocks per head; no biases
// (the attention equations carry none).
template <class S>
struct MmaParams {
  Parameter<S> w_q, w_k, w_v, w_o;  // each d x d
  LayerNormParams<S> ln_q, ln_kv;   // query-side and context-side normalization
  int heads = 1;
  bool scale_per_head = false;  // false: 1/sqrt(d) exactly; true: 1/sqrt(d/H)
};

template <class S>
MmaParams<S> make_mma(Rng& rng, const std::string& name, int d, int heads,
                      bool scale_per_head) {
  require(heads >= 1 && d % heads == 0, ErrorKind::Config, "make_mma '", name, "': width ", d,
          " not divisible by ", heads, " heads");
  MmaParams<S> p;
  p.w_q = Parameter<S>(name + ".w_q", glorot_uniform<S>(rng, d, d));
  p.w_k = Parameter<S>(name + ".w_k", glorot_uniform<S>(rng, d, d));
  p.w_v = Parameter<S>(name + ".w_v", glorot_uniform<S>(rng, d, d));
  p.w_o = Parameter<S>(name + ".w_o", glorot_uniform<S>(rng, d, d));
  p.ln_q = make_layer_norm<S>(name + ".ln_q", d);
  p.ln_kv = make_layer_norm<S>(name + ".ln_kv", d);
  p.heads = heads;
  p.scale_per_head = scale_per_head;
  return p;
}

// Attention probabilities recorded during a forward pass, one Lq x Lk matrix
// per (call, head), in execution order. Purely diagnostic.
template <class S>
using AttnTrace = std::vector<Mat<S>>;

// softmax( LN(query) W_q^h (LN(kv) W_k^h)^T / scale ) LN(kv) W_v^h per head,
// heads concatenated and mixed by W_o. Masked kv positions get -inf logits.
template <class S>
Var<S> mma(MmaParams<S>& p, Var<S> query, Var<S> kv, const Mask& kv_mask,
           S ln_eps = S(1e-5), AttnTrace<S>* trace = nullptr) {
  Tape<S>& t = *query.tape;
  const Eigen::Index d = p.w_q.value.rows();
  require(query.cols() == d, ErrorKind::Shape, "mma: query width ", query.cols(),
          " != model width ", d);
  require(kv.cols() == d, ErrorKind::Shape, "mma: context width ", kv.cols(),
          " != model width ", d);
  require(kv.rows() >= 1, ErrorKind::Mask, "mma: empty context");
  require(kv_mask.size() == kv.rows(), ErrorKind::Shape, "mma: mask length ", kv_mask.size(),
          " != context length ", kv.rows());
  require(kv_mask.any(), ErrorKind::Mask, "mma: context is fully masked");

  Var<S> q_norm = layer_norm(p.ln_q, query, ln_eps);
  Var<S> kv_norm = layer_norm(p.ln_kv, kv, ln_eps);
  std::vector<Var<S>> q_heads = split_cols(matmul(q_norm, t.leaf(p.w_q)), p.heads);
  std::vector<Var<S>> k_heads = split_cols(matmul(kv_norm, t.leaf(p.w_k)), p.heads);
  std::vector<Var<S>> v_heads = split_cols(matmul(kv_norm, t.leaf(p.w_v)), p.heads);

  const double scale_dim =
      p.scale_per_head ? static_cast<double>(d) / p.heads : static_cast<double>(d);
  const S inv_scale = static_cast<S>(1.0 / std::sqrt(scale_dim));

  std::vector<Var<S>> outputs;
  outputs.reserve(q_heads.size());
  for (std::size_t h = 0; h < q_heads.size(); ++h) {
    Var<S> logits = scale(matmul(q_heads[h], transpose(k_heads[h])), inv_scale);
    Var<S> attn = softmax_rows(mask_cols(logits, kv_mask));
    if (trace != nullptr) trace->push_back(attn.value());
    outputs.push_back(matmul(attn, v_heads[h]));
  }
  return matmul(concat_cols(outputs), t.leaf(p.w_o));
}

// One multimodal transformer layer (attention sublayer + feed-forward
// sublayer). MmaParams' query-side LN doubles as the residual normalization
// in LnPrimary mode — the formulation writes the same normalized tensor in
// both places.
template <class S>
struct MtlParams {
  MmaParams<S> mma;
  FeedForward<S> ff;
  LayerNormParams<S> ln_ff;
};

template <class S>
MtlParams<S> make_mtl(Rng& rng, const std::string& name, int d, int heads, int d_ff,
                      bool scale_per_head) {
  MtlParams<S> p;
  p.mma = make_mma<S>(rng, name + ".mma", d, heads, scale_per_head);
  p.ff = make_feed_forward<S>(rng, name + ".ff", d, d_ff);
  p.ln_ff = make_layer_norm<S>(name + ".ln_ff", d);
  return p;
}

template <class S>
void append_parameters(MmaParams<S>& p, std::vector<Parameter<S>*>& out) {
  out.push_back(&p.w_q);
  out.push_back(&p.w_k);
  out.push_back(&p.w_v);
  out.push_back(&p.w_o);
  append_parameters(p.ln_q, out);
  append_parameters(p.ln_kv, out);
}

template <class S>
void append_parameters(MtlParams<S>& p, std::vector<Parameter<S>*>& out) {
  append_parameters(p.mma, out);
  append_parameters(p.ff, out);
  append_parameters(p.ln_ff, out);
}

// first-residual + attention, then out = Z + FF(LN(Z)).
template <class S>
Var<S> mt_layer(MtlParams<S>& p, Var<S> primary, Var<S> context, const Mask& ctx_mask,
                ResidualMode mode, S ln_eps = S(1e-5), Var<S>* external = nullptr,
                AttnTrace<S>* trace = nullptr) {
  Var<S> attended = mma(p.mma, primary, context, ctx_mask, ln_eps, trace);
  Var<S> first;
  switch (mode) {
    case ResidualMode::LnPrimary:
      first = layer_norm(p.mma.ln_q, primary, ln_eps);
      break;
    case ResidualMode::PlainPrimary:
      first = primary;
      break;
    case ResidualMode::External:
      require(external != nullptr, ErrorKind::Usage,
              "mt_layer: external residual mode without an external tensor");
      require(external->rows() == primary.rows() && external->cols() == primary.cols(),
              ErrorKind::Shape, "mt_layer: external residual is ", external->rows(), "x",
              external->cols(), ", expected ", primary.rows(), "x", primary.cols());
      first = *external;
      break;
  }
  Var<S> z = add(first, attended);
  return add(z, feed_forward(p.ff, layer_norm(p.ln_ff, z, ln_eps)));
}

// R stacked layers threading the primary stream over a fixed context.
template <class S>
struct BlockParams {
  std::vector<MtlParams<S>> layers;
};

template <class S>
BlockParams<S> make_block(Rng& rng, const std::string& name, int d, int heads, int d_ff,
                          int layers, bool scale_per_head) {
  BlockParams<S> b;
  for (int r = 0; r < layers; ++r) {
    b.layers.push_back(
        make_mtl<S>(rng, name + ".layer" + std::to_string(r), d, heads, d_ff, scale_per_head));
  }
  return b;
}

template <class S>
void append_parameters(BlockParams<S>& b, std::vector<Parameter<S>*>& out) {
  for (auto& layer : b.layers) append_parameters(layer, out);
}

template <class S>
Var<S> mt_block(BlockParams<S>& b, Var<S> primary, Var<S> context, const Mask& ctx_mask,
                ResidualMode mode, S ln_eps = S(1e-5), Var<S>* external = nullptr,
                AttnTrace<S>* trace = nullptr) {
  require(!b.layers.empty(), ErrorKind::Config, "mt_block: block has no layers");
  require(mode != ResidualMode::External || b.layers.size() == 1, ErrorKind::Usage,
          "mt_block: external residual is defined for single-layer blocks only");
  Var<S> x = primary;
  for (MtlParams<S>& layer : b.layers) {
    x = mt_layer(layer, x, context, ctx_mask, mode, ln_eps, external, trace);
  }
  return x;
}

}  // namespace tpt
