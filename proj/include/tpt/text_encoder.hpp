#pragma once

#include <vector>

#include "tpt/errors.hpp"
#include "tpt/mma.hpp"
#include "tpt/nn.hpp"
#include "tpt/tensor.hpp"
#include "tpt/vocab.hpp"

namespace tpt {

// Contextually encoded text: one d-wide row per token plus a validity mask.
template <class S>
struct TokenSequence {
  Var<S> tokens;  // L x d
  Mask mask;      // true = real token
  int length = 0;
};

// Row-gather from the embedding table followed by the width projection.
// The vocabulary is closed: ids outside the table are a hard error (unknown
// words map to the UNK id upstream, never to an out-of-range id).
template <class S>
Var<S> embed_tokens(Tape<S>& tape, EmbeddingTable<S>& table, LinearLayer<S>& proj,
                    const std::vector<int>& ids) {
  require(!ids.empty(), ErrorKind::Data, "embed_tokens: empty token sequence");
  for (int id : ids) {
    require(id >= 0 && id < table.table.value.rows(), ErrorKind::Data,
            "embed_tokens: token id ", id, " outside the vocabulary of ",
            table.table.value.rows(), " (closed vocabulary; UNK id is ", Vocab::kUnkId, ")");
  }
  return linear(proj, row_gather(tape.leaf(table.table), ids));
}

// Self-attention encoding: each layer is a multimodal transformer layer with
// query = key = value = x and the padding mask applied on the context side.
template <class S>
TokenSequence<S> self_encode(Var<S> x, const Mask& mask, std::vector<MtlParams<S>>& layers,
                             S ln_eps = S(1e-5), AttnTrace<S>* trace = nullptr) {
  require(mask.size() == x.rows(), ErrorKind::Shape, "self_encode: mask length ", mask.size(),
          " != sequence length ", x.rows());
  require(mask.any(), ErrorKind::Mask, "self_encode: input is fully masked");
  Var<S> h = x;
  for (MtlParams<S>& layer : layers) {
    h = mt_layer(layer, h, h, mask, ResidualMode::LnPrimary, ln_eps, static_cast<Var<S>*>(nullptr),
                 trace);
  }
  TokenSequence<S> out;
  out.tokens = h;
  out.mask = mask;
  out.length = static_cast<int>(x.rows());
  return out;
}

}  // namespace tpt
