#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "tpt/config.hpp"
#include "tpt/errors.hpp"
#include "tpt/nn.hpp"
#include "tpt/tensor.hpp"

namespace tpt {

// ---- answer heads ---------------------------------------------------------
// Each regime reads the fused model output (one 2d row) through a two-layer
// projection. The hidden width is the model width d.

// Classification over a fixed answer vocabulary.
template <class S>
struct OpenEndedHead {
  LinearLayer<S> hidden;  // 2d -> d
  LinearLayer<S> out;     // d -> |A|
  Activation activation = Activation::Gelu;
};

// Integer regression with rounding and clamping at prediction time.
template <class S>
struct CountHead {
  LinearLayer<S> hidden;  // 2d -> d
  LinearLayer<S> out;     // d -> 1
  Activation activation = Activation::Gelu;
  int count_min = 0;
  int count_max = 10;
};

// Candidate ranking: scores one (question, candidate) pair of fused outputs.
template <class S>
struct MultiChoiceHead {
  LinearLayer<S> hidden;  // 4d -> d
  LinearLayer<S> out;     // d -> 1
  Activation activation = Activation::Gelu;
};

template <class S>
OpenEndedHead<S> make_open_ended_head(Rng& rng, const TptConfig& cfg) {
  require(cfg.answer_count >= 2, ErrorKind::Config,
          "make_open_ended_head: answer_count ", cfg.answer_count, " < 2");
  return OpenEndedHead<S>{make_linear<S>(rng, "head.hidden", 2 * cfg.model_dim, cfg.model_dim),
                          make_linear<S>(rng, "head.out", cfg.model_dim, cfg.answer_count),
                          cfg.decoder_activation};
}

template <class S>
CountHead<S> make_count_head(Rng& rng, const TptConfig& cfg) {
  require(cfg.count_min <= cfg.count_max, ErrorKind::Config, "make_count_head: count range [",
          cfg.count_min, ", ", cfg.count_max, "] is empty");
  return CountHead<S>{make_linear<S>(rng, "head.hidden", 2 * cfg.model_dim, cfg.model_dim),
                      make_linear<S>(rng, "head.out", cfg.model_dim, 1), cfg.decoder_activation,
                      cfg.count_min, cfg.count_max};
}

template <class S>
MultiChoiceHead<S> make_multi_choice_head(Rng& rng, const TptConfig& cfg) {
  return MultiChoiceHead<S>{make_linear<S>(rng, "head.hidden", 4 * cfg.model_dim, cfg.model_dim),
                            make_linear<S>(rng, "head.out", cfg.model_dim, 1),
                            cfg.decoder_activation};
}

template <class S>
void append_parameters(OpenEndedHead<S>& h, std::vector<Parameter<S>*>& out) {
  append_parameters(h.hidden, out);
  append_parameters(h.out, out);
}

template <class S>
void append_parameters(CountHead<S>& h, std::vector<Parameter<S>*>& out) {
  append_parameters(h.hidden, out);
  append_parameters(h.out, out);
}

template <class S>
void append_parameters(MultiChoiceHead<S>& h, std::vector<Parameter<S>*>& out) {
  append_parameters(h.hidden, out);
  append_parameters(h.out, out);
}

// One-of-three head storage for regime-generic plumbing.
template <class S>
using AnswerHead = std::variant<OpenEndedHead<S>, CountHead<S>, MultiChoiceHead<S>>;

template <class S>
AnswerHead<S> make_answer_head(Rng& rng, const TptConfig& cfg) {
  switch (cfg.regime) {
    case Regime::OpenEnded: return make_open_ended_head<S>(rng, cfg);
    case Regime::Count: return make_count_head<S>(rng, cfg);
    case Regime::MultiChoice: return make_multi_choice_head<S>(rng, cfg);
  }
  fail(ErrorKind::Config, "make_answer_head: unreachable regime");
}

template <class S>
void append_parameters(AnswerHead<S>& h, std::vector<Parameter<S>*>& out) {
  std::visit([&](auto& head) { append_parameters(head, out); }, h);
}

// ---- forward passes -------------------------------------------------------

// Probability row over the answer classes; rows sum to 1.
template <class S>
Var<S> open_ended_forward(OpenEndedHead<S>& head, Var<S> o_bar) {
  return softmax_rows(linear(head.out, activate(head.activation, linear(head.hidden, o_bar))));
}

// Raw (unrounded) count estimate as a 1x1 tensor; the loss consumes this
// value directly, rounding happens only at prediction time.
template <class S>
Var<S> count_forward(CountHead<S>& head, Var<S> o_bar) {
  return linear(head.out, activate(head.activation, linear(head.hidden, o_bar)));
}

// One score per candidate (K x 1): each candidate's fused output is paired
// with the question's fused output and scored independently.
template <class S>
Var<S> multi_choice_scores(MultiChoiceHead<S>& head, Var<S> o_bar_q,
                           const std::vector<Var<S>>& o_bar_candidates) {
  require(o_bar_candidates.size() >= 2, ErrorKind::Usage, "multi_choice_scores: ",
          o_bar_candidates.size(), " candidates (need at least 2)");
  std::vector<Var<S>> scores;
  scores.reserve(o_bar_candidates.size());
  for (Var<S> cand : o_bar_candidates) {
    Var<S> pair = concat_cols(std::vector<Var<S>>{o_bar_q, cand});
    scores.push_back(linear(head.out, activate(head.activation, linear(head.hidden, pair))));
  }
  return concat_rows(scores);
}

// ---- losses ---------------------------------------------------------------

// Negative log-likelihood of the target class. A zero probability is floored
// at 1e-12 (the clamp is counted on the tape for diagnostics).
template <class S>
Var<S> cross_entropy(Var<S> probs, int target) {
  require(probs.rows() == 1, ErrorKind::Shape, "cross_entropy: expected one probability row, got ",
          probs.rows());
  require(target >= 0 && target < probs.cols(), ErrorKind::Data, "cross_entropy: target ", target,
          " outside [0, ", probs.cols(), ")");
  return scale(log_clamped(pick(probs, 0, target)), S(-1));
}

// Squared error of the raw count estimate against the integer target.
template <class S>
Var<S> mse_loss(Var<S> raw, double target) {
  require(raw.rows() == 1 && raw.cols() == 1, ErrorKind::Shape,
          "mse_loss: raw estimate must be 1x1, got ", raw.rows(), "x", raw.cols());
  return square(add_const(raw, S(-target)));
}

// Margin ranking loss: mean over wrong candidates of max(0, 1 + p_k - p_gt).
template <class S>
Var<S> hinge_loss(Var<S> scores, int gt_index) {
  require(scores.cols() == 1 && scores.rows() >= 2, ErrorKind::Shape,
          "hinge_loss: expected a K x 1 score column with K >= 2, got ", scores.rows(), "x",
          scores.cols());
  require(gt_index >= 0 && gt_index < scores.rows(), ErrorKind::Data, "hinge_loss: answer index ",
          gt_index, " outside [0, ", scores.rows(), ")");
  Var<S> p_gt = pick(scores, gt_index, 0);
  std::vector<Var<S>> margins;
  for (Eigen::Index k = 0; k < scores.rows(); ++k) {
    if (k == gt_index) continue;
    margins.push_back(relu(add_const(sub(pick(scores, k, 0), p_gt), S(1))));
  }
  return mean_all(concat_rows(margins));
}

// Mean of per-example scalar losses — the batch objective.
template <class S>
Var<S> batch_mean(const std::vector<Var<S>>& losses) {
  require(!losses.empty(), ErrorKind::Usage, "batch_mean: no losses");
  return mean_all(concat_rows(losses));
}

// ---- prediction -----------------------------------------------------------

// Lowest index among the maxima of a single row or column.
template <class S>
int argmax_index(const Mat<S>& v) {
  require(v.rows() == 1 || v.cols() == 1, ErrorKind::Shape, "argmax_index: expected a vector, got ",
          v.rows(), "x", v.cols());
  require(v.size() >= 1, ErrorKind::Shape, "argmax_index: empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

// Round half away from zero, then clamp into the configured count range.
inline int round_count(double raw, int count_min, int count_max) {
  require(count_min <= count_max, ErrorKind::Config, "round_count: count range [", count_min, ", ",
          count_max, "] is empty");
  require(std::isfinite(raw), ErrorKind::Numeric, "round_count: non-finite estimate");
  long long r = std::llround(raw);
  if (r < count_min) return count_min;
  if (r > count_max) return count_max;
  return static_cast<int>(r);
}

}  // namespace tpt
