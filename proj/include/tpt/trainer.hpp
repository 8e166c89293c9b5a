#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "tpt/checkpoint.hpp"
#include "tpt/config.hpp"
#include "tpt/data.hpp"
#include "tpt/decoders.hpp"
#include "tpt/errors.hpp"
#include "tpt/features.hpp"
#include "tpt/model.hpp"
#include "tpt/synthetic.hpp"
#include "tpt/vocab.hpp"

namespace tpt {

// ---- dataset in memory --------------------------------------------------

struct Dataset {
  Manifest manifest;
  std::vector<RawVideoFeatures> videos;  // parallel to manifest.records
  Vocab vocab;
  std::vector<std::string> answers;  // open-ended answer space; empty otherwise
};

// Loads manifest + features + vocabulary (+ answers for open-ended runs),
// resolving empty vocab/answer paths to files beside the manifest, and
// cross-checks every record against the run's regime, id ranges, feature
// dimensions, and target bounds.
Dataset load_dataset(const RunConfig& run);

// ---- deterministic ordering ----------------------------------------------
// Both depend only on (seed, n) / (seed, epoch, n), never on the model, so
// every ablation variant trained with the same seed sees identical batches.

struct SplitIndices {
  std::vector<int> train, val;
};

// Shuffles [0, n) and reserves round(val_fraction * n) examples (at least 1,
// and at least 1 left for training) for validation. val_fraction 0 disables
// the split.
SplitIndices split_dataset(std::uint64_t seed, int n, double val_fraction);

// Training-order permutation for one epoch.
std::vector<int> epoch_order(std::uint64_t seed, int epoch, int n);

// ---- single-example forward ------------------------------------------------

template <class S>
struct ExampleResult {
  Var<S> loss;        // 1x1
  int predicted = 0;  // answer id / rounded count / candidate index
  double raw = 0.0;   // count regime: unrounded estimate
};

// Runs the full pipeline for one example on the caller's tape and returns
// the per-example loss (cross-entropy / squared error / ranking hinge).
// Multi-choice examples run one pass for the question and one per candidate,
// all on the same tape.
template <class S>
ExampleResult<S> example_forward(TptModel<S>& model, AnswerHead<S>& head, Tape<S>& tape,
                                 const ManifestRecord& rec, const RawVideoFeatures& video) {
  ExampleResult<S> out;
  TokenSequence<S> question = encode_text(model, tape, rec.question);
  FusedOutput<S> fused = tpt_forward(model, tape, question, video);

  if (auto* open = std::get_if<OpenEndedHead<S>>(&head)) {
    require(rec.regime == Regime::OpenEnded, ErrorKind::Usage,
            "example_forward: open-ended head on a ", to_string(rec.regime), " record");
    Var<S> probs = open_ended_forward(*open, fused.o_bar);
    out.loss = cross_entropy(probs, rec.target);
    out.predicted = argmax_index(probs.value());
  } else if (auto* count = std::get_if<CountHead<S>>(&head)) {
    require(rec.regime == Regime::Count, ErrorKind::Usage, "example_forward: count head on a ",
            to_string(rec.regime), " record");
    Var<S> raw = count_forward(*count, fused.o_bar);
    out.loss = mse_loss(raw, static_cast<double>(rec.target));
    out.raw = static_cast<double>(raw.value()(0, 0));
    out.predicted = round_count(out.raw, count->count_min, count->count_max);
  } else {
    auto& choice = std::get<MultiChoiceHead<S>>(head);
    require(rec.regime == Regime::MultiChoice, ErrorKind::Usage,
            "example_forward: multi-choice head on a ", to_string(rec.regime), " record");
    std::vector<Var<S>> candidates;
    for (const std::vector<int>& ids : rec.candidates) {
      TokenSequence<S> cand = encode_text(model, tape, ids);
      candidates.push_back(tpt_forward(model, tape, cand, video).o_bar);
    }
    Var<S> scores = multi_choice_scores(choice, fused.o_bar, candidates);
    out.loss = hinge_loss(scores, rec.target);
    out.predicted = argmax_index(scores.value());
  }
  return out;
}

// ---- evaluation -----------------------------------------------------------

struct EvalStats {
  int examples = 0;
  double loss = 0.0;      // mean per-example loss
  double accuracy = 0.0;  // exact match (count: after rounding/clamping)
  double mse = 0.0;       // count regime: mean squared error of raw estimates
  std::vector<std::vector<int>> confusion;  // confusion[target][predicted]
};

namespace detail {

// Incrementally builds EvalStats from per-example outcomes.
class StatsAccumulator {
 public:
  StatsAccumulator(Regime regime, int class_count, int count_min)
      : regime_(regime), count_min_(count_min) {
    confusion_.assign(static_cast<std::size_t>(class_count),
                      std::vector<int>(static_cast<std::size_t>(class_count), 0));
  }

  void add(double loss, int target, int predicted, double raw) {
    ++examples_;
    loss_sum_ += loss;
    correct_ += predicted == target ? 1 : 0;
    if (regime_ == Regime::Count) {
      const double err = raw - static_cast<double>(target);
      se_sum_ += err * err;
      target -= count_min_;
      predicted -= count_min_;
    }
    if (target >= 0 && target < static_cast<int>(confusion_.size()) && predicted >= 0 &&
        predicted < static_cast<int>(confusion_.size())) {
      ++confusion_[static_cast<std::size_t>(target)][static_cast<std::size_t>(predicted)];
    }
  }

  EvalStats finish() const {
    EvalStats s;
    s.examples = examples_;
    if (examples_ > 0) {
      s.loss = loss_sum_ / examples_;
      s.accuracy = static_cast<double>(correct_) / examples_;
      s.mse = regime_ == Regime::Count ? se_sum_ / examples_ : 0.0;
    }
    s.confusion = confusion_;
    return s;
  }

 private:
  Regime regime_;
  int count_min_ = 0;
  int examples_ = 0;
  int correct_ = 0;
  double loss_sum_ = 0.0;
  double se_sum_ = 0.0;
  std::vector<std::vector<int>> confusion_;
};

// Rows/columns of the confusion matrix for a regime.
int confusion_classes(const TptConfig& cfg, const Dataset& ds);

}  // namespace detail

// Value-only pass (no tape recording) over the given example indices.
template <class S>
EvalStats evaluate_split(TptModel<S>& model, AnswerHead<S>& head, const Dataset& ds,
                         const std::vector<int>& indices) {
  detail::StatsAccumulator acc(model.cfg.regime, detail::confusion_classes(model.cfg, ds),
                               model.cfg.count_min);
  for (int idx : indices) {
    require(idx >= 0 && idx < static_cast<int>(ds.manifest.records.size()), ErrorKind::Usage,
            "evaluate_split: example index ", idx, " out of range");
    Tape<S> tape;
    tape.recording = false;
    ExampleResult<S> r = example_forward(model, head, tape, ds.manifest.records[static_cast<std::size_t>(idx)],
                                         ds.videos[static_cast<std::size_t>(idx)]);
    const double loss = static_cast<double>(r.loss.value()(0, 0));
    require(std::isfinite(loss), ErrorKind::Numeric, "evaluate_split: non-finite loss on example ",
            idx);
    acc.add(loss, ds.manifest.records[static_cast<std::size_t>(idx)].target, r.predicted, r.raw);
  }
  return acc.finish();
}

// ---- training ----------------------------------------------------------------

struct TrainOutput {
  RunConfig run;                // as executed (answer_count etc. resolved)
  std::string metrics_path;     // <out_dir>/metrics.csv
  std::string checkpoint_path;  // <out_dir>/best.tptc
  int best_epoch = -1;
  double best_metric = std::numeric_limits<double>::infinity();
  EvalStats final_train;  // with the best parameters restored
  EvalStats final_val;    // empty (examples == 0) when val_fraction == 0
  std::vector<MetricsRow> rows;
};

// Full training loop: loads the dataset, builds the model/head, runs
// mini-batch gradient descent with the plateau schedule, logs one metrics row
// per split per epoch, keeps the best checkpoint by validation loss (training
// loss when there is no validation split), restores it, and reports final
// statistics. Dispatches on run.precision.
TrainOutput train_run(const RunConfig& run);

// ---- checkpoint-driven evaluation ---------------------------------------------

struct EvalRun {
  TptConfig model_config;  // as stored in the checkpoint
  int vocab_size = 0;
  EvalStats stats;
};

// Rebuilds the model from the checkpoint's embedded configuration and scores
// every record in the manifest. `expected_model` (when non-null) is checked
// against the stored configuration; any differing keys abort with a message
// listing them.
EvalRun evaluate_checkpoint(const std::string& checkpoint_path, const std::string& manifest_path,
                            const std::string& vocab_path = "",
                            const std::string& answers_path = "",
                            const KvMap* expected_model = nullptr);

// ---- gradient audit ---------------------------------------------------------

struct GradAudit {
  Regime regime = Regime::OpenEnded;
  double max_rel_error = 0.0;
  std::string worst_parameter;  // name of the parameter holding the worst entry
  long long scalars = 0;        // parameter scalars swept
  double seconds = 0.0;
};

// Central-finite-difference audit of the complete pipeline (token embedding
// through the per-regime loss) at 64-bit precision, on a self-contained
// random example — no dataset needed. Sweeps every parameter scalar. cfg's
// regime field is ignored in favor of the explicit argument; answer_count
// defaults to 4 when unset.
GradAudit audit_gradients(TptConfig cfg, Regime regime, std::uint64_t seed, double step = 1e-5);

// ---- ablation grid ---------------------------------------------------------

struct AblationVariant {
  std::string name;        // row label and output subdirectory
  KvMap model_overrides;   // e.g. {"fixed_level", "1"} or {"drop_qt", "true"}
};

struct AblationCell {
  std::string variant;
  std::uint64_t seed;
  EvalStats val;  // best-checkpoint validation stats for that run
};

struct AblationRow {
  std::string variant;
  int runs = 0;
  double mean_loss = 0.0;
  double mean_accuracy = 0.0, min_accuracy = 0.0, max_accuracy = 0.0;
  double mean_mse = 0.0, min_mse = 0.0, max_mse = 0.0;
};

struct AblationSummary {
  std::vector<AblationCell> cells;
  std::vector<AblationRow> rows;   // one per variant, in input order
  std::string table_path;          // <out_dir>/ablation.csv
};

// Trains base with each variant's model-key overrides for each seed (same
// data, same split, same batch order across variants) and aggregates the
// best-checkpoint validation statistics.
AblationSummary run_ablation(const RunConfig& base, const std::vector<AblationVariant>& variants,
                             const std::vector<std::uint64_t>& seeds);

}  // namespace tpt
