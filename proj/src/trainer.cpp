#include "tpt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <utility>

#include "tpt/nn.hpp"
#include "tpt/rng.hpp"
#include "tpt/vocab.hpp"

namespace tpt {

namespace {

namespace fs = std::filesystem;

// Distinct salts keep the split, the per-epoch order, and the weight
// initialization on independent streams of the same user-visible seed.
constexpr std::uint64_t kSplitSalt = 0xD1B54A32D192ED03ULL;
constexpr std::uint64_t kOrderSalt = 0x9E3779B97F4A7C15ULL;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_ids(const std::vector<int>& ids, int vocab_size, const std::string& where) {
  for (int id : ids) {
    require(id >= 0 && id < vocab_size, ErrorKind::Data, where, ": token id ", id,
            " outside the vocabulary (size ", vocab_size, ")");
  }
}

// ---- precision bridges ---------------------------------------------------
// Checkpoints store 32-bit values; these adapt a registry of any scalar type.

void save_typed_checkpoint(const std::string& path, const KvMap& config,
                           const std::vector<Parameter<float>*>& params) {
  save_checkpoint(path, config, params);
}

void save_typed_checkpoint(const std::string& path, const KvMap& config,
                           const std::vector<Parameter<double>*>& params) {
  std::vector<Parameter<float>> staging;
  staging.reserve(params.size());
  for (const Parameter<double>* p : params)
    staging.emplace_back(p->name, Mat<float>(p->value.cast<float>()));
  std::vector<Parameter<float>*> ptrs;
  for (Parameter<float>& p : staging) ptrs.push_back(&p);
  save_checkpoint(path, config, ptrs);
}

void apply_typed_checkpoint(const Checkpoint& ck, const std::vector<Parameter<float>*>& params) {
  apply_checkpoint(ck, params);
}

void apply_typed_checkpoint(const Checkpoint& ck, const std::vector<Parameter<double>*>& params) {
  std::vector<Parameter<float>> staging;
  staging.reserve(params.size());
  for (const Parameter<double>* p : params)
    staging.emplace_back(p->name, Mat<float>(p->value.cast<float>()));
  std::vector<Parameter<float>*> ptrs;
  for (Parameter<float>& p : staging) ptrs.push_back(&p);
  apply_checkpoint(ck, ptrs);
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i]->value = staging[i].value.cast<double>();
}

// ---- the training loop -------------------------------------------------------

template <class S>
TrainOutput train_impl(RunConfig run) {
  validate(run);
  require(!run.out_dir.empty(), ErrorKind::Config, "train requires an output directory");
  Dataset ds = load_dataset(run);
  const int n = static_cast<int>(ds.manifest.records.size());

  if (run.model.regime == Regime::OpenEnded) {
    const int n_answers = static_cast<int>(ds.answers.size());
    if (run.model.answer_count == 0) run.model.answer_count = n_answers;
    require(run.model.answer_count == n_answers, ErrorKind::Config, "model expects ",
            run.model.answer_count, " answer classes but the answer file lists ", n_answers);
  }

  fs::create_directories(run.out_dir);
  TrainOutput out;
  out.run = run;
  out.metrics_path = (fs::path(run.out_dir) / "metrics.csv").string();
  out.checkpoint_path = (fs::path(run.out_dir) / "best.tptc").string();

  Rng rng(run.seed);
  TptModel<S> model = make_tpt_model<S>(rng, run.model, ds.vocab.size());
  AnswerHead<S> head = make_answer_head<S>(rng, run.model);
  std::vector<Parameter<S>*> params = model.parameters();
  append_parameters(head, params);

  if (!run.embedding_file.empty()) {
    Mat<float> staging = model.word_embed.table.value.template cast<float>();
    load_embedding_vectors(run.embedding_file, ds.vocab, staging);
    model.word_embed.table.value = staging.template cast<S>();
  }

  SplitIndices split = split_dataset(run.seed, n, run.val_fraction);
  require(run.scheduler_metric == SchedulerMetric::Train || !split.val.empty(),
          ErrorKind::Config, "scheduler_metric=val requires a validation split");

  AdamState<S> opt(params, run.lr);
  PlateauScheduler sched(run.lr, run.patience);

  KvMap ck_config = to_kv(run.model);
  ck_config["vocab_size"] = std::to_string(ds.vocab.size());

  MetricsWriter writer(out.metrics_path, run.seed);
  const int classes = detail::confusion_classes(run.model, ds);

  for (int epoch = 0; epoch < run.epochs; ++epoch) {
    const double lr_epoch = sched.lr();
    opt.set_lr(lr_epoch);
    const auto train_start = std::chrono::steady_clock::now();

    std::vector<int> order = epoch_order(run.seed, epoch, static_cast<int>(split.train.size()));
    detail::StatsAccumulator train_acc(run.model.regime, classes, run.model.count_min);

    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(run.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(run.batch_size));
      const S inv_batch = static_cast<S>(1.0 / static_cast<double>(end - begin));
      zero_grads(params);
      for (std::size_t i = begin; i < end; ++i) {
        const int idx = split.train[static_cast<std::size_t>(order[i])];
        Tape<S> tape;
        ExampleResult<S> r = example_forward(model, head, tape,
                                             ds.manifest.records[static_cast<std::size_t>(idx)],
                                             ds.videos[static_cast<std::size_t>(idx)]);
        const double loss = static_cast<double>(r.loss.value()(0, 0));
        require(std::isfinite(loss), ErrorKind::Numeric, "epoch ", epoch, ", batch ",
                begin / static_cast<std::size_t>(run.batch_size), ": non-finite loss on example ",
                idx);
        tape.backward(scale(r.loss, inv_batch));
        train_acc.add(loss, ds.manifest.records[static_cast<std::size_t>(idx)].target, r.predicted,
                      r.raw);
      }
      opt.step();
    }

    EvalStats train_stats = train_acc.finish();
    MetricsRow train_row{epoch, "train", train_stats.loss, train_stats.accuracy, train_stats.mse,
                         lr_epoch, run.record_timing ? seconds_since(train_start) : 0.0};
    writer.append(train_row);
    out.rows.push_back(train_row);

    EvalStats val_stats;
    if (!split.val.empty()) {
      const auto val_start = std::chrono::steady_clock::now();
      val_stats = evaluate_split(model, head, ds, split.val);
      MetricsRow val_row{epoch, "val", val_stats.loss, val_stats.accuracy, val_stats.mse, lr_epoch,
                         run.record_timing ? seconds_since(val_start) : 0.0};
      writer.append(val_row);
      out.rows.push_back(val_row);
    }

    sched.observe(run.scheduler_metric == SchedulerMetric::Val ? val_stats.loss
                                                               : train_stats.loss);

    const double selection = split.val.empty() ? train_stats.loss : val_stats.loss;
    if (selection < out.best_metric) {
      out.best_metric = selection;
      out.best_epoch = epoch;
      save_typed_checkpoint(out.checkpoint_path, ck_config, params);
    }
  }

  // Score both splits with the selected parameters restored.
  apply_typed_checkpoint(load_checkpoint(out.checkpoint_path), params);
  out.final_train = evaluate_split(model, head, ds, split.train);
  if (!split.val.empty()) out.final_val = evaluate_split(model, head, ds, split.val);
  return out;
}

}  // namespace

// ---- dataset loading ---------------------------------------------------------

Dataset load_dataset(const RunConfig& run) {
  require(!run.manifest.empty(), ErrorKind::Config, "no manifest path configured");
  Dataset ds;
  ds.manifest = load_manifest(run.manifest);
  const fs::path dir(ds.manifest.dir);

  const std::string vocab_path = run.vocab.empty() ? (dir / "vocab.txt").string() : run.vocab;
  ds.vocab = Vocab::load(vocab_path);

  std::string answers_path = run.answers;
  if (answers_path.empty() && fs::exists(dir / "answers.txt"))
    answers_path = (dir / "answers.txt").string();
  if (!answers_path.empty()) ds.answers = load_answers(answers_path);

  const TptConfig& m = run.model;
  if (m.regime == Regime::OpenEnded) {
    require(!ds.answers.empty(), ErrorKind::Data,
            "open-ended runs need an answer file (answers.txt beside the manifest, or the "
            "answers path set explicitly)");
  }

  ds.videos.reserve(ds.manifest.records.size());
  for (std::size_t i = 0; i < ds.manifest.records.size(); ++i) {
    const ManifestRecord& rec = ds.manifest.records[i];
    const std::string where = run.manifest + " record " + std::to_string(i);
    require(rec.regime == m.regime, ErrorKind::Data, where, ": record regime '",
            to_string(rec.regime), "' does not match the configured regime '", to_string(m.regime),
            "'");
    check_ids(rec.question, ds.vocab.size(), where);
    for (const auto& cand : rec.candidates) check_ids(cand, ds.vocab.size(), where);

    switch (m.regime) {
      case Regime::OpenEnded:
        require(rec.target < static_cast<int>(ds.answers.size()), ErrorKind::Data, where,
                ": answer id ", rec.target, " outside the ", ds.answers.size(), "-class space");
        break;
      case Regime::Count:
        require(rec.target >= m.count_min && rec.target <= m.count_max, ErrorKind::Data, where,
                ": count ", rec.target, " outside the configured range [", m.count_min, ", ",
                m.count_max, "]");
        break;
      case Regime::MultiChoice:
        if (m.choices > 0) {
          require(static_cast<int>(rec.candidates.size()) == m.choices, ErrorKind::Data, where,
                  ": ", rec.candidates.size(), " candidates but the run is configured for ",
                  m.choices);
        }
        break;
    }

    RawVideoFeatures video = read_feature_file(resolve_video(ds.manifest, rec));
    require(video.appearance_dim() == m.appearance_dim, ErrorKind::Data, where,
            ": appearance width ", video.appearance_dim(), " does not match the configured ",
            m.appearance_dim);
    require(video.motion_dim == m.motion_dim, ErrorKind::Data, where, ": motion width ",
            video.motion_dim, " does not match the configured ", m.motion_dim);
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

// ---- deterministic ordering ----------------------------------------------

SplitIndices split_dataset(std::uint64_t seed, int n, double val_fraction) {
  require(n >= 1, ErrorKind::Usage, "split_dataset: empty dataset");
  require(val_fraction >= 0.0 && val_fraction < 1.0, ErrorKind::Config,
          "val_fraction must lie in [0, 1), got ", val_fraction);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed ^ kSplitSalt);
  rng.shuffle(perm);

  const int n_val =
      val_fraction > 0.0 ? std::max(1, static_cast<int>(std::llround(val_fraction * n))) : 0;
  require(n - n_val >= 1, ErrorKind::Config, "validation split of ", n_val, " leaves no training "
          "examples (dataset has ", n, ")");

  SplitIndices s;
  s.val.assign(perm.begin(), perm.begin() + n_val);
  s.train.assign(perm.begin() + n_val, perm.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<int> epoch_order(std::uint64_t seed, int epoch, int n) {
  require(n >= 1, ErrorKind::Usage, "epoch_order: empty split");
  require(epoch >= 0, ErrorKind::Usage, "epoch_order: negative epoch");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed + kOrderSalt * static_cast<std::uint64_t>(epoch + 1));
  rng.shuffle(perm);
  return perm;
}

int detail::confusion_classes(const TptConfig& cfg, const Dataset& ds) {
  switch (cfg.regime) {
    case Regime::OpenEnded:
      return cfg.answer_count > 0 ? cfg.answer_count : static_cast<int>(ds.answers.size());
    case Regime::Count:
      return cfg.count_max - cfg.count_min + 1;
    case Regime::MultiChoice: {
      int k = 2;
      for (const auto& rec : ds.manifest.records)
        k = std::max(k, static_cast<int>(rec.candidates.size()));
      return k;
    }
  }
  fail(ErrorKind::Config, "confusion_classes: unreachable regime");
}

// ---- entry points ----------------------------------------------------------

TrainOutput train_run(const RunConfig& run) {
  switch (run.precision) {
    case Precision::F32: return train_impl<float>(run);
    case Precision::F64: return train_impl<double>(run);
  }
  fail(ErrorKind::Config, "train_run: unreachable precision");
}

EvalRun evaluate_checkpoint(const std::string& checkpoint_path, const std::string& manifest_path,
                            const std::string& vocab_path, const std::string& answers_path,
                            const KvMap* expected_model) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  auto stored_vocab = ck.config.find("vocab_size");
  require(stored_vocab != ck.config.end(), ErrorKind::Data, checkpoint_path,
          ": checkpoint carries no vocab_size entry");
  const int vocab_size = std::stoi(stored_vocab->second);

  KvMap model_kv = ck.config;
  model_kv.erase("vocab_size");

  if (expected_model) {
    std::string diffs;
    for (const auto& [k, v] : *expected_model) {
      auto it = model_kv.find(k);
      if (it == model_kv.end()) {
        diffs += " " + k + " (not stored)";
      } else if (it->second != v) {
        diffs += " " + k + " (checkpoint " + it->second + ", requested " + v + ")";
      }
    }
    require(diffs.empty(), ErrorKind::Config,
            "requested configuration disagrees with the checkpoint:", diffs);
  }

  TptConfig cfg;
  apply_model_kv(model_kv, cfg);
  validate(cfg);

  RunConfig shim;
  shim.model = cfg;
  shim.manifest = manifest_path;
  shim.vocab = vocab_path;
  shim.answers = answers_path;
  Dataset ds = load_dataset(shim);
  require(ds.vocab.size() == vocab_size, ErrorKind::Data, "vocabulary has ", ds.vocab.size(),
          " entries but the checkpoint was trained with ", vocab_size);
  if (cfg.regime == Regime::OpenEnded) {
    require(static_cast<int>(ds.answers.size()) == cfg.answer_count, ErrorKind::Data,
            "answer file lists ", ds.answers.size(), " classes but the checkpoint was trained "
            "with ", cfg.answer_count);
  }

  Rng rng(0);
  TptModel<float> model = make_tpt_model<float>(rng, cfg, vocab_size);
  AnswerHead<float> head = make_answer_head<float>(rng, cfg);
  std::vector<Parameter<float>*> params = model.parameters();
  append_parameters(head, params);
  apply_checkpoint(ck, params);

  std::vector<int> all(ds.manifest.records.size());
  std::iota(all.begin(), all.end(), 0);

  EvalRun out;
  out.model_config = cfg;
  out.vocab_size = vocab_size;
  out.stats = evaluate_split(model, head, ds, all);
  return out;
}

GradAudit audit_gradients(TptConfig cfg, Regime regime, std::uint64_t seed, double step) {
  cfg.regime = regime;
  if (regime == Regime::OpenEnded && cfg.answer_count == 0) cfg.answer_count = 4;
  validate(cfg);

  constexpr int kVocab = 8;
  Rng rng(seed);

  // Self-contained random example: full frame coverage for every level and
  // one motion vector per bisection window.
  const int frames = cfg.frames_per_segment * (1 << (cfg.levels - 1));
  RawVideoFeatures video;
  video.frame_features = Mat<float>(frames, cfg.appearance_dim);
  for (int f = 0; f < frames; ++f)
    for (int c = 0; c < cfg.appearance_dim; ++c)
      video.frame_features(f, c) = static_cast<float>(rng.normal());
  video.motion_dim = cfg.motion_dim;
  std::map<std::pair<int, int>, std::vector<float>> windows;
  for (int level = 1; level <= cfg.levels; ++level) {
    for (const Span& s : segment_spans(frames, level)) {
      auto key = std::make_pair(s.begin, s.end);
      if (windows.count(key)) continue;
      std::vector<float> vec(static_cast<std::size_t>(cfg.motion_dim));
      for (float& v : vec) v = static_cast<float>(rng.normal());
      windows[key] = std::move(vec);
    }
  }
  video.motion_fn = [windows](const Span& s) {
    auto it = windows.find({s.begin, s.end});
    require(it != windows.end(), ErrorKind::Data, "audit_gradients: unexpected window [", s.begin,
            ", ", s.end, ")");
    return it->second;
  };

  ManifestRecord rec;
  rec.question = {2, 3};
  rec.regime = regime;
  switch (regime) {
    case Regime::OpenEnded: rec.target = 1; break;
    case Regime::Count: rec.target = std::min(cfg.count_max, std::max(cfg.count_min, 2)); break;
    case Regime::MultiChoice:
      rec.candidates = {{4, 5}, {6, 7}};
      rec.target = 0;
      break;
  }

  TptModel<double> model = make_tpt_model<double>(rng, cfg, kVocab);
  AnswerHead<double> head = make_answer_head<double>(rng, cfg);
  std::vector<Parameter<double>*> params = model.parameters();
  append_parameters(head, params);

  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report = grad_check(
      params,
      [&](Tape<double>& tape) { return example_forward(model, head, tape, rec, video).loss; },
      step);

  GradAudit audit;
  audit.regime = regime;
  audit.max_rel_error = report.max_rel_error;
  audit.worst_parameter = report.worst.param;
  for (const Parameter<double>* p : params) audit.scalars += p->value.size();
  audit.seconds = seconds_since(t0);
  return audit;
}

AblationSummary run_ablation(const RunConfig& base, const std::vector<AblationVariant>& variants,
                             const std::vector<std::uint64_t>& seeds) {
  require(!variants.empty(), ErrorKind::Usage, "run_ablation: no variants");
  require(!seeds.empty(), ErrorKind::Usage, "run_ablation: no seeds");
  require(!base.out_dir.empty(), ErrorKind::Config, "run_ablation: base out_dir is empty");
  for (const AblationVariant& v : variants) {
    require(!v.name.empty() && v.name.find('/') == std::string::npos &&
                v.name.find('\\') == std::string::npos,
            ErrorKind::Usage, "run_ablation: variant name '", v.name,
            "' must be a plain directory name");
  }

  AblationSummary summary;
  for (const AblationVariant& variant : variants) {
    AblationRow row;
    row.variant = variant.name;
    bool first = true;
    for (std::uint64_t seed : seeds) {
      RunConfig run = base;
      apply_model_kv(variant.model_overrides, run.model);
      run.seed = seed;
      run.out_dir = (fs::path(base.out_dir) / variant.name / ("seed" + std::to_string(seed))).string();
      TrainOutput t = train_run(run);
      const EvalStats& v = t.final_val.examples > 0 ? t.final_val : t.final_train;
      summary.cells.push_back({variant.name, seed, v});

      ++row.runs;
      row.mean_loss += v.loss;
      row.mean_accuracy += v.accuracy;
      row.mean_mse += v.mse;
      row.min_accuracy = first ? v.accuracy : std::min(row.min_accuracy, v.accuracy);
      row.max_accuracy = first ? v.accuracy : std::max(row.max_accuracy, v.accuracy);
      row.min_mse = first ? v.mse : std::min(row.min_mse, v.mse);
      row.max_mse = first ? v.mse : std::max(row.max_mse, v.mse);
      first = false;
    }
    row.mean_loss /= row.runs;
    row.mean_accuracy /= row.runs;
    row.mean_mse /= row.runs;
    summary.rows.push_back(row);
  }

  summary.table_path = (fs::path(base.out_dir) / "ablation.csv").string();
  std::ofstream table(summary.table_path, std::ios::binary);
  require(table.good(), ErrorKind::Data, "cannot open '", summary.table_path, "' for writing");
  table << "variant,seed,examples,loss,accuracy,mse\n";
  for (const AblationCell& c : summary.cells) {
    table << c.variant << ',' << c.seed << ',' << c.val.examples << ',' << format_g17(c.val.loss)
          << ',' << format_g17(c.val.accuracy) << ',' << format_g17(c.val.mse) << '\n';
  }
  require(table.good(), ErrorKind::Data, "write failure on '", summary.table_path, "'");
  return summary;
}

}  // namespace tpt
