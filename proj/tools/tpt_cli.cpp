// Command-line front end: synthetic data generation, training, checkpoint
// evaluation, finite-difference gradient audits, and ablation grids.
//
// Every subcommand resolves its settings in fixed precedence order:
//   preset defaults  <  --config FILE  <  --set KEY=VALUE  <  explicit flags.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "tpt/config.hpp"
#include "tpt/errors.hpp"
#include "tpt/synthetic.hpp"
#include "tpt/trainer.hpp"

namespace {

using tpt::KvMap;

// Merges a config file (when given) with repeated KEY=VALUE overrides;
// later sources win.
KvMap overlay_kv(const std::string& config_file, const std::vector<std::string>& sets) {
  KvMap kv;
  if (!config_file.empty()) kv = tpt::load_kv_file(config_file);
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    tpt::require(eq != std::string::npos && eq > 0, tpt::ErrorKind::Config,
                 "--set expects KEY=VALUE, got '", s, "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

void print_stats(const char* label, const tpt::EvalStats& s) {
  std::printf("%-6s examples=%d loss=%.6f accuracy=%.4f mse=%.6f\n", label, s.examples, s.loss,
              s.accuracy, s.mse);
}

void print_confusion(const tpt::EvalStats& s) {
  if (s.confusion.empty() || s.confusion.size() > 12) return;
  std::printf("confusion (rows = target, columns = predicted):\n");
  for (std::size_t t = 0; t < s.confusion.size(); ++t) {
    std::printf("  %2zu:", t);
    for (int c : s.confusion[t]) std::printf(" %4d", c);
    std::printf("\n");
  }
}

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_file, "key = value settings file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "KEY=VALUE override (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal pyramid transformer for video question answering"};
  app.require_subcommand(1);
  int exit_code = 0;

  // ---- gen ------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "write a synthetic dataset directory");
  CommonOpts gen_common;
  add_common(gen, gen_common);
  std::string gen_task, gen_out;
  int gen_size = 0;
  std::uint64_t gen_seed = 0;
  auto* gen_task_opt =
      gen->add_option("--task", gen_task, "scale-count|global-class|transition|frame-class");
  auto* gen_out_opt = gen->add_option("--out", gen_out, "output directory");
  auto* gen_size_opt = gen->add_option("--size", gen_size, "number of examples");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "generation seed");
  gen->callback([&] {
    tpt::GenConfig cfg;
    tpt::apply_kv(overlay_kv(gen_common.config_file, gen_common.sets), cfg);
    if (gen_task_opt->count() > 0) cfg.task = tpt::task_from_string(gen_task);
    if (gen_out_opt->count() > 0) cfg.out_dir = gen_out;
    if (gen_size_opt->count() > 0) cfg.size = gen_size;
    if (gen_seed_opt->count() > 0) cfg.seed = gen_seed;
    tpt::GeneratedDataset ds = tpt::gen_synthetic(cfg);
    std::printf("wrote %s: %zu examples, task %s\n", ds.dir.c_str(), ds.records.size(),
                tpt::to_string(cfg.task).c_str());
    std::printf("manifest %s\n", ds.manifest.c_str());
    std::printf("vocab    %s\n", ds.vocab.c_str());
    if (!ds.answers.empty())
      std::printf("answers  %s (%d classes)\n", ds.answers.c_str(), ds.answer_count);
  });

  // ---- train ----------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train a model and keep the best checkpoint");
  CommonOpts train_common;
  add_common(train, train_common);
  std::string train_preset = "desk";
  train->add_option("--preset", train_preset, "base settings: desk (small) or paper (full scale)")
      ->check(CLI::IsMember({"desk", "paper"}));
  std::string train_manifest, train_out, train_precision;
  int train_epochs = 0, train_batch = 0;
  double train_lr = 0.0, train_val_fraction = 0.0;
  std::uint64_t train_seed = 0;
  auto* tm_opt = train->add_option("--manifest", train_manifest, "dataset manifest file");
  auto* to_opt = train->add_option("--out", train_out, "output directory");
  auto* te_opt = train->add_option("--epochs", train_epochs, "training epochs");
  auto* tb_opt = train->add_option("--batch-size", train_batch, "mini-batch size");
  auto* tl_opt = train->add_option("--lr", train_lr, "initial learning rate");
  auto* ts_opt = train->add_option("--seed", train_seed, "run seed");
  auto* tp_opt = train->add_option("--precision", train_precision, "f32|f64");
  auto* tv_opt =
      train->add_option("--val-fraction", train_val_fraction, "held-out fraction in [0,1)");
  train->callback([&] {
    tpt::RunConfig run = train_preset == "paper" ? tpt::RunConfig{} : tpt::desk_run_config();
    tpt::apply_kv(overlay_kv(train_common.config_file, train_common.sets), run);
    if (tm_opt->count() > 0) run.manifest = train_manifest;
    if (to_opt->count() > 0) run.out_dir = train_out;
    if (te_opt->count() > 0) run.epochs = train_epochs;
    if (tb_opt->count() > 0) run.batch_size = train_batch;
    if (tl_opt->count() > 0) run.lr = train_lr;
    if (ts_opt->count() > 0) run.seed = train_seed;
    if (tp_opt->count() > 0) run.precision = tpt::precision_from_string(train_precision);
    if (tv_opt->count() > 0) run.val_fraction = train_val_fraction;
    tpt::TrainOutput out = tpt::train_run(run);
    std::printf("metrics    %s\n", out.metrics_path.c_str());
    std::printf("checkpoint %s (best epoch %d)\n", out.checkpoint_path.c_str(), out.best_epoch);
    print_stats("train", out.final_train);
    if (out.final_val.examples > 0) print_stats("val", out.final_val);
  });

  // ---- eval -----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a manifest");
  std::string eval_ck, eval_manifest, eval_vocab, eval_answers;
  eval->add_option("--checkpoint", eval_ck, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--manifest", eval_manifest, "dataset manifest file")->required();
  eval->add_option("--vocab", eval_vocab, "vocabulary file (default: vocab.txt beside manifest)");
  eval->add_option("--answers", eval_answers,
                   "answer-space file (default: answers.txt beside manifest)");
  eval->callback([&] {
    tpt::EvalRun r = tpt::evaluate_checkpoint(eval_ck, eval_manifest, eval_vocab, eval_answers);
    const tpt::TptConfig& m = r.model_config;
    std::printf("model: regime=%s levels=%d frames_per_segment=%d layers_per_block=%d "
                "model_dim=%d heads=%d vocab=%d\n",
                tpt::to_string(m.regime).c_str(), m.levels, m.frames_per_segment,
                m.layers_per_block, m.model_dim, m.heads, r.vocab_size);
    print_stats("eval", r.stats);
    print_confusion(r.stats);
  });

  // ---- gradcheck --------------------------------------------------------------
  auto* gc = app.add_subcommand(
      "gradcheck", "finite-difference audit of the full pipeline at 64-bit precision");
  CommonOpts gc_common;
  add_common(gc, gc_common);
  std::string gc_regime;
  std::uint64_t gc_seed = 5;
  double gc_step = 1e-5, gc_tol = 1e-4;
  gc->add_option("--regime", gc_regime, "audit one regime instead of all three")
      ->check(CLI::IsMember({"open-ended", "count", "multi-choice"}));
  gc->add_option("--seed", gc_seed, "seed for the audited example and init");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_option("--tolerance", gc_tol, "maximum acceptable relative error");
  gc->callback([&] {
    tpt::TptConfig base = tpt::desk_model_config();
    tpt::apply_model_kv(overlay_kv(gc_common.config_file, gc_common.sets), base);
    std::vector<tpt::Regime> regimes;
    if (gc_regime.empty())
      regimes = {tpt::Regime::OpenEnded, tpt::Regime::Count, tpt::Regime::MultiChoice};
    else
      regimes = {tpt::regime_from_string(gc_regime)};
    for (tpt::Regime regime : regimes) {
      tpt::GradAudit a = tpt::audit_gradients(base, regime, gc_seed, gc_step);
      const bool ok = a.max_rel_error < gc_tol;
      std::printf("%-12s scalars=%lld max_rel=%.3e worst=%s %.2fs %s\n",
                  tpt::to_string(a.regime).c_str(), a.scalars, a.max_rel_error,
                  a.worst_parameter.c_str(), a.seconds, ok ? "PASS" : "FAIL");
      if (!ok) exit_code = 1;
    }
  });

  // ---- ablate ---------------------------------------------------------------
  auto* ablate = app.add_subcommand(
      "ablate", "train the full model plus reduced variants across seeds and tabulate");
  CommonOpts ab_common;
  add_common(ablate, ab_common);
  std::string ab_preset = "desk";
  ablate->add_option("--preset", ab_preset, "base settings: desk (small) or paper (full scale)")
      ->check(CLI::IsMember({"desk", "paper"}));
  std::string ab_manifest, ab_out;
  int ab_epochs = 0;
  std::vector<std::uint64_t> ab_seeds{1, 2, 3};
  std::vector<int> ab_fixed_levels;
  bool ab_drop_qt = false;
  auto* am_opt = ablate->add_option("--manifest", ab_manifest, "dataset manifest file");
  auto* ao_opt = ablate->add_option("--out", ab_out, "output directory for the grid");
  auto* ae_opt = ablate->add_option("--epochs", ab_epochs, "training epochs per run");
  ablate->add_option("--seeds", ab_seeds, "comma-separated run seeds")->delimiter(',');
  ablate
      ->add_option("--fixed-levels", ab_fixed_levels,
                   "add a single-level variant per listed pyramid level")
      ->delimiter(',');
  ablate->add_flag("--drop-qt", ab_drop_qt, "add a variant that bypasses the question pyramid");
  ablate->callback([&] {
    tpt::RunConfig base = ab_preset == "paper" ? tpt::RunConfig{} : tpt::desk_run_config();
    tpt::apply_kv(overlay_kv(ab_common.config_file, ab_common.sets), base);
    if (am_opt->count() > 0) base.manifest = ab_manifest;
    if (ao_opt->count() > 0) base.out_dir = ab_out;
    if (ae_opt->count() > 0) base.epochs = ab_epochs;
    std::vector<tpt::AblationVariant> variants{{"full", {}}};
    for (int level : ab_fixed_levels)
      variants.push_back({"level" + std::to_string(level),
                          {{"fixed_level", std::to_string(level)}}});
    if (ab_drop_qt) variants.push_back({"no_question_pyramid", {{"drop_qt", "true"}}});
    std::printf("training %zu runs (%zu variants x %zu seeds) under %s\n",
                variants.size() * ab_seeds.size(), variants.size(), ab_seeds.size(),
                base.out_dir.c_str());
    tpt::AblationSummary grid = tpt::run_ablation(base, variants, ab_seeds);
    std::printf("%-22s %4s %10s  %-22s %s\n", "variant", "runs", "mean_loss",
                "accuracy mean [min,max]", "mse mean [min,max]");
    for (const tpt::AblationRow& row : grid.rows) {
      std::printf("%-22s %4d %10.5f  %.4f [%.4f,%.4f]  %.5f [%.5f,%.5f]\n", row.variant.c_str(),
                  row.runs, row.mean_loss, row.mean_accuracy, row.min_accuracy, row.max_accuracy,
                  row.mean_mse, row.min_mse, row.max_mse);
    }
    std::printf("table %s\n", grid.table_path.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const tpt::TptError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return exit_code;
}
