#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tpt {

enum class Activation { Gelu, Relu, Tanh, Identity };
enum class Regime { OpenEnded, Count, MultiChoice };
enum class Precision { F32, F64 };
enum class SchedulerMetric { Train, Val };
enum class Task { ScaleCount, GlobalClass, Transition, FrameClass };

std::string to_string(Activation a);
std::string to_string(Regime r);
std::string to_string(Precision p);
std::string to_string(SchedulerMetric m);
std::string to_string(Task t);
Activation activation_from_string(const std::string& s);
Regime regime_from_string(const std::string& s);
Precision precision_from_string(const std::string& s);
SchedulerMetric scheduler_metric_from_string(const std::string& s);
Task task_from_string(const std::string& s);

// Structural hyperparameters of the model. Field names follow the roles the
// values play; the classic symbols (N, T, R, d, H) are noted inline.
struct TptConfig {
  int levels = 3;              // N: pyramid levels
  int frames_per_segment = 16; // T: appearance tokens per segment
  int layers_per_block = 3;    // R: transformer layers per block
  int model_dim = 512;         // d: shared model width
  int heads = 8;               // H: attention heads
  int ff_dim = 2048;           // feed-forward inner width
  int text_layers = 1;         // self-attention layers in the text encoder
  int text_embed_dim = 300;    // embedding-table width
  int appearance_dim = 2048;   // per-frame feature width entering the model
  int motion_dim = 2048;       // per-segment feature width entering the model
  bool scale_per_head = false; // attention scale: false = sqrt(d), true = sqrt(d/H)
  Activation decoder_activation = Activation::Gelu;
  double ln_eps = 1e-5;

  // Task/head structure.
  Regime regime = Regime::OpenEnded;
  int answer_count = 0; // |A| classes for open-ended (from the answer-space file)
  int count_min = 0;    // count-regime output clamp, inclusive
  int count_max = 10;
  int choices = 0;      // K candidates for multi-choice (from the manifest)

  // Ablation switches.
  int fixed_level = 0;  // 0 = full pyramid 1..N; L>0 = feed only level L
  bool drop_qt = false; // bypass the question pyramid: use the encoded question directly

  // Pyramid levels actually fed to the model, honoring fixed_level.
  std::vector<int> active_levels() const;
};

// Everything a training/eval run needs beyond model structure.
struct RunConfig {
  TptConfig model;
  int batch_size = 64;
  int epochs = 50;
  double lr = 1e-4;
  int patience = 5; // epochs without improvement before the lr halves
  std::uint64_t seed = 1;
  Precision precision = Precision::F32;
  SchedulerMetric scheduler_metric = SchedulerMetric::Train;
  double val_fraction = 0.2;
  bool record_timing = true; // false writes 0.000 in the seconds column (reproducible logs)
  std::string out_dir;
  std::string manifest;
  std::string vocab;         // defaults to vocab.txt beside the manifest
  std::string answers;       // defaults to answers.txt beside the manifest when present
  std::string embedding_file; // optional pretrained embedding vectors
};

// Synthetic dataset generation settings.
struct GenConfig {
  Task task = Task::GlobalClass;
  int size = 64;
  std::uint64_t seed = 7;
  std::string out_dir;
  int frames = 16;
  int appearance_dim = 16;
  int motion_dim = 16;
  int classes = 4;   // answer classes for classification tasks
  int count_max = 10;
  int choices = 2;   // candidates for transition (multi-choice)
  int window_levels = 3; // motion windows are precomputed for levels 1..window_levels
  double noise = 0.1;    // feature noise sigma (signal coordinates carry 1.0)
};

// Flat key=value configuration text: one `key = value` pair per line,
// '#' starts a comment, later keys override earlier ones.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text, const std::string& origin);
KvMap load_kv_file(const std::string& path);
std::string serialize_kv(const KvMap& kv);

// Applies recognized keys onto the configs; unknown keys raise a config
// error listing the valid names.
void apply_kv(const KvMap& kv, RunConfig& run);
void apply_kv(const KvMap& kv, GenConfig& gen);
KvMap to_kv(const RunConfig& run);
KvMap to_kv(const GenConfig& gen);
KvMap to_kv(const TptConfig& model);
void apply_model_kv(const KvMap& kv, TptConfig& model);

// Fails with a config error when structural invariants are violated
// (d divisible by H, positive dims, fixed_level within range, ...).
void validate(const TptConfig& cfg);
void validate(const RunConfig& run);
void validate(const GenConfig& gen);

// The small configuration used by tests and `gradcheck`.
TptConfig desk_model_config();
// The full-scale configuration documented from the reference setup.
TptConfig paper_model_config();
RunConfig desk_run_config();

}  // namespace tpt
