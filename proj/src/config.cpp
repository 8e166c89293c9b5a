#include "tpt/config.hpp"

#include <fstream>
#include <sstream>

#include "tpt/errors.hpp"

namespace tpt {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Gelu: return "gelu";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "gelu";
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::OpenEnded: return "open-ended";
    case Regime::Count: return "count";
    case Regime::MultiChoice: return "multi-choice";
  }
  return "open-ended";
}

std::string to_string(Precision p) { return p == Precision::F64 ? "f64" : "f32"; }

std::string to_string(SchedulerMetric m) {
  return m == SchedulerMetric::Val ? "val" : "train";
}

std::string to_string(Task t) {
  switch (t) {
    case Task::ScaleCount: return "scale-count";
    case Task::GlobalClass: return "global-class";
    case Task::Transition: return "transition";
    case Task::FrameClass: return "frame-class";
  }
  return "global-class";
}

Activation activation_from_string(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  fail(ErrorKind::Config, "unknown activation '", s, "' (gelu|relu|tanh|identity)");
}

Regime regime_from_string(const std::string& s) {
  if (s == "open-ended") return Regime::OpenEnded;
  if (s == "count") return Regime::Count;
  if (s == "multi-choice") return Regime::MultiChoice;
  fail(ErrorKind::Config, "unknown regime '", s, "' (open-ended|count|multi-choice)");
}

Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::F32;
  if (s == "f64") return Precision::F64;
  fail(ErrorKind::Config, "unknown precision '", s, "' (f32|f64)");
}

SchedulerMetric scheduler_metric_from_string(const std::string& s) {
  if (s == "train") return SchedulerMetric::Train;
  if (s == "val") return SchedulerMetric::Val;
  fail(ErrorKind::Config, "unknown scheduler metric '", s, "' (train|val)");
}

Task task_from_string(const std::string& s) {
  if (s == "scale-count") return Task::ScaleCount;
  if (s == "global-class") return Task::GlobalClass;
  if (s == "transition") return Task::Transition;
  if (s == "frame-class") return Task::FrameClass;
  fail(ErrorKind::Config, "unknown task '", s,
       "' (scale-count|global-class|transition|frame-class)");
}

std::vector<int> TptConfig::active_levels() const {
  if (fixed_level > 0) return {fixed_level};
  std::vector<int> out;
  for (int n = 1; n <= levels; ++n) out.push_back(n);
  return out;
}

// ---- kv text ----------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  fail(ErrorKind::Config, "key '", key, "': invalid boolean '", v, "'");
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    int value = std::stoi(v, &pos);
    require(pos == v.size(), ErrorKind::Config, "key '", key, "': trailing characters in '", v, "'");
    return value;
  } catch (const TptError&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "key '", key, "': invalid integer '", v, "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long value = std::stoull(v, &pos);
    require(pos == v.size(), ErrorKind::Config, "key '", key, "': trailing characters in '", v, "'");
    return static_cast<std::uint64_t>(value);
  } catch (const TptError&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "key '", key, "': invalid unsigned integer '", v, "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double value = std::stod(v, &pos);
    require(pos == v.size(), ErrorKind::Config, "key '", key, "': trailing characters in '", v, "'");
    return value;
  } catch (const TptError&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "key '", key, "': invalid number '", v, "'");
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

KvMap parse_kv_text(const std::string& text, const std::string& origin) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Config, origin, ":", lineno,
            ": expected 'key = value', got '", line, "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorKind::Config, origin, ":", lineno, ": empty key");
    kv[key] = value;
  }
  return kv;
}

KvMap load_kv_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Config, "cannot open config file '", path, "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv_text(buf.str(), path);
}

std::string serialize_kv(const KvMap& kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

// ---- model keys -------------------------------------------------------------

namespace {

// Returns true when the key belongs to TptConfig and was applied.
bool apply_one_model_key(const std::string& k, const std::string& v, TptConfig& m) {
  if (k == "levels") m.levels = parse_int(k, v);
  else if (k == "frames_per_segment") m.frames_per_segment = parse_int(k, v);
  else if (k == "layers_per_block") m.layers_per_block = parse_int(k, v);
  else if (k == "model_dim") m.model_dim = parse_int(k, v);
  else if (k == "heads") m.heads = parse_int(k, v);
  else if (k == "ff_dim") m.ff_dim = parse_int(k, v);
  else if (k == "text_layers") m.text_layers = parse_int(k, v);
  else if (k == "text_embed_dim") m.text_embed_dim = parse_int(k, v);
  else if (k == "appearance_dim") m.appearance_dim = parse_int(k, v);
  else if (k == "motion_dim") m.motion_dim = parse_int(k, v);
  else if (k == "scale_per_head") m.scale_per_head = parse_bool(k, v);
  else if (k == "decoder_activation") m.decoder_activation = activation_from_string(v);
  else if (k == "ln_eps") m.ln_eps = parse_double(k, v);
  else if (k == "regime") m.regime = regime_from_string(v);
  else if (k == "answer_count") m.answer_count = parse_int(k, v);
  else if (k == "count_min") m.count_min = parse_int(k, v);
  else if (k == "count_max") m.count_max = parse_int(k, v);
  else if (k == "choices") m.choices = parse_int(k, v);
  else if (k == "fixed_level") m.fixed_level = parse_int(k, v);
  else if (k == "drop_qt") m.drop_qt = parse_bool(k, v);
  else return false;
  return true;
}

bool apply_one_run_key(const std::string& k, const std::string& v, RunConfig& r) {
  if (k == "batch_size") r.batch_size = parse_int(k, v);
  else if (k == "epochs") r.epochs = parse_int(k, v);
  else if (k == "lr") r.lr = parse_double(k, v);
  else if (k == "patience") r.patience = parse_int(k, v);
  else if (k == "seed") r.seed = parse_u64(k, v);
  else if (k == "precision") r.precision = precision_from_string(v);
  else if (k == "scheduler_metric") r.scheduler_metric = scheduler_metric_from_string(v);
  else if (k == "val_fraction") r.val_fraction = parse_double(k, v);
  else if (k == "record_timing") r.record_timing = parse_bool(k, v);
  else if (k == "out_dir") r.out_dir = v;
  else if (k == "manifest") r.manifest = v;
  else if (k == "vocab") r.vocab = v;
  else if (k == "answers") r.answers = v;
  else if (k == "embedding_file") r.embedding_file = v;
  else return false;
  return true;
}

const char* kRunKeys =
    "levels frames_per_segment layers_per_block model_dim heads ff_dim text_layers "
    "text_embed_dim appearance_dim motion_dim scale_per_head decoder_activation ln_eps "
    "regime answer_count count_min count_max choices fixed_level drop_qt batch_size "
    "epochs lr patience seed precision scheduler_metric val_fraction record_timing "
    "out_dir manifest vocab answers embedding_file";

const char* kGenKeys =
    "task size seed out_dir frames appearance_dim motion_dim classes count_max choices "
    "window_levels noise";

}  // namespace

void apply_model_kv(const KvMap& kv, TptConfig& model) {
  for (const auto& [k, v] : kv) {
    require(apply_one_model_key(k, v, model), ErrorKind::Config,
            "unknown model config key '", k, "'");
  }
}

void apply_kv(const KvMap& kv, RunConfig& run) {
  for (const auto& [k, v] : kv) {
    if (apply_one_model_key(k, v, run.model)) continue;
    require(apply_one_run_key(k, v, run), ErrorKind::Config, "unknown config key '", k,
            "'. Valid keys: ", kRunKeys);
  }
}

void apply_kv(const KvMap& kv, GenConfig& gen) {
  for (const auto& [k, v] : kv) {
    if (k == "task") gen.task = task_from_string(v);
    else if (k == "size") gen.size = parse_int(k, v);
    else if (k == "seed") gen.seed = parse_u64(k, v);
    else if (k == "out_dir") gen.out_dir = v;
    else if (k == "frames") gen.frames = parse_int(k, v);
    else if (k == "appearance_dim") gen.appearance_dim = parse_int(k, v);
    else if (k == "motion_dim") gen.motion_dim = parse_int(k, v);
    else if (k == "classes") gen.classes = parse_int(k, v);
    else if (k == "count_max") gen.count_max = parse_int(k, v);
    else if (k == "choices") gen.choices = parse_int(k, v);
    else if (k == "window_levels") gen.window_levels = parse_int(k, v);
    else if (k == "noise") gen.noise = parse_double(k, v);
    else fail(ErrorKind::Config, "unknown gen config key '", k, "'. Valid keys: ", kGenKeys);
  }
}

KvMap to_kv(const TptConfig& m) {
  KvMap kv;
  kv["levels"] = std::to_string(m.levels);
  kv["frames_per_segment"] = std::to_string(m.frames_per_segment);
  kv["layers_per_block"] = std::to_string(m.layers_per_block);
  kv["model_dim"] = std::to_string(m.model_dim);
  kv["heads"] = std::to_string(m.heads);
  kv["ff_dim"] = std::to_string(m.ff_dim);
  kv["text_layers"] = std::to_string(m.text_layers);
  kv["text_embed_dim"] = std::to_string(m.text_embed_dim);
  kv["appearance_dim"] = std::to_string(m.appearance_dim);
  kv["motion_dim"] = std::to_string(m.motion_dim);
  kv["scale_per_head"] = m.scale_per_head ? "true" : "false";
  kv["decoder_activation"] = to_string(m.decoder_activation);
  kv["ln_eps"] = format_double(m.ln_eps);
  kv["regime"] = to_string(m.regime);
  kv["answer_count"] = std::to_string(m.answer_count);
  kv["count_min"] = std::to_string(m.count_min);
  kv["count_max"] = std::to_string(m.count_max);
  kv["choices"] = std::to_string(m.choices);
  kv["fixed_level"] = std::to_string(m.fixed_level);
  kv["drop_qt"] = m.drop_qt ? "true" : "false";
  return kv;
}

KvMap to_kv(const RunConfig& r) {
  KvMap kv = to_kv(r.model);
  kv["batch_size"] = std::to_string(r.batch_size);
  kv["epochs"] = std::to_string(r.epochs);
  kv["lr"] = format_double(r.lr);
  kv["patience"] = std::to_string(r.patience);
  kv["seed"] = std::to_string(r.seed);
  kv["precision"] = to_string(r.precision);
  kv["scheduler_metric"] = to_string(r.scheduler_metric);
  kv["val_fraction"] = format_double(r.val_fraction);
  kv["record_timing"] = r.record_timing ? "true" : "false";
  kv["out_dir"] = r.out_dir;
  kv["manifest"] = r.manifest;
  kv["vocab"] = r.vocab;
  kv["answers"] = r.answers;
  kv["embedding_file"] = r.embedding_file;
  return kv;
}

KvMap to_kv(const GenConfig& g) {
  KvMap kv;
  kv["task"] = to_string(g.task);
  kv["size"] = std::to_string(g.size);
  kv["seed"] = std::to_string(g.seed);
  kv["out_dir"] = g.out_dir;
  kv["frames"] = std::to_string(g.frames);
  kv["appearance_dim"] = std::to_string(g.appearance_dim);
  kv["motion_dim"] = std::to_string(g.motion_dim);
  kv["classes"] = std::to_string(g.classes);
  kv["count_max"] = std::to_string(g.count_max);
  kv["choices"] = std::to_string(g.choices);
  kv["window_levels"] = std::to_string(g.window_levels);
  kv["noise"] = format_double(g.noise);
  return kv;
}

void validate(const TptConfig& c) {
  require(c.levels >= 1, ErrorKind::Config, "levels must be >= 1, got ", c.levels);
  require(c.frames_per_segment >= 1, ErrorKind::Config, "frames_per_segment must be >= 1, got ",
          c.frames_per_segment);
  require(c.layers_per_block >= 1, ErrorKind::Config, "layers_per_block must be >= 1, got ",
          c.layers_per_block);
  require(c.model_dim >= 1 && c.heads >= 1, ErrorKind::Config, "model_dim and heads must be >= 1");
  require(c.model_dim % c.heads == 0, ErrorKind::Config, "model_dim ", c.model_dim,
          " is not divisible by heads ", c.heads);
  require(c.ff_dim >= 1, ErrorKind::Config, "ff_dim must be >= 1, got ", c.ff_dim);
  require(c.text_layers >= 1, ErrorKind::Config, "text_layers must be >= 1, got ", c.text_layers);
  require(c.text_embed_dim >= 1 && c.appearance_dim >= 1 && c.motion_dim >= 1, ErrorKind::Config,
          "embedding/appearance/motion dims must be >= 1");
  require(c.ln_eps > 0, ErrorKind::Config, "ln_eps must be positive");
  require(c.count_min <= c.count_max, ErrorKind::Config, "count_min ", c.count_min,
          " exceeds count_max ", c.count_max);
  require(c.fixed_level >= 0 && c.fixed_level <= c.levels, ErrorKind::Config, "fixed_level ",
          c.fixed_level, " outside [0, ", c.levels, "]");
  if (c.regime == Regime::OpenEnded) {
    require(c.answer_count == 0 || c.answer_count >= 2, ErrorKind::Config,
            "answer_count must be >= 2 for open-ended, got ", c.answer_count);
  }
  if (c.regime == Regime::MultiChoice) {
    require(c.choices == 0 || c.choices >= 2, ErrorKind::Config,
            "choices must be >= 2 for multi-choice, got ", c.choices);
  }
}

void validate(const RunConfig& r) {
  validate(r.model);
  require(r.batch_size >= 1, ErrorKind::Config, "batch_size must be >= 1, got ", r.batch_size);
  require(r.epochs >= 1, ErrorKind::Config, "epochs must be >= 1, got ", r.epochs);
  require(r.lr > 0, ErrorKind::Config, "lr must be positive, got ", r.lr);
  require(r.patience >= 1, ErrorKind::Config, "patience must be >= 1, got ", r.patience);
  require(r.val_fraction >= 0.0 && r.val_fraction < 1.0, ErrorKind::Config,
          "val_fraction must lie in [0, 1), got ", r.val_fraction);
}

void validate(const GenConfig& g) {
  require(g.size >= 1, ErrorKind::Config, "size must be >= 1, got ", g.size);
  require(g.frames >= 1, ErrorKind::Config, "frames must be >= 1, got ", g.frames);
  require(g.appearance_dim >= 1 && g.motion_dim >= 1, ErrorKind::Config,
          "feature dims must be >= 1");
  require(g.classes >= 2, ErrorKind::Config, "classes must be >= 2, got ", g.classes);
  require(g.count_max >= 1, ErrorKind::Config, "count_max must be >= 1, got ", g.count_max);
  require(g.choices >= 2, ErrorKind::Config, "choices must be >= 2, got ", g.choices);
  require(g.window_levels >= 1, ErrorKind::Config, "window_levels must be >= 1, got ",
          g.window_levels);
  require(g.noise >= 0.0, ErrorKind::Config, "noise must be >= 0, got ", g.noise);
  require(g.out_dir.empty() == false, ErrorKind::Config, "gen requires an output directory");
}

TptConfig desk_model_config() {
  TptConfig c;
  c.levels = 2;
  c.frames_per_segment = 4;
  c.layers_per_block = 1;
  c.model_dim = 32;
  c.heads = 4;
  c.ff_dim = 64;
  c.text_layers = 1;
  c.text_embed_dim = 16;
  c.appearance_dim = 16;
  c.motion_dim = 16;
  return c;
}

TptConfig paper_model_config() { return TptConfig{}; }

RunConfig desk_run_config() {
  RunConfig r;
  r.model = desk_model_config();
  r.batch_size = 8;
  r.epochs = 10;
  return r;
}

}  // namespace tpt
