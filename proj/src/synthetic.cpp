#include "tpt/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tpt/errors.hpp"
#include "tpt/features.hpp"
#include "tpt/rng.hpp"
#include "tpt/vocab.hpp"

namespace tpt {

namespace {

const char* kColorWords[] = {"red",    "green", "blue", "yellow",
                             "purple", "orange", "teal", "pink"};
const char* kShapeWords[] = {"circle", "square", "triangle", "star",
                             "ring",   "cross",  "arrow",    "wave"};
const char* kEventWords[] = {"clap", "jump", "spin", "bounce",
                             "fall", "kick", "push", "nod"};

std::string indexed_word(const char* const* list, int list_size, const char* prefix, int i) {
  if (i < list_size) return list[i];
  return prefix + std::to_string(i);
}

std::string color_word(int i) { return indexed_word(kColorWords, 8, "color", i); }
std::string shape_word(int i) { return indexed_word(kShapeWords, 8, "shape", i); }
std::string event_word(int i) { return indexed_word(kEventWords, 8, "event", i); }

float noise(Rng& rng, double sigma) { return static_cast<float>(rng.normal(0.0, sigma)); }

Mat<float> noise_mat(Rng& rng, int rows, int cols, double sigma) {
  Mat<float> m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = noise(rng, sigma);
  return m;
}

// All bisection windows the pyramid can request, for levels 1..window_levels.
std::vector<Span> all_windows(int frames, int window_levels) {
  std::set<std::pair<int, int>> seen;
  std::vector<Span> out;
  for (int level = 1; level <= window_levels; ++level) {
    for (const Span& s : segment_spans(frames, level)) {
      if (seen.insert({s.begin, s.end}).second) out.push_back(s);
    }
  }
  return out;
}

std::string video_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "vid_%04d.tptf", i);
  return buf;
}

struct Example {
  Mat<float> frames;                  // F x D_a
  std::vector<MotionWindow> windows;  // one per bisection window
  ManifestRecord record;              // video name filled by the caller
};

// Fills every window with noise, then lets `signal` overwrite coordinates.
template <class SignalFn>
std::vector<MotionWindow> make_windows(Rng& rng, const GenConfig& cfg, SignalFn&& signal) {
  std::vector<MotionWindow> out;
  for (const Span& s : all_windows(cfg.frames, cfg.window_levels)) {
    MotionWindow w;
    w.window = s;
    w.vec.resize(static_cast<std::size_t>(cfg.motion_dim));
    for (float& v : w.vec) v = noise(rng, cfg.noise);
    signal(w);
    out.push_back(std::move(w));
  }
  return out;
}

// --- scale-count ---------------------------------------------------------
// k marked frames, k uniform on [0, count_max]. Frame coordinate 0 is the
// marker; every motion window only says whether the window holds any marker.

Example gen_scale_count(Rng& rng, const GenConfig& cfg, const Vocab& vocab) {
  require(cfg.frames >= cfg.count_max, ErrorKind::Config, "scale-count needs frames >= count_max (",
          cfg.frames, " < ", cfg.count_max, ")");
  int k = rng.int_range(0, cfg.count_max);

  std::vector<bool> marked(static_cast<std::size_t>(cfg.frames), false);
  for (int f : rng.sample_distinct(cfg.frames, k)) marked[static_cast<std::size_t>(f)] = true;

  Example ex;
  ex.frames = noise_mat(rng, cfg.frames, cfg.appearance_dim, cfg.noise);
  for (int f = 0; f < cfg.frames; ++f)
    ex.frames(f, 0) = marked[static_cast<std::size_t>(f)] ? 1.0f : 0.0f;

  ex.windows = make_windows(rng, cfg, [&](MotionWindow& w) {
    bool any = false;
    for (int f = w.window.begin; f < w.window.end; ++f)
      any = any || marked[static_cast<std::size_t>(f)];
    w.vec[0] = any ? 1.0f : 0.0f;
  });

  ex.record.question = vocab.encode("how many flashes");
  ex.record.regime = Regime::Count;
  ex.record.target = k;
  return ex;
}

// --- global-class ----------------------------------------------------------
// Color one-hot on coordinates [0, C), shape one-hot on [C, 2C), constant in
// time. The question picks the attribute; the answer id indexes answers.txt
// (colors first, then shapes).

Example gen_global_class(Rng& rng, const GenConfig& cfg, const Vocab& vocab) {
  const int C = cfg.classes;
  require(cfg.appearance_dim >= 2 * C, ErrorKind::Config,
          "global-class needs appearance_dim >= 2*classes (", cfg.appearance_dim, " < ", 2 * C,
          ")");
  int color = rng.int_range(0, C - 1);
  int shape = rng.int_range(0, C - 1);
  bool ask_color = rng.int_range(0, 1) == 0;

  Example ex;
  ex.frames = noise_mat(rng, cfg.frames, cfg.appearance_dim, cfg.noise);
  for (int f = 0; f < cfg.frames; ++f) {
    ex.frames(f, color) += 1.0f;
    ex.frames(f, C + shape) += 1.0f;
  }
  ex.windows = make_windows(rng, cfg, [](MotionWindow&) {});

  ex.record.question = vocab.encode(ask_color ? "what color is it" : "what shape is it");
  ex.record.regime = Regime::OpenEnded;
  ex.record.target = ask_color ? color : C + shape;
  return ex;
}

// --- transition -------------------------------------------------------------
// Event `first` fills frames [0, F/2), event `second` fills the rest, one-hot
// on coordinates [0, C). The question asks "which event came first" or
// "... last"; the two candidates name the two events, in random order. The
// text stream is permutation-invariant (no positional encoding), so every
// text fact must survive pooling: each candidate is a single event word, and
// the temporal direction rides in the question. Motion windows carry
// per-event presence flags, so halves (and finer windows) resolve the order
// while the whole-video window sees both events and cannot.

Example gen_transition(Rng& rng, const GenConfig& cfg, const Vocab& vocab) {
  const int C = cfg.classes;
  require(cfg.frames >= 2, ErrorKind::Config, "transition needs frames >= 2");
  require(cfg.appearance_dim >= C && cfg.motion_dim >= C, ErrorKind::Config,
          "transition needs appearance_dim and motion_dim >= classes");
  require(cfg.choices == 2, ErrorKind::Config,
          "transition generates exactly 2 candidates; set choices=2 (got ", cfg.choices, ")");

  int a = rng.int_range(0, C - 1);
  int b = rng.int_range(0, C - 1);
  while (b == a) b = rng.int_range(0, C - 1);
  bool a_first = rng.int_range(0, 1) == 0;
  bool ask_first = rng.int_range(0, 1) == 0;
  int first = a_first ? a : b;
  int second = a_first ? b : a;

  Example ex;
  ex.frames = noise_mat(rng, cfg.frames, cfg.appearance_dim, cfg.noise);
  const int half = cfg.frames / 2;
  for (int f = 0; f < cfg.frames; ++f) ex.frames(f, f < half ? first : second) += 1.0f;

  ex.windows = make_windows(rng, cfg, [&](MotionWindow& w) {
    bool has_first = w.window.begin < half;
    bool has_second = w.window.end > half;
    w.vec[static_cast<std::size_t>(first)] = has_first ? 1.0f : 0.0f;
    if (second != first) w.vec[static_cast<std::size_t>(second)] = has_second ? 1.0f : 0.0f;
  });

  ex.record.question =
      vocab.encode(ask_first ? "which event came first" : "which event came last");
  ex.record.regime = Regime::MultiChoice;
  ex.record.candidates = {vocab.encode(event_word(a)), vocab.encode(event_word(b))};
  const int asked = ask_first ? first : second;
  ex.record.target = asked == a ? 0 : 1;
  return ex;
}

// --- frame-class ----------------------------------------------------------
// One frame carries a one-hot event code on coordinates [0, C); everything
// else is noise. Motion windows repeat the code only where they contain the
// event frame.

Example gen_frame_class(Rng& rng, const GenConfig& cfg, const Vocab& vocab) {
  const int C = cfg.classes;
  require(cfg.appearance_dim >= C && cfg.motion_dim >= C, ErrorKind::Config,
          "frame-class needs appearance_dim and motion_dim >= classes");
  int cls = rng.int_range(0, C - 1);
  int where = rng.int_range(0, cfg.frames - 1);

  Example ex;
  ex.frames = noise_mat(rng, cfg.frames, cfg.appearance_dim, cfg.noise);
  ex.frames(where, cls) += 1.0f;

  ex.windows = make_windows(rng, cfg, [&](MotionWindow& w) {
    bool inside = w.window.begin <= where && where < w.window.end;
    w.vec[static_cast<std::size_t>(cls)] = inside ? 1.0f : 0.0f;
  });

  ex.record.question = vocab.encode("what happened");
  ex.record.regime = Regime::OpenEnded;
  ex.record.target = cls;
  return ex;
}

// Every word a task's questions, candidates, or answers can use, in a fixed
// order so the vocabulary (and so every token id) is reproducible.
std::vector<std::string> task_words(const GenConfig& cfg) {
  std::vector<std::string> words;
  auto add = [&](const std::string& text) {
    for (const std::string& w : tokenize(text)) words.push_back(w);
  };
  switch (cfg.task) {
    case Task::ScaleCount:
      add("how many flashes");
      break;
    case Task::GlobalClass:
      add("what color is it");
      add("what shape is it");
      for (int i = 0; i < cfg.classes; ++i) add(color_word(i));
      for (int i = 0; i < cfg.classes; ++i) add(shape_word(i));
      break;
    case Task::Transition:
      add("which event came first");
      add("last");
      for (int i = 0; i < cfg.classes; ++i) add(event_word(i));
      break;
    case Task::FrameClass:
      add("what happened");
      for (int i = 0; i < cfg.classes; ++i) add(event_word(i));
      break;
  }
  return words;
}

std::vector<std::string> task_answers(const GenConfig& cfg) {
  std::vector<std::string> answers;
  switch (cfg.task) {
    case Task::GlobalClass:
      for (int i = 0; i < cfg.classes; ++i) answers.push_back(color_word(i));
      for (int i = 0; i < cfg.classes; ++i) answers.push_back(shape_word(i));
      break;
    case Task::FrameClass:
      for (int i = 0; i < cfg.classes; ++i) answers.push_back(event_word(i));
      break;
    default:
      break;
  }
  return answers;
}

}  // namespace

std::vector<std::string> load_answers(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Data, "cannot open answer file '", path, "'");
  std::vector<std::string> answers;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(!line.empty(), ErrorKind::Data, path, ":", lineno, ": blank answer line");
    require(line.find(' ') == std::string::npos && line.find('\t') == std::string::npos,
            ErrorKind::Data, path, ":", lineno, ": answer '", line, "' contains whitespace");
    require(seen.insert(line).second, ErrorKind::Data, path, ":", lineno, ": duplicate answer '",
            line, "'");
    answers.push_back(line);
  }
  require(!answers.empty(), ErrorKind::Data, path, ": no answers");
  return answers;
}

void save_answers(const std::string& path, const std::vector<std::string>& answers) {
  require(!answers.empty(), ErrorKind::Data, "refusing to write an empty answer file");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Data, "cannot open '", path, "' for writing");
  for (const std::string& a : answers) out << a << '\n';
  require(out.good(), ErrorKind::Data, "write failure on '", path, "'");
}

GeneratedDataset gen_synthetic(const GenConfig& cfg) {
  validate(cfg);
  std::filesystem::create_directories(cfg.out_dir);

  Vocab vocab = Vocab::from_tokens(task_words(cfg));
  std::vector<std::string> answers = task_answers(cfg);

  GeneratedDataset out;
  out.dir = cfg.out_dir;
  out.manifest = (std::filesystem::path(cfg.out_dir) / "manifest.txt").string();
  out.vocab = (std::filesystem::path(cfg.out_dir) / "vocab.txt").string();
  out.answer_count = static_cast<int>(answers.size());

  Rng rng(cfg.seed);
  for (int i = 0; i < cfg.size; ++i) {
    Example ex;
    switch (cfg.task) {
      case Task::ScaleCount: ex = gen_scale_count(rng, cfg, vocab); break;
      case Task::GlobalClass: ex = gen_global_class(rng, cfg, vocab); break;
      case Task::Transition: ex = gen_transition(rng, cfg, vocab); break;
      case Task::FrameClass: ex = gen_frame_class(rng, cfg, vocab); break;
    }
    ex.record.video = video_name(i);
    write_feature_file((std::filesystem::path(cfg.out_dir) / ex.record.video).string(), ex.frames,
                       cfg.motion_dim, ex.windows);
    out.records.push_back(std::move(ex.record));
  }

  vocab.save(out.vocab);
  save_manifest(out.manifest, out.records);
  if (!answers.empty()) {
    out.answers = (std::filesystem::path(cfg.out_dir) / "answers.txt").string();
    save_answers(out.answers, answers);
  }

  // Record the settings next to the data, minus the output location itself,
  // so identically configured datasets are byte-identical wherever they live.
  KvMap kv = to_kv(cfg);
  kv.erase("out_dir");
  std::ofstream gen_file((std::filesystem::path(cfg.out_dir) / "gen.txt").string(),
                         std::ios::binary);
  gen_file << serialize_kv(kv);
  return out;
}

}  // namespace tpt
