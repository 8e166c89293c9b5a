#pragma once

#include <string>
#include <vector>

#include "tpt/config.hpp"
#include "tpt/data.hpp"

namespace tpt {

// Paths and summary of one generated dataset directory.
struct GeneratedDataset {
  std::string dir;
  std::string manifest;  // <dir>/manifest.txt
  std::string vocab;     // <dir>/vocab.txt
  std::string answers;   // <dir>/answers.txt; empty for count and multi-choice tasks
  int answer_count = 0;  // open-ended answer classes; 0 otherwise
  std::vector<ManifestRecord> records;
};

// Writes a complete synthetic dataset into cfg.out_dir: one feature file per
// example (vid_NNNN.tptf), manifest.txt, vocab.txt, answers.txt for
// open-ended tasks, and gen.txt recording the generation settings. The output
// is a deterministic function of cfg (same settings -> byte-identical tree).
//
// Tasks:
//   scale-count  (count)        The video flashes a marker in k of its frames
//                               and the answer is k. Frame features carry the
//                               per-frame marker; every motion window carries
//                               only a saturating present/absent flag, so the
//                               count is recoverable exactly from fine frame
//                               coverage but not from any single coarse view.
//   global-class (open-ended)   Two attributes (a color and a shape) are
//                               encoded on disjoint feature coordinates,
//                               constant across frames. The question selects
//                               which attribute to report, so the text stream
//                               carries necessary information.
//   transition   (multi-choice) Two events occupy the first and second half
//                               of the video. The question asks which event
//                               came first (or last) and the two candidates
//                               name the two events. Half-video motion
//                               windows resolve the order; the whole-video
//                               window does not.
//   frame-class  (open-ended)   A single frame carries a one-hot event code;
//                               all other frames are noise. Motion windows
//                               flag the event class only where the window
//                               contains that frame.
GeneratedDataset gen_synthetic(const GenConfig& cfg);

// One answer token per line, id = line index. Rejects empty files, blank
// lines, internal whitespace, and duplicates.
std::vector<std::string> load_answers(const std::string& path);
void save_answers(const std::string& path, const std::vector<std::string>& answers);

}  // namespace tpt
