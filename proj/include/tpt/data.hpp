#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "tpt/config.hpp"

namespace tpt {

// ---- dataset manifest -------------------------------------------------------
// One example per line, written as space-separated `key=value` fields:
//
//   video=vid_0000.tptf question=2,7,9 regime=open-ended target=3
//   video=vid_0001.tptf question=2,4 regime=multi-choice target=1 candidates=5,6|7,8
//
// `question` and each `candidates` entry are comma-separated token ids;
// candidate lists are separated by '|'. Video paths are relative to the
// manifest's directory. '#' starts a comment line.

struct ManifestRecord {
  std::string video;
  std::vector<int> question;
  Regime regime = Regime::OpenEnded;
  int target = 0;
  std::vector<std::vector<int>> candidates;  // multi-choice only
};

struct Manifest {
  std::string dir;  // directory the manifest was loaded from
  std::vector<ManifestRecord> records;
};

void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Parses, validates each record (targets in range, candidate lists present
// exactly for multi-choice), and checks every referenced video file exists.
Manifest load_manifest(const std::string& path);

// Absolute-ish path of a record's feature file (manifest dir + relative name).
std::string resolve_video(const Manifest& m, const ManifestRecord& r);

// ---- metrics CSV --------------------------------------------------------------
// Header: epoch,split,loss,accuracy,mse,lr,seconds — preceded by `# seed=N`.
// Classification rows report exact-match accuracy and 0 for mse; count rows
// report the rounded exact-match rate as accuracy plus the raw-output mse.

struct MetricsRow {
  int epoch = 0;
  std::string split;  // "train" | "val"
  double loss = 0.0;
  double accuracy = 0.0;
  double mse = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, std::uint64_t seed);
  void append(const MetricsRow& row);  // flushed immediately

 private:
  std::ofstream out_;
  std::string path_;
};

struct MetricsFile {
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
};

MetricsFile read_metrics(const std::string& path);

}  // namespace tpt
