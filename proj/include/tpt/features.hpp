#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tpt/spans.hpp"
#include "tpt/tensor.hpp"

namespace tpt {

// Per-video inputs as produced by an (external) feature extractor: one
// appearance vector per frame plus a provider that yields one motion vector
// for any frame window it was built for.
struct RawVideoFeatures {
  Mat<float> frame_features;  // F x D_a
  int motion_dim = 0;         // D_m
  std::function<std::vector<float>(const Span&)> motion_fn;

  int frame_count() const { return static_cast<int>(frame_features.rows()); }
  int appearance_dim() const { return static_cast<int>(frame_features.cols()); }
};

// One precomputed motion vector per window.
struct MotionWindow {
  Span window;
  std::vector<float> vec;
};

// Binary feature file, little-endian:
//   magic "TPTF", version u32,
//   frame_count u32, appearance_dim u32, frame_count*appearance_dim f32,
//   motion_dim u32, window_count u32,
//   per window: start u32, end u32, motion_dim f32.
void write_feature_file(const std::string& path, const Mat<float>& frame_features,
                        int motion_dim, const std::vector<MotionWindow>& windows);

// Loads the file into a RawVideoFeatures whose motion_fn serves exactly the
// windows stored in the file; an unlisted window is a data error.
RawVideoFeatures read_feature_file(const std::string& path);

}  // namespace tpt
