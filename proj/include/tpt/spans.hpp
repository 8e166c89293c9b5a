#pragma once

#include <vector>

namespace tpt {

// Half-open frame window [begin, end).
struct Span {
  int begin = 0;
  int end = 0;
  int length() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

// Number of windows at a pyramid level.
inline int segment_count(int level) { return 1 << (level - 1); }

// Tokens a level contributes downstream: per segment, `per_segment` frame
// tokens plus one motion token.
inline int level_token_count(int per_segment, int level) {
  return segment_count(level) * (per_segment + 1);
}

// The 2^(level-1) contiguous windows covering a video of `frames` frames,
// in temporal order. Windows are produced by repeated bisection so that
// every window at level n is exactly the union of its two children at
// level n+1 (a single-frame window duplicates into two copies of itself).
std::vector<Span> segment_spans(int frames, int level);

// `per_segment` frame indices sampled from the span at uniform stride,
// non-decreasing, with nearest-frame duplication when the span is short.
std::vector<int> sample_indices(const Span& span, int per_segment);

// Convenience composition of the two: per-segment index lists for one level.
std::vector<std::vector<int>> segment_video(int frames, int level, int per_segment);

}  // namespace tpt
