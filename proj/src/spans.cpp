#include "tpt/spans.hpp"

#include "tpt/errors.hpp"

namespace tpt {

std::vector<Span> segment_spans(int frames, int level) {
  require(frames >= 1, ErrorKind::Config, "segment_spans: frames must be >= 1, got ", frames);
  require(level >= 1, ErrorKind::Config, "segment_spans: level must be >= 1, got ", level);
  std::vector<Span> spans{Span{0, frames}};
  for (int l = 1; l < level; ++l) {
    std::vector<Span> next;
    next.reserve(spans.size() * 2);
    for (const Span& s : spans) {
      if (s.length() <= 1) {
        next.push_back(s);
        next.push_back(s);
      } else {
        const int mid = s.begin + s.length() / 2;
        next.push_back(Span{s.begin, mid});
        next.push_back(Span{mid, s.end});
      }
    }
    spans = std::move(next);
  }
  return spans;
}

std::vector<int> sample_indices(const Span& span, int per_segment) {
  require(per_segment >= 1, ErrorKind::Config, "sample_indices: per_segment must be >= 1, got ",
          per_segment);
  require(span.length() >= 1, ErrorKind::Config, "sample_indices: empty span [", span.begin, ",",
          span.end, ")");
  std::vector<int> idx(static_cast<std::size_t>(per_segment));
  const long long len = span.length();
  for (int j = 0; j < per_segment; ++j) {
    idx[static_cast<std::size_t>(j)] =
        span.begin + static_cast<int>((static_cast<long long>(j) * len) / per_segment);
  }
  return idx;
}

std::vector<std::vector<int>> segment_video(int frames, int level, int per_segment) {
  std::vector<std::vector<int>> out;
  for (const Span& s : segment_spans(frames, level)) {
    out.push_back(sample_indices(s, per_segment));
  }
  return out;
}

}  // namespace tpt
