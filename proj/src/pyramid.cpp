#include "tpt/pyramid.hpp"

namespace tpt {

ExtractedLevel extract_level(const RawVideoFeatures& raw, int level, int per_segment) {
  require(raw.frame_count() >= 1, ErrorKind::Data, "extract_level: video has no frames");
  require(static_cast<bool>(raw.motion_fn), ErrorKind::Data,
          "extract_level: missing motion provider");
  ExtractedLevel out;
  out.spans = segment_spans(raw.frame_count(), level);
  out.motion.resize(static_cast<Eigen::Index>(out.spans.size()), raw.motion_dim);
  for (std::size_t s = 0; s < out.spans.size(); ++s) {
    const Span& span = out.spans[s];
    const std::vector<int> idx = sample_indices(span, per_segment);
    Mat<float> seg(per_segment, raw.frame_features.cols());
    for (int j = 0; j < per_segment; ++j) {
      seg.row(j) = raw.frame_features.row(idx[static_cast<std::size_t>(j)]);
    }
    out.appearance.push_back(std::move(seg));

    const std::vector<float> m = raw.motion_fn(span);
    require(static_cast<int>(m.size()) == raw.motion_dim, ErrorKind::Data,
            "extract_level: motion provider returned ", m.size(), " values for window [",
            span.begin, ",", span.end, "), expected ", raw.motion_dim);
    for (int j = 0; j < raw.motion_dim; ++j) {
      out.motion(static_cast<Eigen::Index>(s), j) = m[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

}  // namespace tpt
