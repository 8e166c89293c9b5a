#include "tpt/features.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>

#include "tpt/binary_io.hpp"
#include "tpt/errors.hpp"

namespace tpt {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'T', 'F'};
constexpr std::uint32_t kVersion = 1;

using binio::get_f32;
using binio::get_u32;
using binio::put_f32;
using binio::put_u32;

}  // namespace

void write_feature_file(const std::string& path, const Mat<float>& frame_features,
                        int motion_dim, const std::vector<MotionWindow>& windows) {
  require(frame_features.rows() >= 1, ErrorKind::Data, "write_feature_file: no frames");
  require(motion_dim >= 1, ErrorKind::Data, "write_feature_file: motion_dim must be >= 1");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Data, "cannot open '", path, "' for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(frame_features.rows()));
  put_u32(out, static_cast<std::uint32_t>(frame_features.cols()));
  for (Eigen::Index i = 0; i < frame_features.rows(); ++i) {
    for (Eigen::Index j = 0; j < frame_features.cols(); ++j) put_f32(out, frame_features(i, j));
  }
  put_u32(out, static_cast<std::uint32_t>(motion_dim));
  put_u32(out, static_cast<std::uint32_t>(windows.size()));
  for (const MotionWindow& w : windows) {
    require(static_cast<int>(w.vec.size()) == motion_dim, ErrorKind::Data,
            "write_feature_file: window [", w.window.begin, ",", w.window.end, ") has ",
            w.vec.size(), " values, expected ", motion_dim);
    put_u32(out, static_cast<std::uint32_t>(w.window.begin));
    put_u32(out, static_cast<std::uint32_t>(w.window.end));
    for (float v : w.vec) put_f32(out, v);
  }
  require(out.good(), ErrorKind::Data, "write failure on '", path, "'");
}

RawVideoFeatures read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Data, "cannot open feature file '", path, "'");
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0, ErrorKind::Data, path,
          ": not a feature file (bad magic)");
  const std::uint32_t version = get_u32(in, path, "version");
  require(version == kVersion, ErrorKind::Data, path, ": unsupported version ", version);
  const std::uint32_t frames = get_u32(in, path, "frame count");
  const std::uint32_t d_a = get_u32(in, path, "appearance dim");
  require(frames >= 1 && d_a >= 1, ErrorKind::Data, path, ": empty frame matrix");

  RawVideoFeatures raw;
  raw.frame_features.resize(frames, d_a);
  for (std::uint32_t i = 0; i < frames; ++i) {
    for (std::uint32_t j = 0; j < d_a; ++j) {
      raw.frame_features(i, j) = get_f32(in, path, "frame features");
    }
  }
  require(all_finite(raw.frame_features), ErrorKind::Data, path,
          ": non-finite frame feature values");

  const std::uint32_t d_m = get_u32(in, path, "motion dim");
  const std::uint32_t window_count = get_u32(in, path, "window count");
  raw.motion_dim = static_cast<int>(d_m);

  auto bank = std::make_shared<std::map<std::pair<int, int>, std::vector<float>>>();
  for (std::uint32_t w = 0; w < window_count; ++w) {
    const int begin = static_cast<int>(get_u32(in, path, "window start"));
    const int end = static_cast<int>(get_u32(in, path, "window end"));
    std::vector<float> vec(d_m);
    for (std::uint32_t j = 0; j < d_m; ++j) vec[j] = get_f32(in, path, "motion values");
    for (float v : vec) {
      require(std::isfinite(v), ErrorKind::Data, path, ": non-finite motion value in window [",
              begin, ",", end, ")");
    }
    (*bank)[{begin, end}] = std::move(vec);
  }
  raw.motion_fn = [bank, path](const Span& s) {
    auto it = bank->find({s.begin, s.end});
    require(it != bank->end(), ErrorKind::Data, path, ": no motion vector stored for window [",
            s.begin, ",", s.end, ") — regenerate features with enough window levels");
    return it->second;
  };
  return raw;
}

}  // namespace tpt
