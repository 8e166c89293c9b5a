#include "tpt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>

#include "tpt/binary_io.hpp"
#include "tpt/errors.hpp"

namespace tpt {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

using binio::get_f32;
using binio::get_string;
using binio::get_u32;
using binio::put_f32;
using binio::put_string;
using binio::put_u32;

}  // namespace

void save_checkpoint(const std::string& path, const KvMap& config,
                     const std::vector<Parameter<float>*>& params) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Data, "cannot open '", path, "' for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_string(out, serialize_kv(config));
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter<float>* p : params) {
    require(p != nullptr, ErrorKind::Usage, "save_checkpoint: null parameter in registry");
    put_string(out, p->name);
    put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) put_f32(out, p->value(i, j));
    }
  }
  require(out.good(), ErrorKind::Data, "write failure on '", path, "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Data, "cannot open checkpoint '", path, "'");
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0, ErrorKind::Data, path,
          ": not a checkpoint file (bad magic)");
  const std::uint32_t version = get_u32(in, path, "version");
  require(version == kVersion, ErrorKind::Data, path, ": unsupported version ", version);

  Checkpoint ckpt;
  ckpt.config = parse_kv_text(get_string(in, path, "config block"), path + " (embedded config)");
  const std::uint32_t count = get_u32(in, path, "tensor count");
  ckpt.tensors.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = get_string(in, path, "tensor name");
    require(!nt.name.empty(), ErrorKind::Data, path, ": unnamed tensor at index ", t);
    const std::uint32_t rows = get_u32(in, path, "tensor rows");
    const std::uint32_t cols = get_u32(in, path, "tensor cols");
    nt.value.resize(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) nt.value(i, j) = get_f32(in, path, nt.name.c_str());
    }
    require(all_finite(nt.value), ErrorKind::Data, path, ": non-finite values in tensor '",
            nt.name, "'");
    ckpt.tensors.push_back(std::move(nt));
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, const std::vector<Parameter<float>*>& params) {
  std::unordered_map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& nt : ckpt.tensors) {
    require(by_name.emplace(nt.name, &nt).second, ErrorKind::Data,
            "apply_checkpoint: duplicate tensor '", nt.name, "'");
  }
  require(ckpt.tensors.size() == params.size(), ErrorKind::Data,
          "apply_checkpoint: checkpoint holds ", ckpt.tensors.size(), " tensors but the model has ",
          params.size(), " parameters");
  for (Parameter<float>* p : params) {
    auto it = by_name.find(p->name);
    require(it != by_name.end(), ErrorKind::Data, "apply_checkpoint: no tensor for parameter '",
            p->name, "'");
    const Mat<float>& v = it->second->value;
    require(v.rows() == p->value.rows() && v.cols() == p->value.cols(), ErrorKind::Shape,
            "apply_checkpoint: '", p->name, "' is ", v.rows(), "x", v.cols(),
            " in the checkpoint but ", p->value.rows(), "x", p->value.cols(), " in the model");
    p->value = v;
  }
}

}  // namespace tpt
