#pragma once

#include <string>
#include <vector>

#include "tpt/config.hpp"
#include "tpt/tensor.hpp"

namespace tpt {

// On-disk parameter container: a versioned binary file holding the flat
// configuration the parameters were built under, followed by every tensor as
// (hierarchical name, shape, row-major 32-bit little-endian values). Names
// follow the construction scheme, e.g. "qt.level2.layer0.mma.w_q".
struct NamedTensor {
  std::string name;
  Mat<float> value;
};

struct Checkpoint {
  KvMap config;
  std::vector<NamedTensor> tensors;  // file order == registry order at save time
};

void save_checkpoint(const std::string& path, const KvMap& config,
                     const std::vector<Parameter<float>*>& params);

Checkpoint load_checkpoint(const std::string& path);

// Writes the checkpoint's tensors into an existing registry. Every parameter
// must be matched by name with an identical shape, and the checkpoint must
// not carry extra tensors — partial loads are refused.
void apply_checkpoint(const Checkpoint& ckpt, const std::vector<Parameter<float>*>& params);

}  // namespace tpt
