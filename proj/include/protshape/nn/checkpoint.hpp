// Versioned binary checkpoint shared by both trainable models.
//
// Layout (all integers and floats little-endian):
//   magic "GVAE" | u32 version | u64 entry count |
//   entries: u32 name length, UTF-8 name, u32 rank, u64 dims..., f64 values.
// Readers reject unknown versions.

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "protshape/nn/tensor.hpp"

namespace protshape::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::map<std::string, Tensor>& tensors);

// Throws BadCheckpoint on bad magic, unknown version or truncation.
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

}  // namespace protshape::nn
