#pragma once

#include "tempattn/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace tempattn::ckpt {

// On-disk snapshot: "MHTM" magic, format version, step counter, RNG state
// string, then ordered named fp64 tensors (name length/bytes, dtype code,
// rank, dims, little-endian payload). Round trips are bit-exact.
struct CheckpointData {
  std::uint64_t step = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// Copy loaded values onto existing named tensors. Every destination name
// must be present with a matching shape; mismatches raise ConfigError
// (incompatible architecture), missing files IoError.
void restore_named(const std::vector<std::pair<std::string, Tensor>>& dst,
                   const CheckpointData& src);

}  // namespace tempattn::ckpt
