#pragma once

#include "tempattn/tensor.hpp"

namespace tempattn::data {

// Procedural H x H x 3 texture in [0, 1]: stripes, checkerboards, linear
// gradients, or soft blobs, fully determined by the seed.
Tensor make_texture(Index size, std::uint64_t seed);

// Horizontal mirror (used for flip augmentation).
Tensor flip_horizontal(const Tensor& image);

// An indexed, seeded collection of textures. image(i) is a pure function of
// (seed, i), so the set never needs to be materialized.
struct ToyDataset {
  Index count = 0;
  Index image_size = 32;
  std::uint64_t seed = 0;

  Tensor image(Index i) const;
};

}  // namespace tempattn::data
