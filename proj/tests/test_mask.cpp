#include "tempattn/mask.hpp"

#include "doctest.h"

#include <algorithm>

using namespace tempattn;
using namespace tempattn::maskgen;

TEST_CASE("mask generation is deterministic in the seed") {
  MaskImage a = generate_freeform_mask(64, 64, 42);
  MaskImage b = generate_freeform_mask(64, 64, 42);
  MaskImage c = generate_freeform_mask(64, 64, 43);
  CHECK(a.v == b.v);
  CHECK(a.v != c.v);
  CHECK(a.missing_count() > 0);
}

TEST_CASE("mask generation rejects tiny images") {
  CHECK_THROWS_AS(generate_freeform_mask(8, 64, 1), ConfigError);
  CHECK_THROWS_AS(generate_freeform_mask(64, 15, 1), ConfigError);
}

TEST_CASE("every mask contains the scaled square patch") {
  // At the 256 reference size the square is 96x96; at 32 it scales to 12x12.
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    MaskImage m = generate_freeform_mask(256, 256, seed);
    CHECK(m.missing_count() >= 96 * 96);
    MaskImage s = generate_freeform_mask(32, 32, seed);
    CHECK(s.missing_count() >= 12 * 12);
  }
}

TEST_CASE("mask ratios stay in (0, 0.5] for nearly all seeds") {
  const int n = 10000;
  int in_range = 0;
  Scalar mean_ratio = 0.0;
  for (int seed = 0; seed < n; ++seed) {
    MaskImage m = generate_freeform_mask(256, 256, static_cast<std::uint64_t>(seed));
    const Scalar r = m.ratio();
    mean_ratio += r;
    if (r > 0.0 && r <= 0.5) ++in_range;
  }
  mean_ratio /= n;
  CHECK(in_range >= n * 99 / 100);
  // sanity: the square alone gives ~14%, strokes add more on average
  CHECK(mean_ratio > 0.14);
  CHECK(mean_ratio < 0.45);
}

TEST_CASE("downsampling marks a cell missing when any covered pixel is missing") {
  MaskImage m(8, 8);
  m.at(0, 0) = 1;        // only one pixel of the top-left 4x4 block
  m.at(5, 6) = 1;        // inside the bottom-right block at factor 4
  MaskImage d2 = downsample_mask(m, 2);
  REQUIRE(d2.h == 4);
  REQUIRE(d2.w == 4);
  CHECK(d2.at(0, 0) == 1);
  CHECK(d2.at(2, 3) == 1);
  CHECK(d2.at(1, 1) == 0);

  MaskImage d4 = downsample_mask(m, 4);
  REQUIRE(d4.h == 2);
  CHECK(d4.at(0, 0) == 1);
  CHECK(d4.at(1, 1) == 1);
  CHECK(d4.at(0, 1) == 0);

  // factor 1 is the identity
  MaskImage d1 = downsample_mask(m, 1);
  CHECK(d1.v == m.v);

  CHECK_THROWS_AS(downsample_mask(m, 3), ConfigError);

  // exhaustive block-max cross-check against a straight loop
  Rng rng(7);
  MaskImage big(12, 8);
  for (auto& v : big.v) v = rng.uniform() < 0.3 ? 1 : 0;
  MaskImage got = downsample_mask(big, 4);
  for (Index i = 0; i < got.h; ++i) {
    for (Index j = 0; j < got.w; ++j) {
      std::uint8_t expect = 0;
      for (Index di = 0; di < 4; ++di) {
        for (Index dj = 0; dj < 4; ++dj) expect |= big.at(i * 4 + di, j * 4 + dj);
      }
      CHECK(got.at(i, j) == expect);
    }
  }
}

TEST_CASE("patch validity matches the exhaustive oracle on all 512 3x3 masks") {
  for (int bits = 0; bits < 512; ++bits) {
    MaskImage m(3, 3);
    for (int p = 0; p < 9; ++p) m.v[static_cast<size_t>(p)] = (bits >> p) & 1;
    auto valid = binarize_patch_mask(m, 3, 3);
    REQUIRE(valid.size() == 1);
    CHECK(valid[0] == (bits == 0 ? 1 : 0));
  }
}

TEST_CASE("patch validity respects extraction geometry and stride") {
  MaskImage m(5, 7);
  m.at(1, 3) = 1;
  auto valid = binarize_patch_mask(m, 3, 1);
  REQUIRE(valid.size() == 3 * 5);
  for (Index r = 0; r < 3; ++r) {
    for (Index c = 0; c < 5; ++c) {
      // key at top-left (r, c) covers rows r..r+2, cols c..c+2
      const bool covers = (r <= 1 && 1 <= r + 2) && (c <= 3 && 3 <= c + 2);
      CHECK(valid[static_cast<size_t>(r * 5 + c)] == (covers ? 0 : 1));
    }
  }

  auto strided = binarize_patch_mask(m, 3, 2);
  REQUIRE(strided.size() == 2 * 3);  // rows {0,2}, cols {0,2,4}
  CHECK(strided[1] == 0);            // key at (0,2) covers (1,3)
  CHECK(strided[0] == 1);

  CHECK_THROWS_AS(binarize_patch_mask(m, 2, 1), ConfigError);
  CHECK_THROWS_AS(binarize_patch_mask(m, 9, 1), ConfigError);
  CHECK_THROWS_AS(binarize_patch_mask(m, 3, 0), ConfigError);
}

TEST_CASE("adding missing pixels can only invalidate keys, never validate them") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    MaskImage a(10, 10);
    for (auto& v : a.v) v = rng.uniform() < 0.2 ? 1 : 0;
    MaskImage b = a;
    for (auto& v : b.v) {
      if (!v && rng.uniform() < 0.2) v = 1;  // superset of missing pixels
    }
    auto va = binarize_patch_mask(a, 3, 1);
    auto vb = binarize_patch_mask(b, 3, 1);
    for (size_t i = 0; i < va.size(); ++i) {
      if (vb[i]) CHECK(va[i] == 1);
    }
  }
}
