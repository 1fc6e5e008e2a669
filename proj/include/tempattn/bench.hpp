#pragma once

#include "tempattn/attention.hpp"

#include <string>
#include <vector>

namespace tempattn::bench {

// Benchmark shape: the attention grid (feature resolution), channel count,
// head geometry, batch sizes to sweep, and repetitions per measurement.
struct BenchConfig {
  Index height = 32;
  Index width = 32;
  Index channels = 32;
  int heads = 2;
  int patch_size = 3;
  int key_stride = 1;
  Scalar lambda_m = 1e4;
  std::vector<Index> batch_sizes = {1, 2, 4, 8, 16};
  int reps = 5;
  std::uint64_t seed = 42;
};

struct BenchRow {
  Index batch = 0;
  double parallel_ms = 0.0;  // vectorized matrix-product path
  double loop_ms = 0.0;      // explicit per-query scalar loop
};

struct BenchReport {
  std::vector<BenchRow> rows;
  // Largest |parallel - loop| output element over every input used, computed
  // before any timing so the comparison is between verified-equal paths.
  Scalar max_abs_diff = 0.0;
};

// Median-of-`reps` wall time per batch size for both attention paths on
// identical random inputs and masks.
BenchReport bench_attention(const BenchConfig& cfg);

// "batch,parallel_ms,loop_ms,speedup" rows.
std::string to_csv(const BenchReport& report);

// Coefficient of determination of the least-squares line through (x, y);
// returns 1 for perfectly linear data.
Scalar linear_fit_r2(const std::vector<Scalar>& x, const std::vector<Scalar>& y);

}  // namespace tempattn::bench
