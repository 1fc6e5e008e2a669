#include "tempattn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace tempattn::bench {
namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Scalar linear_fit_r2(const std::vector<Scalar>& x, const std::vector<Scalar>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("linear fit needs at least two (x, y) pairs");
  }
  const Scalar n = static_cast<Scalar>(x.size());
  Scalar sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const Scalar denom = n * sxx - sx * sx;
  if (denom == 0.0) throw ConfigError("linear fit undefined for constant x");
  const Scalar b = (n * sxy - sx * sy) / denom;
  const Scalar a = (sy - b * sx) / n;
  Scalar ss_res = 0, ss_tot = 0;
  const Scalar mean_y = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Scalar r = y[i] - (a + b * x[i]);
    ss_res += r * r;
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  if (ss_tot == 0.0) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

BenchReport bench_attention(const BenchConfig& cfg) {
  if (cfg.heads <= 0 || cfg.channels % cfg.heads != 0) {
    throw ConfigError("benchmark channel count must split evenly across heads");
  }
  if (cfg.reps <= 0 || cfg.batch_sizes.empty()) {
    throw ConfigError("benchmark needs at least one repetition and batch size");
  }
  NoGradGuard guard;

  const Index cp = cfg.channels / cfg.heads;
  attn::MhtmaParams params;
  Rng wrng(Rng::mix(cfg.seed, 0x77626e63ULL));
  const Scalar std = std::sqrt(1.0 / static_cast<Scalar>(cfg.channels));
  for (int k = 0; k < cfg.heads; ++k) {
    attn::HeadConfig hc;
    hc.patch_size = cfg.patch_size;
    hc.key_stride = cfg.key_stride;
    hc.embed_channels = cp;
    hc.lambda_m = cfg.lambda_m;
    params.heads.push_back(hc);
    Tensor w = Tensor::zeros({cfg.channels, cp});
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = std * wrng.normal();
    params.embed_w.push_back(w);
  }
  Tensor temps = Tensor::zeros({cfg.heads});
  for (int k = 0; k < cfg.heads; ++k) temps.data()[k] = 0.5 + 0.5 * static_cast<Scalar>(k);

  const Index max_batch = *std::max_element(cfg.batch_sizes.begin(), cfg.batch_sizes.end());
  std::vector<Tensor> inputs;
  std::vector<maskgen::MaskImage> masks;
  Rng irng(Rng::mix(cfg.seed, 0x69626e63ULL));
  for (Index b = 0; b < max_batch; ++b) {
    Tensor f = Tensor::zeros({cfg.height, cfg.width, cfg.channels});
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = irng.normal();
    inputs.push_back(f);
    masks.push_back(maskgen::generate_freeform_mask(
        cfg.height, cfg.width, Rng::mix(cfg.seed, 0x6d626e63ULL + static_cast<std::uint64_t>(b))));
  }

  BenchReport report;

  // Equivalence gate: both paths must agree on every input before any
  // timing is recorded.
  for (Index b = 0; b < max_batch; ++b) {
    Tensor fast = attn::mhtma_forward(inputs[b], masks[b], params, temps);
    Tensor loop = attn::attention_loop_reference(inputs[b], masks[b], params, temps);
    const Scalar diff = (fast.data() - loop.data()).abs().maxCoeff();
    report.max_abs_diff = std::max(report.max_abs_diff, diff);
  }

  using clock = std::chrono::steady_clock;
  for (Index batch : cfg.batch_sizes) {
    if (batch <= 0 || batch > max_batch) throw ConfigError("invalid benchmark batch size");
    std::vector<double> fast_times, loop_times;
    for (int rep = 0; rep < cfg.reps; ++rep) {
      auto t0 = clock::now();
      for (Index b = 0; b < batch; ++b) {
        Tensor out = attn::mhtma_forward(inputs[b], masks[b], params, temps);
        (void)out;
      }
      fast_times.push_back(
          std::chrono::duration<double, std::milli>(clock::now() - t0).count());

      t0 = clock::now();
      for (Index b = 0; b < batch; ++b) {
        Tensor out = attn::attention_loop_reference(inputs[b], masks[b], params, temps);
        (void)out;
      }
      loop_times.push_back(
          std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    }
    BenchRow row;
    row.batch = batch;
    row.parallel_ms = median(fast_times);
    row.loop_ms = median(loop_times);
    report.rows.push_back(row);
  }
  return report;
}

std::string to_csv(const BenchReport& report) {
  std::ostringstream s;
  s << "batch,parallel_ms,loop_ms,speedup\n";
  for (const BenchRow& r : report.rows) {
    const double speedup = r.parallel_ms > 0.0 ? r.loop_ms / r.parallel_ms : 0.0;
    s << r.batch << ',' << r.parallel_ms << ',' << r.loop_ms << ',' << speedup << '\n';
  }
  return s.str();
}

}  // namespace tempattn::bench
