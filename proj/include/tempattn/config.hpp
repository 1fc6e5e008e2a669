#pragma once

#include "tempattn/losses.hpp"
#include "tempattn/networks.hpp"

#include <array>
#include <string>
#include <vector>

namespace tempattn::cfg {

// All knobs of a training run. Serialized as flat key=value lines; unknown
// keys are configuration errors so typos cannot silently change a run.
struct TrainConfig {
  Index image_size = 32;
  Index batch_size = 4;
  Index base_width = 16;
  int heads = 2;
  int patch_size = 3;
  int key_stride = 1;
  Scalar lambda_m = 1e4;
  bool increasing_softplus = false;

  Scalar lr_g = 1e-4;
  Scalar lr_d = 1e-4;
  Scalar beta1 = 0.5;
  Scalar beta2 = 0.9;
  Scalar adam_eps = 1e-8;

  std::uint64_t seed = 1;
  Index max_steps = 1000;
  Index patience = 30;  // epochs without validation improvement
  Index dataset_size = 64;
  Index val_size = 8;

  Scalar w_l1_coarse = 1.2;
  Scalar w_l1_refine = 1.0;
  Scalar w_perceptual = 0.004;
  Scalar w_adversarial = 0.01;

  Scalar flip_prob = 0.5;
  std::array<Scalar, 3> fill = {0.485, 0.456, 0.406};

  bool use_sketch = false;
  Scalar sketch_threshold = 0.65;
  Index sketch_min_area = 100;

  std::string out_dir = ".";

  void validate() const;
  nets::NetConfig net() const;
  loss::LossWeights weights() const;
  Index in_channels() const { return use_sketch ? 5 : 4; }
};

// Parse a key=value file ('#' comments and blank lines allowed).
TrainConfig parse_config_file(const std::string& path);
// Apply one "key=value" override in place; unknown keys raise ConfigError.
void apply_override(TrainConfig& config, const std::string& assignment);
// File (optional, empty string to skip) plus ordered overrides, validated.
TrainConfig load_config(const std::string& file, const std::vector<std::string>& overrides);
// Flat serialization, one key=value per line, stable order.
std::string to_key_values(const TrainConfig& config);

}  // namespace tempattn::cfg
