#pragma once

#include "tempattn/adam.hpp"
#include "tempattn/checkpoint.hpp"
#include "tempattn/config.hpp"
#include "tempattn/dataset.hpp"
#include "tempattn/image_io.hpp"
#include "tempattn/losses.hpp"
#include "tempattn/metrics.hpp"
#include "tempattn/sketch.hpp"

#include <memory>
#include <optional>
#include <string>

namespace tempattn::train {

// The two-stage generator, the discriminator, and the frozen perceptual
// feature extractor, all built deterministically from the config seed.
struct Models {
  cfg::TrainConfig config;
  nets::ParamSet g_params, d_params;
  std::unique_ptr<nets::CoarseNet> coarse;
  std::unique_ptr<nets::RefineNet> refine;
  std::unique_ptr<nets::Discriminator> disc;
  std::unique_ptr<loss::PerceptualProxy> proxy;
};

Models build_models(const cfg::TrainConfig& config);

// One training example: clean image, hole mask at full and attention
// resolution, and (in user-guided mode) the in-hole sketch plane.
struct Sample {
  Tensor gt01;  // H x W x 3 in [0, 1]
  maskgen::MaskImage mask;
  maskgen::MaskImage mask_low;
  Tensor sketch_plane;  // H x W x 1, empty tensor when sketches are off
};

// Deterministic sample assembly: `salt` fully determines the flip decision
// and the hole mask.
Sample make_sample(const cfg::TrainConfig& config, const data::ToyDataset& dataset, Index index,
                   std::uint64_t salt, bool augment);

// Network input: image scaled to [-1, 1] with holes filled by the scaled
// mean-fill colour, a mask plane (1 = missing), and the sketch plane when
// configured.
Tensor build_input(const Tensor& image01, const maskgen::MaskImage& mask,
                   const Tensor& sketch_plane, const cfg::TrainConfig& config);

struct GenOut {
  Tensor coarse_pm;     // raw coarse prediction in [-1, 1]
  Tensor refined_pm;    // raw refined prediction
  Tensor composite_pm;  // refined in the hole, ground truth elsewhere
  Tensor temps;         // [K]
  Tensor gt_pm;         // scaled ground truth (constant)
};

GenOut run_generator(const Models& models, const Sample& sample);

struct StepStats {
  Scalar loss_r = 0.0;     // weighted reconstruction term
  Scalar loss_p = 0.0;     // perceptual term (unweighted)
  Scalar loss_advG = 0.0;  // generator adversarial term (unweighted)
  Scalar loss_D = 0.0;     // discriminator hinge loss
  std::vector<Scalar> temperatures;  // batch mean per head
  double ms = 0.0;
};

// One discriminator update followed by one generator update on the batch.
// `crop_salt` seeds the local discriminator crops (shared between the real
// and generated image of each sample). Non-finite losses abort with a dump.
StepStats train_step(Models& models, opt::Adam& g_opt, opt::Adam& d_opt,
                     const std::vector<Sample>& batch, std::uint64_t crop_salt);

// Validation objective: weighted reconstruction plus perceptual term on
// fixed samples, no adversarial part, no parameter updates.
Scalar validation_loss(const Models& models, const std::vector<Sample>& val_set);

struct TrainResult {
  Index steps_run = 0;
  Scalar best_val = 0.0;
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::string log_path;
  bool stopped_early = false;
};

// Full run: CSV log (step,loss_r,loss_p,loss_advG,loss_D,t1..tK,ms), one
// validation pass per epoch, patience-based early stopping, best and last
// checkpoints. `resume_from` continues a run bit-exactly.
TrainResult train_loop(const cfg::TrainConfig& config, const std::string& resume_from = "");

// Composited prediction in [0, 1]: hole pixels from the refine stage, known
// pixels copied bit-exactly from the input.
Tensor infer_image(const Models& models, const Tensor& in01, const maskgen::MaskImage& mask,
                   const Tensor& sketch_plane);

// Checkpoint assembly/restore: parameters, spectral-norm buffers, optimizer
// moments, optimizer step counters, and architecture fingerprint.
void save_training_state(const std::string& path, const Models& models, const opt::Adam& g_opt,
                         const opt::Adam& d_opt, std::uint64_t step, const std::string& rng_state);
std::uint64_t load_training_state(const std::string& path, Models& models, opt::Adam* g_opt,
                                  opt::Adam* d_opt, std::string* rng_state);

}  // namespace tempattn::train
