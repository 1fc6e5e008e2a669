#include "tempattn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace tempattn::train {
namespace {

constexpr std::uint64_t kSaltGNet = 0x676e6574ULL;
constexpr std::uint64_t kSaltDNet = 0x646e6574ULL;
constexpr std::uint64_t kSaltTrainSet = 0x74726e00ULL;
constexpr std::uint64_t kSaltValSet = 0x76616c00ULL;
constexpr std::uint64_t kSaltValSample = 0x76616c73ULL;
constexpr std::uint64_t kSaltLoop = 0x6c6f6f70ULL;
constexpr std::uint64_t kSaltSample = 0x73616d70ULL;
constexpr std::uint64_t kSaltMask = 0x6d61736bULL;
constexpr std::uint64_t kSaltCrop = 0x63726f70ULL;
constexpr std::uint64_t kSaltPick = 0x7069636bULL;

Tensor scale_to_pm1(const Tensor& img01) {
  Tensor out = Tensor::zeros(img01.shape());
  out.data() = 2.0 * img01.data() - 1.0;
  return out;
}

std::string format_full(Scalar v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

void append_named(ckpt::CheckpointData& data, const std::string& prefix,
                  const std::vector<std::pair<std::string, Tensor>>& items) {
  for (const auto& [name, t] : items) data.tensors.emplace_back(prefix + name, t);
}

std::vector<std::pair<std::string, Scalar>> arch_fingerprint(const cfg::TrainConfig& c) {
  return {
      {"meta.image_size", static_cast<Scalar>(c.image_size)},
      {"meta.base_width", static_cast<Scalar>(c.base_width)},
      {"meta.heads", static_cast<Scalar>(c.heads)},
      {"meta.patch_size", static_cast<Scalar>(c.patch_size)},
      {"meta.key_stride", static_cast<Scalar>(c.key_stride)},
      {"meta.lambda_m", c.lambda_m},
      {"meta.increasing_softplus", c.increasing_softplus ? 1.0 : 0.0},
      {"meta.use_sketch", c.use_sketch ? 1.0 : 0.0},
  };
}

std::uint64_t draw_salt(Rng& rng) { return rng.below(std::uint64_t{1} << 62); }

}  // namespace

Models build_models(const cfg::TrainConfig& config) {
  config.validate();
  Models m;
  m.config = config;
  Rng g_rng(Rng::mix(config.seed, kSaltGNet));
  m.coarse = std::make_unique<nets::CoarseNet>(config.net(), "g.coarse", m.g_params, g_rng);
  m.refine = std::make_unique<nets::RefineNet>(config.net(), "g.refine", m.g_params, g_rng);
  Rng d_rng(Rng::mix(config.seed, kSaltDNet));
  m.disc = std::make_unique<nets::Discriminator>(config.net(), "d", m.d_params, d_rng);
  m.proxy = std::make_unique<loss::PerceptualProxy>(config.seed);
  return m;
}

Sample make_sample(const cfg::TrainConfig& config, const data::ToyDataset& dataset, Index index,
                   std::uint64_t salt, bool augment) {
  Sample s;
  s.gt01 = dataset.image(index);
  if (augment) {
    Rng rng(Rng::mix(salt, kSaltSample));
    if (rng.uniform() < config.flip_prob) s.gt01 = data::flip_horizontal(s.gt01);
  }
  s.mask = maskgen::generate_freeform_mask(config.image_size, config.image_size,
                                           Rng::mix(salt, kSaltMask));
  s.mask_low = maskgen::downsample_mask(s.mask, 4);
  if (config.use_sketch) {
    sketch::SketchConfig sc;
    sc.threshold = config.sketch_threshold;
    sc.min_area = config.sketch_min_area;
    s.sketch_plane = sketch::sketch_channel(sketch::compute_sketch(s.gt01, sc), s.mask);
  }
  return s;
}

Tensor build_input(const Tensor& image01, const maskgen::MaskImage& mask,
                   const Tensor& sketch_plane, const cfg::TrainConfig& config) {
  if (image01.shape().size() != 3 || image01.shape()[2] != 3) {
    throw ShapeError("generator input image must be H x W x 3");
  }
  const Index h = image01.shape()[0], w = image01.shape()[1];
  if (h != mask.h || w != mask.w) throw ShapeError("mask size does not match the input image");
  const Index cin = config.in_channels();
  if (config.use_sketch &&
      (!sketch_plane.defined() || sketch_plane.shape().size() != 3 ||
       sketch_plane.shape()[0] != h || sketch_plane.shape()[1] != w ||
       sketch_plane.shape()[2] != 1)) {
    throw ShapeError("sketch plane must be H x W x 1 when sketches are enabled");
  }
  Tensor x = Tensor::zeros({h, w, cin});
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const bool missing = mask.at(r, c) != 0;
      for (Index ch = 0; ch < 3; ++ch) {
        const Scalar v = missing ? config.fill[static_cast<std::size_t>(ch)]
                                 : image01.at3(r, c, ch);
        x.at3(r, c, ch) = 2.0 * v - 1.0;
      }
      x.at3(r, c, 3) = missing ? 1.0 : 0.0;
      if (config.use_sketch) x.at3(r, c, 4) = sketch_plane.at3(r, c, 0);
    }
  }
  return x;
}

GenOut run_generator(const Models& models, const Sample& sample) {
  const cfg::TrainConfig& c = models.config;
  GenOut out;
  out.gt_pm = scale_to_pm1(sample.gt01);

  Tensor x1 = build_input(sample.gt01, sample.mask, sample.sketch_plane, c);
  out.coarse_pm = models.coarse->forward(x1);

  // Refine stage sees the coarse prediction with known pixels restored.
  Tensor comp_c = nets::composite_with_mask(out.coarse_pm, out.gt_pm, sample.mask);
  Tensor x2 = concat_channels(comp_c, nets::mask_to_cube(sample.mask, 1));
  if (c.use_sketch) x2 = concat_channels(x2, sample.sketch_plane);
  auto refined = models.refine->forward(x2, sample.mask_low);
  out.refined_pm = refined.image;
  out.temps = refined.temperatures;
  out.composite_pm = nets::composite_with_mask(out.refined_pm, out.gt_pm, sample.mask);
  return out;
}

StepStats train_step(Models& models, opt::Adam& g_opt, opt::Adam& d_opt,
                     const std::vector<Sample>& batch, std::uint64_t crop_salt) {
  if (batch.empty()) throw ConfigError("train_step on an empty batch");
  const auto start = std::chrono::steady_clock::now();
  const cfg::TrainConfig& c = models.config;
  const loss::LossWeights w = c.weights();

  StepStats stats;
  models.g_params.zero_grads();
  {
    Tape g_tape;

    // Generator forward for the whole batch, recorded once and reused for
    // both updates (the discriminator sees it detached).
    std::vector<GenOut> outs;
    std::vector<Tensor> rc, ro, pp;
    outs.reserve(batch.size());
    for (const Sample& s : batch) {
      GenOut o = run_generator(models, s);
      rc.push_back(loss::l1_mean(o.coarse_pm, o.gt_pm));
      ro.push_back(loss::l1_mean(o.composite_pm, o.gt_pm));
      pp.push_back(loss::perceptual_loss(*models.proxy, o.coarse_pm, o.gt_pm));
      outs.push_back(std::move(o));
    }
    Tensor recon = add(mul_const(loss::scalar_mean(rc), w.l1_coarse),
                       mul_const(loss::scalar_mean(ro), w.l1_refine));
    Tensor perc = loss::scalar_mean(pp);

    // Discriminator update on its own tape: detached composites, one power
    // iteration per step, then Adam.
    models.d_params.zero_grads();
    {
      Tape d_tape;
      models.disc->update_power_iterations();
      std::vector<Tensor> real_terms, fake_terms;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::uint64_t crop_seed = Rng::mix(crop_salt, static_cast<std::uint64_t>(i));
        Tensor real = models.disc->forward(outs[i].gt_pm, batch[i].mask, crop_seed);
        Tensor fake =
            models.disc->forward(outs[i].composite_pm.detach(), batch[i].mask, crop_seed);
        real_terms.push_back(loss::hinge_d_real(real));
        fake_terms.push_back(loss::hinge_d_fake(fake));
      }
      Tensor loss_d = add(loss::scalar_mean(real_terms), loss::scalar_mean(fake_terms));
      stats.loss_D = loss_d.value();
      d_tape.backward(loss_d);
    }
    d_opt.step();

    // Generator adversarial term against the just-updated discriminator,
    // recorded on the generator tape.
    std::vector<Tensor> adv_terms;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::uint64_t crop_seed = Rng::mix(crop_salt, static_cast<std::uint64_t>(i));
      adv_terms.push_back(
          loss::adv_g(models.disc->forward(outs[i].composite_pm, batch[i].mask, crop_seed)));
    }
    Tensor adv = loss::scalar_mean(adv_terms);

    Tensor loss_g = add(recon, add(mul_const(perc, w.perceptual), mul_const(adv, w.adversarial)));
    stats.loss_r = recon.value();
    stats.loss_p = perc.value();
    stats.loss_advG = adv.value();
    g_tape.backward(loss_g);

    const int heads = c.heads;
    stats.temperatures.assign(static_cast<std::size_t>(heads), 0.0);
    for (const GenOut& o : outs) {
      for (int k = 0; k < heads; ++k) {
        stats.temperatures[static_cast<std::size_t>(k)] += o.temps.data()[k];
      }
    }
    for (Scalar& t : stats.temperatures) t /= static_cast<Scalar>(batch.size());
  }
  g_opt.step();

  bool finite = std::isfinite(stats.loss_r) && std::isfinite(stats.loss_p) &&
                std::isfinite(stats.loss_advG) && std::isfinite(stats.loss_D);
  for (Scalar t : stats.temperatures) finite = finite && std::isfinite(t) && t > 0.0;
  if (!finite) {
    std::ostringstream dump;
    dump << "non-finite training step: loss_r=" << stats.loss_r << " loss_p=" << stats.loss_p
         << " loss_advG=" << stats.loss_advG << " loss_D=" << stats.loss_D << " temps=[";
    for (Scalar t : stats.temperatures) dump << t << " ";
    dump << "]";
    throw NumericError(dump.str());
  }

  stats.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                 .count();
  return stats;
}

Scalar validation_loss(const Models& models, const std::vector<Sample>& val_set) {
  if (val_set.empty()) throw ConfigError("validation set is empty");
  NoGradGuard guard;
  const loss::LossWeights w = models.config.weights();
  Scalar total = 0.0;
  for (const Sample& s : val_set) {
    GenOut o = run_generator(models, s);
    total += w.l1_coarse * loss::l1_mean(o.coarse_pm, o.gt_pm).value();
    total += w.l1_refine * loss::l1_mean(o.composite_pm, o.gt_pm).value();
    total += w.perceptual * loss::perceptual_loss(*models.proxy, o.coarse_pm, o.gt_pm).value();
  }
  const Scalar mean = total / static_cast<Scalar>(val_set.size());
  if (!std::isfinite(mean)) throw NumericError("non-finite validation loss");
  return mean;
}

Tensor infer_image(const Models& models, const Tensor& in01, const maskgen::MaskImage& mask,
                   const Tensor& sketch_plane) {
  NoGradGuard guard;
  const cfg::TrainConfig& c = models.config;
  if (in01.shape().size() != 3 || in01.shape()[0] != c.image_size ||
      in01.shape()[1] != c.image_size || in01.shape()[2] != 3) {
    throw ShapeError("inference input must be " + std::to_string(c.image_size) + "x" +
                     std::to_string(c.image_size) + "x3, got " + shape_to_string(in01.shape()));
  }
  Sample s;
  s.gt01 = in01;
  s.mask = mask;
  s.mask_low = maskgen::downsample_mask(mask, 4);
  s.sketch_plane = sketch_plane;
  if (c.use_sketch && !sketch_plane.defined()) {
    throw ConfigError("this model needs a sketch plane (use_sketch=true)");
  }
  GenOut o = run_generator(models, s);

  // Compose in [0, 1]: known pixels are copied from the input untouched.
  Tensor out = Tensor::zeros(in01.shape());
  for (Index r = 0; r < mask.h; ++r) {
    for (Index col = 0; col < mask.w; ++col) {
      for (Index ch = 0; ch < 3; ++ch) {
        out.at3(r, col, ch) = mask.at(r, col)
                                  ? (o.refined_pm.at3(r, col, ch) + 1.0) / 2.0
                                  : in01.at3(r, col, ch);
      }
    }
  }
  return out;
}

void save_training_state(const std::string& path, const Models& models, const opt::Adam& g_opt,
                         const opt::Adam& d_opt, std::uint64_t step,
                         const std::string& rng_state) {
  ckpt::CheckpointData data;
  data.step = step;
  data.rng_state = rng_state;
  append_named(data, "", models.g_params.items);
  append_named(data, "", models.d_params.items);
  append_named(data, "", models.disc->buffers());
  append_named(data, "opt.", g_opt.state());
  append_named(data, "opt.", d_opt.state());
  for (const auto& [name, value] : arch_fingerprint(models.config)) {
    data.tensors.emplace_back(name, Tensor::scalar(value));
  }
  data.tensors.emplace_back("meta.adam_g_steps",
                            Tensor::scalar(static_cast<Scalar>(g_opt.steps_taken())));
  data.tensors.emplace_back("meta.adam_d_steps",
                            Tensor::scalar(static_cast<Scalar>(d_opt.steps_taken())));
  ckpt::save_checkpoint(path, data);
}

std::uint64_t load_training_state(const std::string& path, Models& models, opt::Adam* g_opt,
                                  opt::Adam* d_opt, std::string* rng_state) {
  const ckpt::CheckpointData data = ckpt::load_checkpoint(path);

  std::map<std::string, Scalar> meta;
  for (const auto& [name, t] : data.tensors) {
    if (name.rfind("meta.", 0) == 0) meta[name] = t.value();
  }
  for (const auto& [name, expect] : arch_fingerprint(models.config)) {
    const auto it = meta.find(name);
    if (it == meta.end() || it->second != expect) {
      throw ConfigError("checkpoint " + path + " does not match the configuration (field '" +
                        name + "')");
    }
  }

  std::vector<std::pair<std::string, Tensor>> dst;
  for (const auto& item : models.g_params.items) dst.push_back(item);
  for (const auto& item : models.d_params.items) dst.push_back(item);
  for (const auto& item : models.disc->buffers()) dst.push_back(item);
  if (g_opt) {
    for (const auto& [name, t] : g_opt->state()) dst.emplace_back("opt." + name, t);
  }
  if (d_opt) {
    for (const auto& [name, t] : d_opt->state()) dst.emplace_back("opt." + name, t);
  }
  ckpt::restore_named(dst, data);

  if (g_opt) g_opt->set_steps_taken(static_cast<Index>(meta.at("meta.adam_g_steps")));
  if (d_opt) d_opt->set_steps_taken(static_cast<Index>(meta.at("meta.adam_d_steps")));
  if (rng_state) *rng_state = data.rng_state;
  return data.step;
}

TrainResult train_loop(const cfg::TrainConfig& config, const std::string& resume_from) {
  config.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw IoError(config.out_dir + ": cannot create output directory: " + ec.message());

  Models models = build_models(config);
  opt::Adam g_opt(models.g_params, config.lr_g, config.beta1, config.beta2, config.adam_eps);
  opt::Adam d_opt(models.d_params, config.lr_d, config.beta1, config.beta2, config.adam_eps);

  data::ToyDataset train_set{config.dataset_size, config.image_size,
                             Rng::mix(config.seed, kSaltTrainSet)};
  data::ToyDataset val_set{config.val_size, config.image_size,
                           Rng::mix(config.seed, kSaltValSet)};
  std::vector<Sample> val_samples;
  for (Index i = 0; i < config.val_size; ++i) {
    val_samples.push_back(make_sample(config, val_set, i,
                                      Rng::mix(Rng::mix(config.seed, kSaltValSample),
                                               static_cast<std::uint64_t>(i)),
                                      /*augment=*/false));
  }

  Rng loop_rng(Rng::mix(config.seed, kSaltLoop));
  std::uint64_t start_step = 0;
  if (!resume_from.empty()) {
    std::string rng_state;
    start_step = load_training_state(resume_from, models, &g_opt, &d_opt, &rng_state);
    loop_rng.set_state(rng_state);
  }

  TrainResult result;
  result.steps_run = static_cast<Index>(start_step);
  result.log_path = config.out_dir + "/train_log.csv";
  result.best_checkpoint = config.out_dir + "/best.ckpt";
  result.last_checkpoint = config.out_dir + "/last.ckpt";

  std::ofstream log(result.log_path,
                    start_step == 0 ? std::ios::trunc : (std::ios::app | std::ios::ate));
  if (!log) throw IoError(result.log_path + ": cannot open training log");
  if (start_step == 0) {
    log << "step,loss_r,loss_p,loss_advG,loss_D";
    for (int k = 1; k <= config.heads; ++k) log << ",t" << k;
    log << ",ms\n";
  }

  const Index steps_per_epoch = std::max<Index>(1, config.dataset_size / config.batch_size);
  Scalar best_val = std::numeric_limits<Scalar>::infinity();
  Index epochs_without_improvement = 0;

  for (Index step = static_cast<Index>(start_step) + 1; step <= config.max_steps; ++step) {
    const std::uint64_t step_salt = draw_salt(loop_rng);

    std::vector<Sample> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (Index i = 0; i < config.batch_size; ++i) {
      Rng pick(Rng::mix(Rng::mix(step_salt, kSaltPick), static_cast<std::uint64_t>(i)));
      const Index idx = static_cast<Index>(pick.below(static_cast<std::uint64_t>(
          config.dataset_size)));
      batch.push_back(make_sample(config, train_set, idx,
                                  Rng::mix(step_salt, static_cast<std::uint64_t>(i)),
                                  /*augment=*/true));
    }

    StepStats stats;
    try {
      stats = train_step(models, g_opt, d_opt, batch, Rng::mix(step_salt, kSaltCrop));
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step) + ": " + e.what());
    }

    log << step << ',' << format_full(stats.loss_r) << ',' << format_full(stats.loss_p) << ','
        << format_full(stats.loss_advG) << ',' << format_full(stats.loss_D);
    for (Scalar t : stats.temperatures) log << ',' << format_full(t);
    log << ',' << format_full(stats.ms) << '\n';
    log.flush();
    if (!log) throw IoError(result.log_path + ": failed to append a log row");
    result.steps_run = step;

    if (step % steps_per_epoch == 0) {
      const Scalar val = validation_loss(models, val_samples);
      if (val < best_val) {
        best_val = val;
        epochs_without_improvement = 0;
        save_training_state(result.best_checkpoint, models, g_opt, d_opt,
                            static_cast<std::uint64_t>(step), loop_rng.state());
      } else {
        ++epochs_without_improvement;
      }
      if (epochs_without_improvement >= config.patience) {
        result.stopped_early = true;
        save_training_state(result.last_checkpoint, models, g_opt, d_opt,
                            static_cast<std::uint64_t>(step), loop_rng.state());
        result.best_val = best_val;
        return result;
      }
    }
  }

  save_training_state(result.last_checkpoint, models, g_opt, d_opt,
                      static_cast<std::uint64_t>(result.steps_run), loop_rng.state());
  if (!std::isfinite(best_val)) {
    // max_steps below one epoch: still provide a best checkpoint.
    best_val = validation_loss(models, val_samples);
    save_training_state(result.best_checkpoint, models, g_opt, d_opt,
                        static_cast<std::uint64_t>(result.steps_run), loop_rng.state());
  }
  result.best_val = best_val;
  return result;
}

}  // namespace tempattn::train
