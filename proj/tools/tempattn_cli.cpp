// Command-line front end: train, infer, sketch, mask-gen, bench-attention,
// and metrics subcommands over the tempattn library. Exit codes: 0 success,
// 2 configuration/usage error, 3 numeric abort, 4 I/O error.
#include "CLI11.hpp"

#include "tempattn/bench.hpp"
#include "tempattn/metrics.hpp"
#include "tempattn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace tempattn;

namespace {

int run_train(const std::string& config_file, const std::vector<std::string>& overrides,
              const std::string& resume) {
  cfg::TrainConfig config = cfg::load_config(config_file, overrides);
  train::TrainResult r = train::train_loop(config, resume);
  std::cout << "steps_run=" << r.steps_run << "\n"
            << "best_val=" << r.best_val << "\n"
            << "stopped_early=" << (r.stopped_early ? "true" : "false") << "\n"
            << "log=" << r.log_path << "\n"
            << "best_checkpoint=" << r.best_checkpoint << "\n"
            << "last_checkpoint=" << r.last_checkpoint << "\n";
  return 0;
}

// Rebuild the architecture recorded in a checkpoint, then load its weights.
train::Models models_from_checkpoint(const std::string& path) {
  const ckpt::CheckpointData data = ckpt::load_checkpoint(path);
  std::map<std::string, Scalar> meta;
  for (const auto& [name, t] : data.tensors) {
    if (name.rfind("meta.", 0) == 0) meta[name] = t.value();
  }
  const auto need = [&](const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw ConfigError(path + ": checkpoint lacks architecture field '" + key + "'");
    }
    return it->second;
  };
  cfg::TrainConfig config;
  config.image_size = static_cast<Index>(need("meta.image_size"));
  config.base_width = static_cast<Index>(need("meta.base_width"));
  config.heads = static_cast<int>(need("meta.heads"));
  config.patch_size = static_cast<int>(need("meta.patch_size"));
  config.key_stride = static_cast<int>(need("meta.key_stride"));
  config.lambda_m = need("meta.lambda_m");
  config.increasing_softplus = need("meta.increasing_softplus") != 0.0;
  config.use_sketch = need("meta.use_sketch") != 0.0;

  train::Models models = train::build_models(config);
  train::load_training_state(path, models, nullptr, nullptr, nullptr);
  return models;
}

// A sketch file is a grayscale image; pixels at or above half intensity are
// strokes. Strokes only act inside the hole, so clip to the mask.
Tensor load_sketch_plane(const std::string& path, const maskgen::MaskImage& mask) {
  Tensor img = io::read_image(path);
  if (img.shape().size() != 3 || img.shape()[2] != 1) {
    throw ConfigError(path + ": sketch must be a grayscale image");
  }
  if (img.shape()[0] != mask.h || img.shape()[1] != mask.w) {
    throw ShapeError(path + ": sketch size does not match the mask");
  }
  Tensor plane = Tensor::zeros({mask.h, mask.w, 1});
  for (Index r = 0; r < mask.h; ++r) {
    for (Index c = 0; c < mask.w; ++c) {
      plane.at3(r, c, 0) = (img.at3(r, c, 0) >= 0.5 && mask.at(r, c)) ? 1.0 : 0.0;
    }
  }
  return plane;
}

int run_infer(const std::string& checkpoint, const std::string& in_path,
              const std::string& mask_path, const std::string& sketch_path,
              const std::string& out_path) {
  train::Models models = models_from_checkpoint(checkpoint);
  Tensor in01 = io::read_image(in_path);
  if (in01.shape().size() != 3 || in01.shape()[2] != 3) {
    throw ConfigError(in_path + ": inference input must be an RGB image");
  }
  maskgen::MaskImage mask = io::read_mask(mask_path);
  if (mask.h != in01.shape()[0] || mask.w != in01.shape()[1]) {
    throw ShapeError(mask_path + ": mask size does not match the input image");
  }
  Tensor sketch_plane;
  if (!sketch_path.empty()) {
    sketch_plane = load_sketch_plane(sketch_path, mask);
  } else if (models.config.use_sketch) {
    // The model was trained with a sketch channel; absent guidance means an
    // all-zero plane (no strokes), not a missing input.
    sketch_plane = Tensor::zeros({mask.h, mask.w, 1});
  }
  Tensor out = train::infer_image(models, in01, mask, sketch_plane);
  io::write_image(out_path, out);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int run_sketch(const std::string& in_path, const std::string& out_path, Scalar threshold,
               Index min_area) {
  Tensor img = io::read_image(in_path);
  if (img.shape().size() == 3 && img.shape()[2] == 1) {
    // Grayscale: replicate to three channels so the edge detector sees the
    // same luma it would for an RGB file.
    Tensor rgb = Tensor::zeros({img.shape()[0], img.shape()[1], 3});
    for (Index r = 0; r < img.shape()[0]; ++r) {
      for (Index c = 0; c < img.shape()[1]; ++c) {
        for (Index ch = 0; ch < 3; ++ch) rgb.at3(r, c, ch) = img.at3(r, c, 0);
      }
    }
    img = rgb;
  }
  sketch::SketchConfig sc;
  sc.threshold = threshold;
  sc.min_area = min_area;
  sketch::BitMap sk = sketch::compute_sketch(img, sc);
  Tensor out = Tensor::zeros({sk.h, sk.w, 1});
  for (Index r = 0; r < sk.h; ++r) {
    for (Index c = 0; c < sk.w; ++c) out.at3(r, c, 0) = sk.at(r, c) ? 1.0 : 0.0;
  }
  io::write_image(out_path, out);
  std::cout << "wrote " << out_path << " (" << sk.count() << " sketch pixels)\n";
  return 0;
}

int run_mask_gen(Index height, Index width, std::uint64_t seed, const std::string& out_path) {
  maskgen::MaskImage m = maskgen::generate_freeform_mask(height, width, seed);
  io::write_mask(out_path, m);
  std::cout << "wrote " << out_path << " (" << m.missing_count() << " of " << height * width
            << " pixels missing)\n";
  return 0;
}

int run_bench(const std::string& out_path) {
  bench::BenchConfig bc;
  bench::BenchReport rep = bench::bench_attention(bc);
  std::cerr << "equivalence max |diff| = " << rep.max_abs_diff << "\n";
  const std::string csv = bench::to_csv(rep);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out_path);
    if (!f) throw IoError(out_path + ": cannot open for writing");
    f << csv;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

std::string metric_row(const std::string& label, const metrics::MetricReport& r) {
  std::ostringstream s;
  s.precision(10);
  s << label << ',' << r.mae << ',' << r.psnr << ',' << r.ssim;
  return s.str();
}

metrics::MetricReport one_comparison(const std::string& a_path, const std::string& b_path,
                                     bool hole_only, const std::string& mask_path) {
  Tensor a = io::read_image(a_path);
  Tensor b = io::read_image(b_path);
  if (hole_only) {
    maskgen::MaskImage mask = io::read_mask(mask_path);
    return metrics::compare_hole(a, b, mask);
  }
  return metrics::compare(a, b);
}

int run_metrics(const std::string& a_path, const std::string& b_path, bool hole_only,
                const std::string& mask_path) {
  if (hole_only && mask_path.empty()) {
    throw ConfigError("--hole-only needs --mask");
  }
  std::cout << "name,mae,psnr,ssim\n";
  if (!fs::is_directory(a_path)) {
    std::cout << metric_row(fs::path(a_path).filename().string(),
                            one_comparison(a_path, b_path, hole_only, mask_path))
              << "\n";
    return 0;
  }

  // Directory mode: compare files with matching names, in parallel across
  // the worker-thread budget.
  if (!fs::is_directory(b_path)) {
    throw ConfigError(b_path + ": must be a directory when the first path is one");
  }
  const bool mask_dir = !mask_path.empty() && fs::is_directory(mask_path);
  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a_path)) {
    if (e.is_regular_file()) names_a.insert(e.path().filename().string());
  }
  for (const auto& e : fs::directory_iterator(b_path)) {
    if (e.is_regular_file()) names_b.insert(e.path().filename().string());
  }
  std::vector<std::string> names;
  std::set_intersection(names_a.begin(), names_a.end(), names_b.begin(), names_b.end(),
                        std::back_inserter(names));
  if (names.empty()) throw ConfigError("no filenames in common between the two directories");

  std::vector<metrics::MetricReport> reports(names.size());
  std::vector<std::string> errors(names.size());
  std::atomic<std::size_t> next{0};
  const int workers =
      std::max(1, std::min(worker_threads(), static_cast<int>(names.size())));
  auto work = [&]() {
    for (std::size_t i = next.fetch_add(1); i < names.size(); i = next.fetch_add(1)) {
      const std::string mask_file =
          mask_dir ? (fs::path(mask_path) / names[i]).string() : mask_path;
      try {
        reports[i] = one_comparison((fs::path(a_path) / names[i]).string(),
                                    (fs::path(b_path) / names[i]).string(), hole_only,
                                    mask_file);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!errors[i].empty()) throw ConfigError(names[i] + ": " + errors[i]);
  }
  metrics::MetricReport mean;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::cout << metric_row(names[i], reports[i]) << "\n";
    mean.mae += reports[i].mae;
    mean.psnr += reports[i].psnr;
    mean.ssim += reports[i].ssim;
  }
  mean.mae /= static_cast<Scalar>(names.size());
  mean.psnr /= static_cast<Scalar>(names.size());
  mean.ssim /= static_cast<Scalar>(names.size());
  std::cout << metric_row("mean", mean) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temperature-masked attention inpainting toolkit"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Run the training loop");
  std::string train_config, train_resume;
  std::vector<std::string> train_sets;
  train_cmd->add_option("--config", train_config, "key=value config file");
  train_cmd->add_option("--set", train_sets, "override, e.g. --set max_steps=100");
  train_cmd->add_option("--resume", train_resume, "checkpoint to continue from");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Inpaint one image with a trained model");
  std::string inf_ckpt, inf_in, inf_mask, inf_sketch, inf_out;
  infer_cmd->add_option("--checkpoint", inf_ckpt)->required();
  infer_cmd->add_option("--in", inf_in, "input image (P6)")->required();
  infer_cmd->add_option("--mask", inf_mask, "hole mask (P5, white = missing)")->required();
  infer_cmd->add_option("--sketch", inf_sketch, "optional stroke guidance (P5)");
  infer_cmd->add_option("--out", inf_out)->required();

  // sketch
  auto* sketch_cmd = app.add_subcommand("sketch", "Extract a sketch from an image");
  std::string sk_in, sk_out;
  Scalar sk_threshold = 0.65;
  Index sk_min_area = 100;
  sketch_cmd->add_option("--in", sk_in)->required();
  sketch_cmd->add_option("--out", sk_out)->required();
  sketch_cmd->add_option("--threshold", sk_threshold, "edge threshold in (0,1)");
  sketch_cmd->add_option("--min-area", sk_min_area, "smallest kept component");

  // mask-gen
  auto* mask_cmd = app.add_subcommand("mask-gen", "Generate a free-form hole mask");
  Index mg_h = 256, mg_w = 256;
  std::uint64_t mg_seed = 0;
  std::string mg_out;
  mask_cmd->add_option("--height", mg_h);
  mask_cmd->add_option("--width", mg_w);
  mask_cmd->add_option("--seed", mg_seed)->required();
  mask_cmd->add_option("--out", mg_out)->required();

  // bench-attention
  auto* bench_cmd = app.add_subcommand("bench-attention", "Time both attention paths");
  std::string bench_out;
  bench_cmd->add_option("--out", bench_out, "CSV file (default: stdout)");

  // metrics
  auto* met_cmd = app.add_subcommand("metrics", "MAE / PSNR / SSIM between images");
  std::string met_a, met_b, met_mask;
  bool met_hole = false;
  met_cmd->add_option("--a", met_a, "image or directory")->required();
  met_cmd->add_option("--b", met_b, "image or directory")->required();
  met_cmd->add_flag("--hole-only", met_hole, "restrict to masked pixels");
  met_cmd->add_option("--mask", met_mask, "mask image or directory");

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) return run_train(train_config, train_sets, train_resume);
    if (infer_cmd->parsed()) return run_infer(inf_ckpt, inf_in, inf_mask, inf_sketch, inf_out);
    if (sketch_cmd->parsed()) return run_sketch(sk_in, sk_out, sk_threshold, sk_min_area);
    if (mask_cmd->parsed()) return run_mask_gen(mg_h, mg_w, mg_seed, mg_out);
    if (bench_cmd->parsed()) return run_bench(bench_out);
    if (met_cmd->parsed()) return run_metrics(met_a, met_b, met_hole, met_mask);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a configuration error
  } catch (const ConfigError& e) {  // includes ShapeError
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  }
}
