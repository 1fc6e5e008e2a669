#include "tempattn/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace tempattn::cfg {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

Scalar parse_scalar(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const Scalar v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false/1/0, got '" + value + "'");
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string format_scalar(Scalar v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

const std::vector<std::pair<std::string, Field>>& fields() {
  auto scalar_field = [](Scalar TrainConfig::*member) {
    return Field{[member](TrainConfig& c, const std::string& k,
                          const std::string& v) { c.*member = parse_scalar(k, v); },
                 [member](const TrainConfig& c) { return format_scalar(c.*member); }};
  };
  auto index_field = [](Index TrainConfig::*member) {
    return Field{[member](TrainConfig& c, const std::string& k, const std::string& v) {
                   c.*member = static_cast<Index>(parse_int(k, v));
                 },
                 [member](const TrainConfig& c) { return std::to_string(c.*member); }};
  };
  auto int_field = [](int TrainConfig::*member) {
    return Field{[member](TrainConfig& c, const std::string& k, const std::string& v) {
                   c.*member = static_cast<int>(parse_int(k, v));
                 },
                 [member](const TrainConfig& c) { return std::to_string(c.*member); }};
  };
  auto bool_field = [](bool TrainConfig::*member) {
    return Field{[member](TrainConfig& c, const std::string& k,
                          const std::string& v) { c.*member = parse_bool(k, v); },
                 [member](const TrainConfig& c) { return (c.*member) ? "true" : "false"; }};
  };
  auto fill_field = [](std::size_t i) {
    return Field{[i](TrainConfig& c, const std::string& k,
                     const std::string& v) { c.fill[i] = parse_scalar(k, v); },
                 [i](const TrainConfig& c) { return format_scalar(c.fill[i]); }};
  };

  static const std::vector<std::pair<std::string, Field>> table = {
      {"image_size", index_field(&TrainConfig::image_size)},
      {"batch_size", index_field(&TrainConfig::batch_size)},
      {"base_width", index_field(&TrainConfig::base_width)},
      {"heads", int_field(&TrainConfig::heads)},
      {"patch_size", int_field(&TrainConfig::patch_size)},
      {"key_stride", int_field(&TrainConfig::key_stride)},
      {"lambda_m", scalar_field(&TrainConfig::lambda_m)},
      {"increasing_softplus", bool_field(&TrainConfig::increasing_softplus)},
      {"lr_g", scalar_field(&TrainConfig::lr_g)},
      {"lr_d", scalar_field(&TrainConfig::lr_d)},
      {"beta1", scalar_field(&TrainConfig::beta1)},
      {"beta2", scalar_field(&TrainConfig::beta2)},
      {"adam_eps", scalar_field(&TrainConfig::adam_eps)},
      {"seed",
       Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
               c.seed = static_cast<std::uint64_t>(parse_int(k, v));
             },
             [](const TrainConfig& c) { return std::to_string(c.seed); }}},
      {"max_steps", index_field(&TrainConfig::max_steps)},
      {"patience", index_field(&TrainConfig::patience)},
      {"dataset_size", index_field(&TrainConfig::dataset_size)},
      {"val_size", index_field(&TrainConfig::val_size)},
      {"w_l1_coarse", scalar_field(&TrainConfig::w_l1_coarse)},
      {"w_l1_refine", scalar_field(&TrainConfig::w_l1_refine)},
      {"w_perceptual", scalar_field(&TrainConfig::w_perceptual)},
      {"w_adversarial", scalar_field(&TrainConfig::w_adversarial)},
      {"flip_prob", scalar_field(&TrainConfig::flip_prob)},
      {"fill_r", fill_field(0)},
      {"fill_g", fill_field(1)},
      {"fill_b", fill_field(2)},
      {"use_sketch", bool_field(&TrainConfig::use_sketch)},
      {"sketch_threshold", scalar_field(&TrainConfig::sketch_threshold)},
      {"sketch_min_area", index_field(&TrainConfig::sketch_min_area)},
      {"out_dir",
       Field{[](TrainConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
             [](const TrainConfig& c) { return c.out_dir; }}},
  };
  return table;
}

void set_key(TrainConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void TrainConfig::validate() const {
  net().validate();  // network-side invariants (sizes, heads, patch geometry)
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (dataset_size < 1 || val_size < 1) throw ConfigError("dataset sizes must be >= 1");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("flip_prob must be in [0, 1]");
  for (Scalar f : fill) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("fill values must be in [0, 1]");
  }
  if (!(sketch_threshold >= 0.0 && sketch_threshold <= 1.0)) {
    throw ConfigError("sketch_threshold must be in [0, 1]");
  }
  if (sketch_min_area < 1) throw ConfigError("sketch_min_area must be >= 1");
  if (w_l1_coarse < 0.0 || w_l1_refine < 0.0 || w_perceptual < 0.0 || w_adversarial < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
}

nets::NetConfig TrainConfig::net() const {
  nets::NetConfig n;
  n.in_channels = in_channels();
  n.base_width = base_width;
  n.image_size = image_size;
  n.heads = heads;
  n.patch_size = patch_size;
  n.key_stride = key_stride;
  n.lambda_m = lambda_m;
  n.increasing_softplus = increasing_softplus;
  return n;
}

loss::LossWeights TrainConfig::weights() const {
  return {w_l1_coarse, w_l1_refine, w_perceptual, w_adversarial};
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config file");
  TrainConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value, got '" +
                        stripped + "'");
    }
    set_key(config, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return config;
}

void apply_override(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must be key=value, got '" + assignment + "'");
  }
  set_key(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

TrainConfig load_config(const std::string& file, const std::vector<std::string>& overrides) {
  TrainConfig config = file.empty() ? TrainConfig{} : parse_config_file(file);
  for (const std::string& o : overrides) apply_override(config, o);
  config.validate();
  return config;
}

std::string to_key_values(const TrainConfig& config) {
  std::ostringstream out;
  for (const auto& [name, field] : fields()) out << name << "=" << field.get(config) << "\n";
  return out.str();
}

}  // namespace tempattn::cfg
