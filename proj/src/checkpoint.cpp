#include "tempattn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace tempattn::ckpt {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; big-endian hosts need byte swaps");

constexpr char kMagic[4] = {'M', 'H', 'T', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError(path + ": truncated checkpoint while reading " + std::string(what));
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open checkpoint for writing");
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, data.step);
  put(out, static_cast<std::uint32_t>(data.rng_state.size()));
  out.write(data.rng_state.data(), static_cast<std::streamsize>(data.rng_state.size()));
  put(out, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& [name, t] : data.tensors) {
    put(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(out, kDtypeF64);
    put(out, static_cast<std::uint32_t>(t.shape().size()));
    for (Index d : t.shape()) put(out, static_cast<std::int64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(
                                                                t.data().size())));
  }
  if (!out) throw IoError(path + ": checkpoint write failed");
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open checkpoint for reading");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(path + ": not a checkpoint file (bad magic)");
  }
  const auto version = take<std::uint32_t>(in, path, "version");
  if (version != kVersion) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData data;
  data.step = take<std::uint64_t>(in, path, "step");
  const auto rng_len = take<std::uint32_t>(in, path, "rng state length");
  data.rng_state.resize(rng_len);
  in.read(data.rng_state.data(), rng_len);
  if (!in) throw IoError(path + ": truncated checkpoint while reading rng state");
  const auto count = take<std::uint32_t>(in, path, "tensor count");
  data.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = take<std::uint32_t>(in, path, "tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError(path + ": truncated checkpoint while reading a tensor name");
    const auto dtype = take<std::uint8_t>(in, path, "dtype");
    if (dtype != kDtypeF64) {
      throw IoError(path + ": tensor '" + name + "' has unsupported dtype code " +
                    std::to_string(dtype));
    }
    const auto rank = take<std::uint32_t>(in, path, "rank");
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<Index>(take<std::int64_t>(in, path, "dimension"));
      if (shape[d] < 0) throw IoError(path + ": negative dimension in tensor '" + name + "'");
    }
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(sizeof(Scalar) *
                                         static_cast<std::size_t>(t.data().size())));
    if (!in) {
      throw IoError(path + ": truncated checkpoint while reading payload of '" + name + "'");
    }
    data.tensors.emplace_back(std::move(name), t);
  }
  return data;
}

void restore_named(const std::vector<std::pair<std::string, Tensor>>& dst,
                   const CheckpointData& src) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : src.tensors) by_name.emplace(name, &t);
  for (const auto& [name, t] : dst) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ConfigError("checkpoint is missing tensor '" + name +
                        "' (incompatible architecture or config)");
    }
    if (!(it->second->shape() == t.shape())) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " +
                        shape_to_string(it->second->shape()) + ", expected " +
                        shape_to_string(t.shape()));
    }
    t.data() = it->second->data();
  }
}

}  // namespace tempattn::ckpt
