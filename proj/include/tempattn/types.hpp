#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tempattn {

// All numerics run in double precision; tolerances in the test suite assume it.
using Scalar = double;
using Index = Eigen::Index;

// Row-major matrices so that Eigen views map directly onto flat tensor buffers.
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using MapMatrix = Eigen::Map<MatrixX>;
using ConstMapMatrix = Eigen::Map<const MatrixX>;

// Error taxonomy mirrored by the CLI exit codes: config -> 2, numeric -> 3, io -> 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeError : ConfigError {
  explicit ShapeError(const std::string& what) : ConfigError(what) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic RNG wrapper. Distributions are computed inline (no hidden
// distribution state), so serializing the engine captures the full stream
// position; that is what makes checkpoint-resume bit-exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform in [0, 1).
  Scalar uniform() {
    return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53;
  }

  Scalar range(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Modulo bias is negligible for n << 2^64 and keeps the stream position
    // independent of n, which simplifies reasoning about determinism.
    return engine_() % n;
  }

  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Box-Muller without the usual cached second value: always consumes exactly
  // two engine draws per call.
  Scalar normal() {
    Scalar u1 = uniform();
    Scalar u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (is.fail()) throw IoError("invalid RNG state string");
  }

  // Derive an independent child seed; used to give each dataset item / mask
  // its own stream so parallel generation stays deterministic.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

 private:
  std::mt19937_64 engine_;
};

// Worker-thread budget: TEMPATTN_THREADS caps it, default is the hardware count.
int worker_threads();

}  // namespace tempattn
