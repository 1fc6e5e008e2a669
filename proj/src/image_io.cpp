#include "tempattn/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace tempattn::io {
namespace {

struct HeaderParser {
  const std::string& bytes;
  const std::string& path;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(path + ": " + what + " at byte " + std::to_string(pos));
  }

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        return;
      }
    }
  }

  long next_int() {
    skip_space_and_comments();
    if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
      fail("expected a decimal integer");
    }
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1 << 20) fail("integer out of range");
      ++pos;
    }
    return value;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

struct Raster {
  char kind;  // '5' or '6'
  Index h, w, channels;
  const unsigned char* data;
};

// Parses the header and validates the raster length; `bytes` must outlive
// the returned view.
Raster parse_netpbm(const std::string& bytes, const std::string& path) {
  HeaderParser p{bytes, path};
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    p.fail("not a binary netpbm file (expected P5 or P6 magic)");
  }
  const char kind = bytes[1];
  p.pos = 2;
  const long w = p.next_int();
  const long h = p.next_int();
  const long maxval = p.next_int();
  if (w <= 0 || h <= 0) p.fail("non-positive image dimensions");
  if (maxval != 255) p.fail("unsupported maxval " + std::to_string(maxval) + " (need 255)");
  if (p.pos >= bytes.size() || !(bytes[p.pos] == ' ' || bytes[p.pos] == '\t' ||
                                 bytes[p.pos] == '\r' || bytes[p.pos] == '\n')) {
    p.fail("expected single whitespace after maxval");
  }
  ++p.pos;
  const Index channels = kind == '6' ? 3 : 1;
  const std::size_t expected = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                               static_cast<std::size_t>(channels);
  const std::size_t actual = bytes.size() - p.pos;
  if (actual < expected) {
    throw IoError(path + ": truncated raster, expected " + std::to_string(expected) +
                  " bytes but found " + std::to_string(actual));
  }
  return {kind, static_cast<Index>(h), static_cast<Index>(w), channels,
          reinterpret_cast<const unsigned char*>(bytes.data() + p.pos)};
}

unsigned char to_byte(Scalar v) {
  const Scalar clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

}  // namespace

Tensor read_image(const std::string& path) {
  const std::string bytes = slurp(path);
  const Raster r = parse_netpbm(bytes, path);
  Tensor img = Tensor::zeros({r.h, r.w, r.channels});
  for (Index i = 0; i < r.h * r.w * r.channels; ++i) {
    img.data()[i] = static_cast<Scalar>(r.data[i]) / 255.0;
  }
  return img;
}

void write_image(const std::string& path, const Tensor& image) {
  if (image.shape().size() != 3 || (image.shape()[2] != 1 && image.shape()[2] != 3)) {
    throw ShapeError("write_image expects H x W x 1 or H x W x 3, got " +
                     shape_to_string(image.shape()));
  }
  const Index h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << (c == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raster(static_cast<std::size_t>(h * w * c));
  for (Index i = 0; i < h * w * c; ++i) raster[static_cast<std::size_t>(i)] = to_byte(image.data()[i]);
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError(path + ": write failed");
}

void write_mask(const std::string& path, const maskgen::MaskImage& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P5\n# 0=known (black), 255=missing\n" << mask.w << " " << mask.h << "\n255\n";
  std::vector<unsigned char> raster(mask.v.size());
  for (std::size_t i = 0; i < mask.v.size(); ++i) raster[i] = mask.v[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError(path + ": write failed");
}

maskgen::MaskImage read_mask(const std::string& path) {
  const std::string bytes = slurp(path);
  const Raster r = parse_netpbm(bytes, path);
  if (r.kind != '5') throw IoError(path + ": masks must be grayscale P5");
  maskgen::MaskImage mask;
  mask.h = r.h;
  mask.w = r.w;
  mask.v.resize(static_cast<std::size_t>(r.h * r.w));
  for (std::size_t i = 0; i < mask.v.size(); ++i) mask.v[i] = r.data[i] >= 128 ? 1 : 0;
  return mask;
}

}  // namespace tempattn::io
