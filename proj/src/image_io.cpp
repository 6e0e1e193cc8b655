// SPDX-License-Identifier: Apache-2.0

#include "rrcl/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "rrcl/error.hpp"

namespace rrcl {

namespace {

struct Geometry {
  std::size_t channels, height, width;
};

Geometry geometry(const Shape& s) {
  if (s.size() == 2) return {1, s[0], s[1]};
  if (s.size() == 3 && (s[0] == 1 || s[0] == 3)) return {s[0], s[1], s[2]};
  throw ShapeError("image export needs shape (H,W), (1,H,W) or (3,H,W), got " + shape_string(s));
}

unsigned char to_byte(float v) {
  const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
  return static_cast<unsigned char>(std::lround(c * 255.0f));
}

// Header tokenizer that skips whitespace and '#' comments.
class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<unsigned char>& b) : bytes_(b) {}

  std::string token() {
    skip();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out.push_back(static_cast<char>(bytes_[pos_++]));
    if (out.empty()) throw IoError("pnm: truncated header");
    return out;
  }

  std::size_t number() {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) {
      throw IoError("pnm: expected a number in header, got '" + t + "'");
    }
    return std::stoul(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw IoError("pnm: malformed header end");
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string pnm_extension(const Shape& shape) {
  return geometry(shape).channels == 1 ? ".pgm" : ".ppm";
}

std::vector<unsigned char> encode_pnm(const Array& image) {
  const Geometry g = geometry(image.shape());
  const std::string header = std::string(g.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(g.width) + " " + std::to_string(g.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  const std::size_t plane = g.height * g.width;
  out.reserve(out.size() + plane * g.channels);
  // Planar CHW in memory, interleaved RGB on disk.
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < g.channels; ++c) out.push_back(to_byte(image[c * plane + p]));
  }
  return out;
}

Array decode_pnm(const std::vector<unsigned char>& bytes) {
  HeaderReader hr(bytes);
  const std::string magic = hr.token();
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IoError("pnm: unsupported magic '" + magic + "' (only P5/P6)");
  }
  const std::size_t width = hr.number();
  const std::size_t height = hr.number();
  const std::size_t maxval = hr.number();
  if (width == 0 || height == 0) throw IoError("pnm: zero image dimension");
  if (maxval == 0 || maxval > 255) throw IoError("pnm: only 8-bit rasters are supported");
  const std::size_t offset = hr.raster_offset();
  const std::size_t plane = width * height;
  if (bytes.size() < offset + plane * channels) throw IoError("pnm: truncated raster");
  Array out(Shape{channels, height, width});
  const float scale = static_cast<float>(maxval);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      out[c * plane + p] = static_cast<float>(bytes[offset + p * channels + c]) / scale;
    }
  }
  return out;
}

void write_pnm(const std::filesystem::path& path, const Array& image) {
  const auto bytes = encode_pnm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Array read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_pnm(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_sidecar(const std::filesystem::path& path,
                   const std::map<std::string, std::string>& fields) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : fields) out << k << '=' << v << '\n';
}

std::map<std::string, std::string> read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace rrcl
