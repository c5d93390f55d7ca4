#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"

namespace rigrecon::imaging {

/// Row-major image with samples in [0, 1]; 1 (gray) or 3 (RGB) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 1, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  double& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  /// Border-replicating accessor.
  double clamped(int x, int y, int c = 0) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y, c);
  }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  double mean() const {
    double s = 0.0;
    for (double v : data) s += v;
    return data.empty() ? 0.0 : s / static_cast<double>(data.size());
  }
};

/// Luma conversion (0.299 R + 0.587 G + 0.114 B); gray input is copied.
inline Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.width, img.height, 1);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double* p = &img.data[i * img.channels];
    out.data[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

/// Bilinear sample at a sub-pixel position. Returns false when (x, y) lies
/// outside the pixel-center hull of the image.
inline bool sample_bilinear(const Image& img, double x, double y, double* out) {
  if (!(x >= 0.0 && y >= 0.0 && x <= img.width - 1 && y <= img.height - 1)) return false;
  const int x0 = std::min(static_cast<int>(std::floor(x)), img.width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double ax = x - x0, ay = y - y0;
  for (int c = 0; c < img.channels; ++c) {
    const double top = (1 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c);
    const double bot = (1 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c);
    out[c] = (1 - ay) * top + ay * bot;
  }
  return true;
}

namespace detail {
inline void skip_pnm_space(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}
}  // namespace detail

/// Reads an 8-bit binary PGM (P5) or PPM (P6); samples are mapped by /255.
inline Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());
  std::string magic;
  in >> magic;
  require(magic == "P5" || magic == "P6", ErrorCode::ParseError, path.string() + ": not a P5/P6 file");
  int w = 0, h = 0, maxval = 0;
  detail::skip_pnm_space(in);
  in >> w;
  detail::skip_pnm_space(in);
  in >> h;
  detail::skip_pnm_space(in);
  in >> maxval;
  in.get();
  require(in.good() && w > 0 && h > 0, ErrorCode::ParseError, path.string() + ": bad header");
  require(maxval == 255, ErrorCode::ParseError, path.string() + ": only 8-bit images are supported");
  Image img(w, h, magic == "P5" ? 1 : 3);
  std::vector<unsigned char> bytes(img.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(in.gcount() == static_cast<std::streamsize>(bytes.size()), ErrorCode::ParseError,
          path.string() + ": truncated pixel data");
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void write_pnm(const std::filesystem::path& path, const Image& img) {
  require(img.channels == 1 || img.channels == 3, ErrorCode::InvalidArgument, "PNM needs 1 or 3 channels");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoFailure, "cannot write " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << "\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(img.data[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::IoFailure, "write failed for " + path.string());
}

/// Round trip through 8-bit storage, i.e. what a frame looks like after write_pnm + read_pnm.
inline Image quantize8(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace rigrecon::imaging
