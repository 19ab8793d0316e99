#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "panerf/error.hpp"

namespace panerf {

/// Row-major, channel-interleaved image. Pixel (x, y) has its x-th column in
/// row y; row 0 is the top of the image.
template <typename T>
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c, T fill = T(0))
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {
    if (w < 0 || h < 0 || c <= 0) throw ContractError("image dimensions must be non-negative");
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  bool same_shape(const ImageBuffer& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }

  template <typename U>
  ImageBuffer<U> cast() const {
    ImageBuffer<U> out;
    out.width = width;
    out.height = height;
    out.channels = channels;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  bool operator==(const ImageBuffer&) const = default;
};

using Image = ImageBuffer<float>;

/// Per-pixel boolean flags stored as bytes (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h, bool fill = false)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }

  bool operator==(const Mask&) const = default;
};

}  // namespace panerf
