#include "panerf/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "panerf/error.hpp"

namespace panerf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    throw DataError(std::string("cannot open ") + path.string() +
                    (mode[0] == 'r' ? " for reading" : " for writing"));
  }
  return f;
}

void png_error_fn(png_structp, png_const_charp msg) { throw DataError(msg); }
void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                           png_warning_fn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  Image out;
  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int c = png_get_channels(png, info);
    std::vector<png_byte> bytes(static_cast<std::size_t>(w) * h * c);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * c;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    out = Image(w, h, c);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.data[i] = bytes[i] / 255.0f;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  int color = 0;
  switch (image.channels) {
    case 1: color = PNG_COLOR_TYPE_GRAY; break;
    case 2: color = PNG_COLOR_TYPE_GRAY_ALPHA; break;
    case 3: color = PNG_COLOR_TYPE_RGB; break;
    case 4: color = PNG_COLOR_TYPE_RGBA; break;
    default: throw ContractError("PNG images need 1 to 4 channels");
  }
  if (image.width <= 0 || image.height <= 0) throw ContractError("cannot write an empty PNG");

  std::vector<png_byte> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float v = std::isfinite(image.data[i]) ? std::clamp(image.data[i], 0.0f, 1.0f) : 0.0f;
    bytes[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }

  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                            png_warning_fn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) png_write_row(png, bytes.data() + y * stride);
    png_write_end(png, nullptr);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Mask read_mask_png(const std::filesystem::path& path) {
  const Image img = read_png(path);
  Mask m(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) m.set(x, y, img.at(x, y, 0) >= 128.0f / 255.0f);
  }
  return m;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  Image img(mask.width, mask.height, 1);
  for (std::size_t i = 0; i < mask.data.size(); ++i) img.data[i] = mask.data[i] ? 1.0f : 0.0f;
  write_png(path, img);
}

void write_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  if (depth.width <= 0 || depth.height <= 0 ||
      depth.depth.size() != static_cast<std::size_t>(depth.width) * depth.height) {
    throw ContractError("depth map has inconsistent dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "Pf\n" << depth.width << ' ' << depth.height << "\n-1.0\n";
  constexpr float inf = std::numeric_limits<float>::infinity();
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      const float d = depth.valid(x, y) ? depth.at(x, y) : inf;
      const auto bits = std::bit_cast<std::uint32_t>(d);
      const char b[4] = {char(bits & 0xff), char((bits >> 8) & 0xff), char((bits >> 16) & 0xff),
                         char(bits >> 24)};
      out.write(b, 4);
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

DepthMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open depth file " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  std::size_t pos = 0;

  // Header tokens are separated by single whitespace characters.
  auto token = [&](const char* what) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    if (start == pos) throw ParseError(std::string("PFM header: missing ") + what, start);
    return std::pair<std::string, std::size_t>(
        std::string(bytes.begin() + start, bytes.begin() + pos), start);
  };

  const auto [magic, magic_at] = token("magic");
  if (magic != "Pf") {
    throw ParseError(magic == "PF" ? "colour PFM is not a depth map" : "PFM header: bad magic",
                     magic_at);
  }
  auto integer = [&](const char* what) {
    const auto [s, at] = token(what);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (...) {
      used = 0;
    }
    if (used != s.size() || v <= 0) throw ParseError(std::string("PFM header: bad ") + what, at);
    return v;
  };
  const int w = integer("width");
  const int h = integer("height");
  const auto [scale_s, scale_at] = token("scale");
  double scale = 0.0;
  {
    std::istringstream ss(scale_s);
    ss >> scale;
    if (!ss || !ss.eof() || scale == 0.0 || !std::isfinite(scale)) {
      throw ParseError("PFM header: bad scale", scale_at);
    }
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw ParseError("PFM header: missing terminator", pos);
  }
  ++pos;
  const bool little = scale < 0.0;
  const std::size_t expected = static_cast<std::size_t>(w) * h * 4;
  if (bytes.size() - pos != expected) {
    throw ParseError("PFM payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                         std::to_string(expected),
                     pos);
  }

  DepthMap d(w, h, 0.0f);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x, pos += 4) {
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) {
        const int shift = little ? 8 * i : 8 * (3 - i);
        bits |= static_cast<std::uint32_t>(bytes[pos + i]) << shift;
      }
      d.at(x, y) = std::bit_cast<float>(bits);
    }
  }
  return d;
}

}  // namespace panerf
