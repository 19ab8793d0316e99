#include "panerf/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "panerf/error.hpp"

namespace panerf {

EmbeddingProvider::EmbeddingProvider(std::vector<double> crop_fractions)
    : crop_fractions_(std::move(crop_fractions)) {
  if (crop_fractions_.empty()) throw ConfigError("embedding provider needs at least one level");
  for (std::size_t i = 0; i < crop_fractions_.size(); ++i) {
    const double f = crop_fractions_[i];
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("crop fractions must lie in (0, 1]");
    if (i > 0 && !(f > crop_fractions_[i - 1])) {
      throw ConfigError("crop fractions must be strictly increasing");
    }
  }
}

ImageBuffer<double> EmbeddingProvider::embed_backward(const ImageBuffer<double>&,
                                                      const Eigen::VectorXd&) const {
  throw ContractError("embedding provider '" + name() + "' is not differentiable");
}

BuiltinEmbedding::BuiltinEmbedding(std::vector<double> crop_fractions, int input_size, int grid)
    : EmbeddingProvider(std::move(crop_fractions)), input_size_(input_size), grid_(grid) {
  if (grid_ < 1 || input_size_ < 2 || input_size_ % grid_ != 0) {
    throw ConfigError("builtin embedding needs input size divisible by a positive grid");
  }
}

void BuiltinEmbedding::check_input(const ImageBuffer<double>& image) const {
  if (image.width != input_size_ || image.height != input_size_ || image.channels != 3) {
    throw ContractError("builtin embedding expects a " + std::to_string(input_size_) + "x" +
                        std::to_string(input_size_) + " RGB image");
  }
}

Eigen::VectorXd BuiltinEmbedding::raw_features(const ImageBuffer<double>& image) const {
  check_input(image);
  const int cell = input_size_ / grid_;
  const int s = input_size_;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(grid_ * grid_ * 9);
  for (int gy = 0; gy < grid_; ++gy) {
    for (int gx = 0; gx < grid_; ++gx) {
      const int base = (gy * grid_ + gx) * 9;
      int n_dx = 0, n_dy = 0;
      for (int y = gy * cell; y < (gy + 1) * cell; ++y) {
        for (int x = gx * cell; x < (gx + 1) * cell; ++x) {
          for (int c = 0; c < 3; ++c) f[base + c] += image.at(x, y, c);
          if (x + 1 < s) {
            for (int c = 0; c < 3; ++c) f[base + 3 + c] += std::abs(image.at(x + 1, y, c) - image.at(x, y, c));
            ++n_dx;
          }
          if (y + 1 < s) {
            for (int c = 0; c < 3; ++c) f[base + 6 + c] += std::abs(image.at(x, y + 1, c) - image.at(x, y, c));
            ++n_dy;
          }
        }
      }
      for (int c = 0; c < 3; ++c) {
        f[base + c] /= double(cell * cell);
        if (n_dx > 0) f[base + 3 + c] /= double(n_dx);
        if (n_dy > 0) f[base + 6 + c] /= double(n_dy);
      }
    }
  }
  return f;
}

Eigen::VectorXd BuiltinEmbedding::embed(const ImageBuffer<double>& image) const {
  const Eigen::VectorXd f = raw_features(image);
  const double norm = f.norm();
  return norm > 0.0 ? Eigen::VectorXd(f / norm) : f;
}

ImageBuffer<double> BuiltinEmbedding::embed_backward(const ImageBuffer<double>& image,
                                                     const Eigen::VectorXd& g) const {
  const Eigen::VectorXd f = raw_features(image);
  if (g.size() != f.size()) throw ContractError("feature gradient has the wrong length");
  const double norm = f.norm();
  ImageBuffer<double> out(image.width, image.height, 3, 0.0);
  if (norm == 0.0) return out;
  const Eigen::VectorXd e = f / norm;
  const Eigen::VectorXd df = (g - e * e.dot(g)) / norm;

  const int cell = input_size_ / grid_;
  const int s = input_size_;
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  for (int gy = 0; gy < grid_; ++gy) {
    for (int gx = 0; gx < grid_; ++gx) {
      const int base = (gy * grid_ + gx) * 9;
      int n_dx = 0, n_dy = 0;
      for (int y = gy * cell; y < (gy + 1) * cell; ++y) {
        for (int x = gx * cell; x < (gx + 1) * cell; ++x) {
          n_dx += (x + 1 < s);
          n_dy += (y + 1 < s);
        }
      }
      for (int y = gy * cell; y < (gy + 1) * cell; ++y) {
        for (int x = gx * cell; x < (gx + 1) * cell; ++x) {
          for (int c = 0; c < 3; ++c) {
            out.at(x, y, c) += df[base + c] / double(cell * cell);
            if (x + 1 < s) {
              const double d = df[base + 3 + c] / n_dx *
                               sign(image.at(x + 1, y, c) - image.at(x, y, c));
              out.at(x + 1, y, c) += d;
              out.at(x, y, c) -= d;
            }
            if (y + 1 < s) {
              const double d = df[base + 6 + c] / n_dy *
                               sign(image.at(x, y + 1, c) - image.at(x, y, c));
              out.at(x, y + 1, c) += d;
              out.at(x, y, c) -= d;
            }
          }
        }
      }
    }
  }
  return out;
}

int center_crop_extent(int size, double fraction) {
  return std::max(1, static_cast<int>(std::lround(fraction * size)));
}

ImageBuffer<double> center_crop(const ImageBuffer<double>& image, double fraction) {
  const int cw = center_crop_extent(image.width, fraction);
  const int ch = center_crop_extent(image.height, fraction);
  const int x0 = (image.width - cw) / 2;
  const int y0 = (image.height - ch) / 2;
  ImageBuffer<double> out(cw, ch, image.channels);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = image.at(x0 + x, y0 + y, c);
    }
  }
  return out;
}

namespace {

struct Tap {
  int i0, i1;
  double w0, w1;
};

std::vector<Tap> resize_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double pos = (i + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, double(src - 1));
    const int i0 = static_cast<int>(std::floor(pos));
    const int i1 = std::min(i0 + 1, src - 1);
    const double f = pos - i0;
    taps[static_cast<std::size_t>(i)] = {i0, i1, 1.0 - f, f};
  }
  return taps;
}

}  // namespace

ImageBuffer<double> resize_bilinear(const ImageBuffer<double>& image, int width, int height) {
  const auto tx = resize_taps(image.width, width);
  const auto ty = resize_taps(image.height, height);
  ImageBuffer<double> out(width, height, image.channels);
  for (int y = 0; y < height; ++y) {
    const Tap& a = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const Tap& b = tx[static_cast<std::size_t>(x)];
      for (int c = 0; c < image.channels; ++c) {
        out.at(x, y, c) = a.w0 * (b.w0 * image.at(b.i0, a.i0, c) + b.w1 * image.at(b.i1, a.i0, c)) +
                          a.w1 * (b.w0 * image.at(b.i0, a.i1, c) + b.w1 * image.at(b.i1, a.i1, c));
      }
    }
  }
  return out;
}

ImageBuffer<double> resize_bilinear_adjoint(const ImageBuffer<double>& g, int src_width,
                                            int src_height) {
  const auto tx = resize_taps(src_width, g.width);
  const auto ty = resize_taps(src_height, g.height);
  ImageBuffer<double> out(src_width, src_height, g.channels, 0.0);
  for (int y = 0; y < g.height; ++y) {
    const Tap& a = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < g.width; ++x) {
      const Tap& b = tx[static_cast<std::size_t>(x)];
      for (int c = 0; c < g.channels; ++c) {
        const double v = g.at(x, y, c);
        out.at(b.i0, a.i0, c) += a.w0 * b.w0 * v;
        out.at(b.i1, a.i0, c) += a.w0 * b.w1 * v;
        out.at(b.i0, a.i1, c) += a.w1 * b.w0 * v;
        out.at(b.i1, a.i1, c) += a.w1 * b.w1 * v;
      }
    }
  }
  return out;
}

namespace {
constexpr char kFeatureMagic[8] = {'P', 'N', 'F', 'E', 'A', 'T', '0', '1'};

void put_u32(std::ofstream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
}  // namespace

void write_feature_file(const std::filesystem::path& path, const FeatureSet& features) {
  if (features.levels.empty()) throw ContractError("feature set has no levels");
  const auto dim = features.levels.front().size();
  for (const auto& l : features.levels) {
    if (l.size() != dim) throw ContractError("feature levels differ in dimension");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  put_u32(out, static_cast<std::uint32_t>(features.levels.size()));
  put_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& l : features.levels) {
    for (Eigen::Index i = 0; i < l.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(l[i]));
  }
}

FeatureSet read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  auto u32 = [&](std::size_t at) {
    if (at + 4 > bytes.size()) throw ParseError("feature file truncated", at);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  for (std::size_t i = 0; i < sizeof(kFeatureMagic); ++i) {
    if (i >= bytes.size() || bytes[i] != static_cast<unsigned char>(kFeatureMagic[i])) {
      throw ParseError("bad feature file magic", i);
    }
  }
  const std::uint32_t levels = u32(8);
  const std::uint32_t dim = u32(12);
  const std::size_t expected = 16 + std::size_t(levels) * dim * 4;
  if (bytes.size() != expected) {
    throw ParseError("feature file size does not match its header", std::min(bytes.size(), expected));
  }
  FeatureSet fs;
  std::size_t at = 16;
  for (std::uint32_t l = 0; l < levels; ++l) {
    Eigen::VectorXf v(dim);
    for (std::uint32_t i = 0; i < dim; ++i, at += 4) v[i] = std::bit_cast<float>(u32(at));
    fs.levels.push_back(std::move(v));
  }
  return fs;
}

}  // namespace panerf
