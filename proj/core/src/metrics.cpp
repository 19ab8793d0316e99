#include "panerf/metrics.hpp"

#include <cmath>
#include <limits>

#include "panerf/error.hpp"

namespace panerf {

PsnrResult psnr(const Image& a, const Image& b, double max_value, const Mask* mask) {
  if (!a.same_shape(b)) throw ContractError("psnr: images differ in size");
  if (mask && (mask->width != a.width || mask->height != a.height)) {
    throw ContractError("psnr: mask differs in size");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (mask && !mask->at(x, y)) continue;
      for (int c = 0; c < a.channels; ++c) {
        const double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
        sum += d * d;
      }
      n += static_cast<std::size_t>(a.channels);
    }
  }
  if (n == 0) throw DomainError("psnr: no pixels to compare");
  PsnrResult r;
  r.mse = sum / double(n);
  if (r.mse == 0.0) {
    r.infinite = true;
    r.value = std::numeric_limits<double>::infinity();
  } else {
    r.value = -10.0 * std::log10(r.mse / (max_value * max_value));
  }
  return r;
}

ImageBuffer<double> to_luma(const Image& image) {
  ImageBuffer<double> out(image.width, image.height, 1);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      out.at(x, y) = image.channels >= 3 ? 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
                                               0.114 * image.at(x, y, 2)
                                         : double(image.at(x, y, 0));
    }
  }
  return out;
}

ImageBuffer<double> ssim_map(const Image& a, const Image& b, const SsimOptions& o) {
  if (!a.same_shape(b)) throw ContractError("ssim: images differ in size");
  if (o.window < 1 || !(o.sigma > 0.0)) throw ConfigError("ssim: bad window parameters");
  if (a.width < o.window || a.height < o.window) {
    throw ConfigError("ssim: image of " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                      " is smaller than the " + std::to_string(o.window) + "-pixel window");
  }
  const auto la = to_luma(a);
  const auto lb = to_luma(b);

  std::vector<double> g(static_cast<std::size_t>(o.window));
  double gs = 0.0;
  const double mid = (o.window - 1) / 2.0;
  for (int i = 0; i < o.window; ++i) {
    g[i] = std::exp(-(i - mid) * (i - mid) / (2.0 * o.sigma * o.sigma));
    gs += g[i];
  }
  for (auto& v : g) v /= gs;

  const double c1 = (o.k1 * o.max_value) * (o.k1 * o.max_value);
  const double c2 = (o.k2 * o.max_value) * (o.k2 * o.max_value);
  const int mw = a.width - o.window + 1;
  const int mh = a.height - o.window + 1;
  ImageBuffer<double> out(mw, mh, 1);
  for (int y = 0; y < mh; ++y) {
    for (int x = 0; x < mw; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int j = 0; j < o.window; ++j) {
        for (int i = 0; i < o.window; ++i) {
          const double w = g[i] * g[j];
          const double va = la.at(x + i, y + j);
          const double vb = lb.at(x + i, y + j);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      out.at(x, y) = ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
  }
  return out;
}

double ssim(const Image& a, const Image& b, const SsimOptions& options, const Mask* mask) {
  const auto map = ssim_map(a, b, options);
  if (mask && (mask->width != a.width || mask->height != a.height)) {
    throw ContractError("ssim: mask differs in size");
  }
  const int half = options.window / 2;
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (mask && !mask->at(x + half, y + half)) continue;
      sum += map.at(x, y);
      ++n;
    }
  }
  if (n == 0) throw DomainError("ssim: mask selects no window");
  return sum / double(n);
}

void MetricReport::finalize() {
  mean_psnr = 0.0;
  mean_ssim = 0.0;
  any_infinite = false;
  if (views.empty()) return;
  for (const auto& v : views) {
    any_infinite = any_infinite || v.psnr.infinite;
    mean_psnr += v.psnr.value;
    mean_ssim += v.ssim;
  }
  mean_psnr /= double(views.size());
  mean_ssim /= double(views.size());
}

}  // namespace panerf
