#pragma once

#include <string>
#include <vector>

#include "panerf/image.hpp"

namespace panerf {

struct PsnrResult {
  double value = 0.0;  // +inf when mse == 0
  double mse = 0.0;
  bool infinite = false;
};

/// -10 log10(mse / max^2) over all channels. With a mask only masked pixels
/// count (masked-pixel mean). Throws ContractError on size mismatch and
/// DomainError when the mask selects nothing.
PsnrResult psnr(const Image& a, const Image& b, double max_value = 1.0, const Mask* mask = nullptr);

/// Luma used by ssim for colour images: 0.299 R + 0.587 G + 0.114 B.
ImageBuffer<double> to_luma(const Image& image);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double max_value = 1.0;
};

/// Per-window SSIM over every fully contained window ("valid" placement).
/// The map has size (w - window + 1) x (h - window + 1); entry (x, y) is the
/// window whose top-left pixel is (x, y). Throws ConfigError when the image is
/// smaller than the window.
ImageBuffer<double> ssim_map(const Image& a, const Image& b, const SsimOptions& options = {});

/// Mean of ssim_map. With a mask, the mean runs over windows whose centre
/// pixel is masked.
double ssim(const Image& a, const Image& b, const SsimOptions& options = {},
            const Mask* mask = nullptr);

struct ViewMetrics {
  std::string name;
  PsnrResult psnr;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;  // +inf if any view is infinite
  double mean_ssim = 0.0;
  bool any_infinite = false;

  void finalize();
};

}  // namespace panerf
