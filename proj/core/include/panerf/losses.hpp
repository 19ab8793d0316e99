#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "panerf/embedding.hpp"
#include "panerf/image.hpp"

namespace panerf {

struct PhotometricResult {
  double loss = 0.0;        // foreground + bg_weight * background
  double foreground = 0.0;  // mean over valid foreground pixels of |rendered - reference|^2
  double background = 0.0;
  std::size_t foreground_count = 0;
  std::size_t background_count = 0;
  bool foreground_empty = true;  // no valid foreground pixel: term is 0
  bool background_empty = true;
  Eigen::Matrix3Xd gradient;  // d loss / d rendered
};

/// Saliency-split squared error. Pixels with validity 0 contribute nothing;
/// saliency 1 marks foreground.
PhotometricResult photometric_loss(const Eigen::Matrix3Xd& rendered,
                                   const Eigen::Matrix3Xd& reference,
                                   std::span<const std::uint8_t> validity,
                                   std::span<const std::uint8_t> saliency, double bg_weight);

struct MscResult {
  double loss = 0.0;                // sum over levels of (1 - similarity)
  std::vector<double> similarity;   // cosine similarity per level
  std::vector<int> crop_sizes;      // crop width per level
  ImageBuffer<double> gradient;     // d loss / d synth (empty unless requested)
};

/// Multi-level semantic consistency between a synthesised image and its
/// reference: nested centre crops, each resized to the provider input and
/// embedded. Throws ConfigError when a crop is smaller than provider.min_crop().
MscResult msc_loss(const ImageBuffer<double>& synth, const ImageBuffer<double>& reference,
                   const EmbeddingProvider& provider, bool want_gradient = true);

/// Non-differentiable MSC from externally computed per-level features.
MscResult msc_loss_from_features(const FeatureSet& synth, const FeatureSet& reference);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct InformationPotentialResult {
  double loss = 0.0;  // -(1/|R|) sum_r sum_i wn_i(r)^2 over included rays
  std::size_t included = 0;
  std::size_t excluded = 0;   // rays whose weight sum is below the exclusion threshold
  bool empty = true;          // every ray excluded: loss is 0
  Eigen::MatrixXd gradient;   // N x R, zero for excluded rays
};

/// Information potential of per-ray weight distributions (one column per
/// ray), each normalised to sum to one. Throws ContractError on negative weights.
InformationPotentialResult ip_loss(const Eigen::MatrixXd& weights, double exclusion_eps = 1e-6);

}  // namespace panerf
