#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "panerf/image.hpp"

namespace panerf {

/// Maps an RGB image (at the provider's square input size) to a feature
/// vector, at L nested centre-crop levels.
class EmbeddingProvider {
 public:
  /// crop_fractions: one per level, strictly increasing, each in (0, 1].
  explicit EmbeddingProvider(std::vector<double> crop_fractions);
  virtual ~EmbeddingProvider() = default;

  int levels() const { return static_cast<int>(crop_fractions_.size()); }
  const std::vector<double>& crop_fractions() const { return crop_fractions_; }

  virtual int input_size() const = 0;
  /// Smallest crop (pixels per side) the provider accepts before rescaling.
  virtual int min_crop() const = 0;
  virtual bool differentiable() const = 0;
  virtual std::string name() const = 0;

  virtual Eigen::VectorXd embed(const ImageBuffer<double>& image) const = 0;
  /// Gradient of <embed(image), feature_gradient> w.r.t. the image.
  virtual ImageBuffer<double> embed_backward(const ImageBuffer<double>& image,
                                             const Eigen::VectorXd& feature_gradient) const;

 private:
  std::vector<double> crop_fractions_;
};

/// Deterministic differentiable stand-in for a pretrained image encoder.
/// The image is split into grid x grid cells; each cell contributes its mean
/// colour, mean |I(x+1,y) - I(x,y)| and mean |I(x,y+1) - I(x,y)| per channel
/// (differences whose second pixel leaves the image are skipped). The
/// concatenation is L2-normalised.
class BuiltinEmbedding final : public EmbeddingProvider {
 public:
  explicit BuiltinEmbedding(std::vector<double> crop_fractions = {1.0 / 3.0, 2.0 / 3.0, 1.0},
                            int input_size = 16, int grid = 4);

  int input_size() const override { return input_size_; }
  int min_crop() const override { return 2; }
  bool differentiable() const override { return true; }
  std::string name() const override { return "builtin"; }

  /// Features before normalisation.
  Eigen::VectorXd raw_features(const ImageBuffer<double>& image) const;
  Eigen::VectorXd embed(const ImageBuffer<double>& image) const override;
  ImageBuffer<double> embed_backward(const ImageBuffer<double>& image,
                                     const Eigen::VectorXd& feature_gradient) const override;

 private:
  void check_input(const ImageBuffer<double>& image) const;

  int input_size_;
  int grid_;
};

/// Side length of the level crop: round(fraction * size), at least 1.
int center_crop_extent(int size, double fraction);
ImageBuffer<double> center_crop(const ImageBuffer<double>& image, double fraction);

/// Bilinear resize (pixel-centre aligned, edge clamped) and its adjoint.
ImageBuffer<double> resize_bilinear(const ImageBuffer<double>& image, int width, int height);
ImageBuffer<double> resize_bilinear_adjoint(const ImageBuffer<double>& gradient, int src_width,
                                            int src_height);

/// Precomputed per-level features of one image, produced by an external encoder.
///
/// File layout (little-endian): char[8] "PNFEAT01", u32 level count,
/// u32 feature dimension, then level-major float32 values.
struct FeatureSet {
  std::vector<Eigen::VectorXf> levels;
};
void write_feature_file(const std::filesystem::path& path, const FeatureSet& features);
FeatureSet read_feature_file(const std::filesystem::path& path);

}  // namespace panerf
