#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "panerf/geometry.hpp"
#include "panerf/image.hpp"

namespace panerf {

/// Per-pixel depth along the camera's viewing axis. Non-finite or
/// non-positive entries are invalid; files store invalid pixels as +inf.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> depth;

  DepthMap() = default;
  DepthMap(int w, int h, float fill);

  bool valid(int x, int y) const;
  float at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
  std::size_t valid_count() const;
  bool operator==(const DepthMap&) const = default;
};

struct WarpTarget {
  PixelCoord pixel;
  double depth = 0.0;
};

/// Back-projects px at `depth`, applies `transform` and re-projects with the
/// same intrinsics. nullopt when the point lands behind the target camera
/// (depth <= min_depth). Throws DomainError when depth <= 0.
std::optional<WarpTarget> warp_pixel(PixelCoord px, double depth, const Intrinsics& camera,
                                     const RigidTransform& transform, double min_depth = 1e-6);

struct WarpPolicy {
  /// Contributions within (1 + depth_band) * nearest depth are blended;
  /// farther ones are discarded.
  double depth_band = 0.01;
  /// Target pixels collecting less bilinear weight than this are holes.
  double min_weight = 0.25;
  /// Treat invalid-depth source pixels as points at infinity (they move with
  /// the rotation only and lose every depth test) instead of dropping them.
  bool scatter_background = true;
  /// Re-check every filled target pixel against the source depth map: a
  /// surface pixel's own ray must meet the source surface at the accepted
  /// depth, and a background pixel's ray must never pass behind it. Pixels
  /// failing the check (silhouette overshoot, disoccluded regions) become holes.
  bool check_consistency = true;
};

struct WarpStats {
  std::size_t scattered = 0;        // source pixels that reached the target image plane
  std::size_t behind_camera = 0;    // dropped: transformed point not in front of camera
  std::size_t outside = 0;          // dropped: no bilinear neighbour inside the target
  std::size_t invalid_depth = 0;    // source pixels without usable depth (and not scattered)
  std::size_t inconsistent = 0;     // filled target pixels rejected by the consistency check
  std::size_t holes = 0;            // target pixels left invalid (including inconsistent ones)
  std::size_t total_pixels = 0;

  double hole_fraction() const;
};

/// Per-target-pixel accumulation for the z-buffered scatter.
struct ScatterAccumulator {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> color;      // weighted sum, channels per pixel
  std::vector<double> weight;     // accepted bilinear weight
  std::vector<double> min_depth;  // nearest contribution (+inf when none)

  ScatterAccumulator(int w, int h, int c);
};

struct WarpResult {
  Image image;
  Mask validity;
  /// Source channels beyond the colour (e.g. saliency) warped with the same weights.
  std::vector<Image> extra;
  WarpStats stats;
};

/// Forward-warps `image` (with z-depth `depth`) through `transform` onto an
/// image of the same camera. Each source pixel scatters bilinearly to the four
/// integer neighbours of its projection. Throws ContractError on size mismatch.
WarpResult forward_warp(const Image& image, const DepthMap& depth, const Intrinsics& camera,
                        const RigidTransform& transform, const WarpPolicy& policy = {},
                        const std::vector<Image>& extra_channels = {});

/// Decides foreground/background for a source view.
class SaliencyProvider {
 public:
  virtual ~SaliencyProvider() = default;
  virtual Mask compute(const Image& image, const DepthMap& depth,
                       const std::optional<Mask>& supplied_mask) const = 0;
  virtual std::string name() const = 0;
};

struct BackgroundRule {
  enum class Kind { finite_depth, fixed_distance, percentile };
  Kind kind = Kind::finite_depth;
  /// fixed_distance: foreground when depth < value. percentile: foreground
  /// when depth < the given percentile (0..100) of valid depths.
  double value = 0.0;
};

/// Foreground = valid pixels nearer than the rule's threshold. A degenerate
/// map (all valid depths equal, under a percentile rule) yields an
/// all-foreground mask and sets `degenerate`.
Mask saliency_from_depth(const DepthMap& depth, const BackgroundRule& rule,
                         bool* degenerate = nullptr);

class DepthSaliency final : public SaliencyProvider {
 public:
  explicit DepthSaliency(BackgroundRule rule = {}) : rule_(rule) {}
  Mask compute(const Image&, const DepthMap& depth, const std::optional<Mask>&) const override;
  std::string name() const override { return "depth"; }

 private:
  BackgroundRule rule_;
};

/// Uses the mask shipped with the frame, unchanged. Throws DataError when a
/// frame has none.
class SuppliedMaskSaliency final : public SaliencyProvider {
 public:
  Mask compute(const Image& image, const DepthMap&,
               const std::optional<Mask>& supplied_mask) const override;
  std::string name() const override { return "mask"; }
};

struct SourceView {
  Image image;
  DepthMap depth;
  Pose pose;
  std::optional<Mask> mask;
};

struct PseudoView {
  Image image;
  Mask validity;
  Mask saliency;  // only meaningful where validity holds; cleared elsewhere
  Pose pose;
  std::size_t source_id = 0;
  std::array<double, 3> angles_deg{};
  double hole_fraction = 0.0;
};

struct AugmentConfig {
  double alpha_deg = 30.0;
  double step_deg = 5.0;
  /// Centre of the grid rotations; nullopt rotates about each camera centre.
  std::optional<Vec3> pivot = Vec3::Zero();
  WarpPolicy policy;
};

/// One pseudo-view per (input, grid pose), inputs outermost. Saliency is
/// computed on each source and warped with its colours.
std::vector<PseudoView> generate_pseudo_views(const std::vector<SourceView>& inputs,
                                              const Intrinsics& camera,
                                              const AugmentConfig& config,
                                              const SaliencyProvider& saliency);

}  // namespace panerf
