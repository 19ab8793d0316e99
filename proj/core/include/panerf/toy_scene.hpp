#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "panerf/geometry.hpp"
#include "panerf/scene.hpp"

namespace panerf {

/// Analytic solid with a Lambertian colour.
struct Primitive {
  enum class Kind { sphere, box };
  Kind kind = Kind::sphere;
  Vec3 center = Vec3::Zero();
  Vec3 extent = Vec3::Ones();  // sphere: radius in x; box: half side lengths (axis aligned)
  Vec3 color = Vec3(0.8, 0.8, 0.8);

  static Primitive sphere(const Vec3& center, double radius, const Vec3& color);
  static Primitive box(const Vec3& center, const Vec3& half_extent, const Vec3& color);
};

struct ToySceneSpec {
  std::vector<Primitive> primitives;
  Vec3 light_direction = Vec3(0.4, -0.3, 0.866);  // towards the light; normalised on use
  double ambient = 0.35;
  Vec3 background = Vec3::Ones();

  /// A sphere resting beside a box, both inside the unit ball around the origin.
  static ToySceneSpec sphere_and_box();
};

struct ToyHit {
  double t = 0.0;
  Vec3 normal;
  std::size_t primitive = 0;
};

/// Nearest intersection with t > t_min. Throws ConfigError on an empty spec.
std::optional<ToyHit> trace(const ToySceneSpec& spec, const Vec3& origin, const Vec3& direction,
                            double t_min = 1e-9);

/// Lambertian colour of a hit: color * (ambient + (1 - ambient) * max(0, n.l)).
Vec3 shade(const ToySceneSpec& spec, const ToyHit& hit);

struct ToyView {
  Image image;     // mean over supersample x supersample rays per pixel
  DepthMap depth;  // z-depth of the pixel-centre ray, +inf on background
  Mask mask;       // silhouette of the pixel-centre rays
};

ToyView render_toy_view(const ToySceneSpec& spec, const Intrinsics& camera, const Pose& pose,
                        int supersample = 1);

/// Camera on a sphere of `radius` around the origin looking at it, with +z up.
Pose orbit_pose(double radius, double azimuth_deg, double elevation_deg);

struct ToySceneOptions {
  int width = 48;
  int height = 48;
  double camera_angle_x = 0.6911112070083618;
  double radius = 4.0;
  double min_elevation_deg = 15.0;
  double max_elevation_deg = 60.0;
  DepthRange range{2.0, 6.0};
  int supersample = 1;  // anti-aliasing rays per pixel side
};

/// n_views cameras drawn from the upper hemisphere band, rendered with exact
/// depth and silhouette masks. Images are quantised to 8 bits so the scene
/// survives save_scene / load_scene unchanged. All frames are in the "train" split.
Scene generate_toy_scene(const ToySceneSpec& spec, int n_views, const ToySceneOptions& options,
                         std::mt19937_64& rng);

/// Same, at explicitly given poses.
Scene render_toy_scene(const ToySceneSpec& spec, const std::vector<Pose>& poses,
                       const ToySceneOptions& options);

}  // namespace panerf
