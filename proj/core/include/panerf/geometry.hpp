#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace panerf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Continuous pixel coordinate. Integer values address pixel centres.
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws DomainError unless fx, fy > 0 and the principal point is inside the image.
  void validate() const;

  /// Focal length from a horizontal field of view (radians), principal point
  /// at the image centre. This is how "camera_angle_x" scenes are described.
  static Intrinsics from_horizontal_fov(double angle_x, int width, int height);

  /// Same camera at a different resolution (factor < 1 shrinks the image).
  Intrinsics resized(int new_width, int new_height) const;

  bool contains(PixelCoord px) const;
};

/// Rigid transform x -> rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  /// (a * b).apply(x) == a.apply(b.apply(x))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);
};

/// Camera-to-world pose.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_matrix(const Mat4& camera_to_world);
  Mat4 matrix() const;

  /// Throws DomainError unless rotation is orthonormal with det +1 (tolerance 1e-6).
  void validate() const;

  RigidTransform camera_to_world() const { return {rotation, translation}; }
  RigidTransform world_to_camera() const { return camera_to_world().inverse(); }
  Vec3 center() const { return translation; }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double near = 0.0;
  double far = 1.0;
};

struct DepthRange {
  double near = 0.0;
  double far = 1.0;
};

// Axis convention (Blender / NeRF-synthetic): the camera looks along -z, +y is
// up and image rows grow downwards. These two functions are the only place the
// convention is encoded.

/// Camera-frame point at unit depth (z = -1) seen through pixel px.
Vec3 camera_point_at_unit_depth(const Intrinsics& camera, PixelCoord px);

/// Projects a camera-frame point. Returns nullopt when the point is not in
/// front of the camera by more than min_depth. The second element is the
/// positive depth along the viewing axis.
struct Projection {
  PixelCoord pixel;
  double depth = 0.0;
};
std::optional<Projection> project_camera_point(const Intrinsics& camera, const Vec3& p,
                                               double min_depth = 1e-9);

/// World-space ray through a pixel. Throws DomainError if px lies outside the
/// image footprint [-0.5, size - 0.5).
Ray ray_for_pixel(const Intrinsics& camera, const Pose& pose, PixelCoord px,
                  DepthRange range = {0.0, 1.0});

/// Transform mapping source-camera coordinates into destination-camera
/// coordinates (source -> world -> destination).
RigidTransform compose_relative(const Pose& src, const Pose& dst);

Mat3 rotation_x(double radians);
Mat3 rotation_y(double radians);
Mat3 rotation_z(double radians);

inline constexpr double kPi = 3.14159265358979323846;
inline double degrees_to_radians(double deg) { return deg * kPi / 180.0; }

/// Rotation offsets (degrees, about camera x, y, z) on the grid
/// [-alpha, alpha]^3 with the given step, excluding (0, 0, 0). Ordered with x
/// outermost and z innermost. Throws ConfigError when alpha is not a
/// multiple of step.
std::vector<std::array<double, 3>> pose_grid_angles(double alpha_deg, double step_deg);

/// Applies camera-frame rotation Rz * Ry * Rx (degrees) to the reference pose,
/// rotating about `pivot` (world coordinates). With no pivot the camera
/// rotates about its own centre.
Pose perturb_pose(const Pose& reference, const std::array<double, 3>& angles_deg,
                  const std::optional<Vec3>& pivot = std::nullopt);

/// One perturbed pose per entry of pose_grid_angles, in the same order.
std::vector<Pose> pose_grid(const Pose& reference, double alpha_deg, double step_deg,
                            const std::optional<Vec3>& pivot = std::nullopt);

/// Camera at `eye` looking at `target`; `up` fixes the roll.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

}  // namespace panerf
