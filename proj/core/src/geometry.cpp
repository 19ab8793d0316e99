#include "panerf/geometry.hpp"

#include <cmath>
#include <sstream>

#include "panerf/error.hpp"

namespace panerf {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw DomainError("image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw DomainError("principal point outside the image");
  }
}

Intrinsics Intrinsics::from_horizontal_fov(double angle_x, int width, int height) {
  if (!(angle_x > 0.0 && angle_x < kPi)) throw DomainError("field of view must be in (0, pi)");
  const double focal = 0.5 * width / std::tan(0.5 * angle_x);
  Intrinsics k{focal, focal, 0.5 * width, 0.5 * height, width, height};
  k.validate();
  return k;
}

Intrinsics Intrinsics::resized(int new_width, int new_height) const {
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  Intrinsics k{fx * sx, fy * sy, cx * sx, cy * sy, new_width, new_height};
  k.validate();
  return k;
}

bool Intrinsics::contains(PixelCoord px) const {
  return px.u >= -0.5 && px.u < width - 0.5 && px.v >= -0.5 && px.v < height - 0.5;
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose Pose::from_matrix(const Mat4& m) {
  Pose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  p.validate();
  return p;
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

void Pose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) throw DomainError("pose is not finite");
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6) {
    std::ostringstream msg;
    msg << "pose rotation is not orthonormal (max deviation " << ortho << ")";
    throw DomainError(msg.str());
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-6) {
    throw DomainError("pose rotation must have determinant +1");
  }
}

Vec3 camera_point_at_unit_depth(const Intrinsics& camera, PixelCoord px) {
  return {(px.u - camera.cx) / camera.fx, -(px.v - camera.cy) / camera.fy, -1.0};
}

std::optional<Projection> project_camera_point(const Intrinsics& camera, const Vec3& p,
                                               double min_depth) {
  const double depth = -p.z();
  if (!(depth > min_depth)) return std::nullopt;
  Projection out;
  out.pixel.u = camera.cx + camera.fx * p.x() / depth;
  out.pixel.v = camera.cy - camera.fy * p.y() / depth;
  out.depth = depth;
  return out;
}

Ray ray_for_pixel(const Intrinsics& camera, const Pose& pose, PixelCoord px, DepthRange range) {
  if (!camera.contains(px)) {
    std::ostringstream msg;
    msg << "pixel (" << px.u << ", " << px.v << ") outside " << camera.width << "x"
        << camera.height << " image";
    throw DomainError(msg.str());
  }
  if (!(range.near >= 0.0 && range.near < range.far)) {
    throw DomainError("ray bounds must satisfy 0 <= near < far");
  }
  Ray ray;
  ray.origin = pose.translation;
  ray.direction = (pose.rotation * camera_point_at_unit_depth(camera, px)).normalized();
  ray.near = range.near;
  ray.far = range.far;
  return ray;
}

RigidTransform compose_relative(const Pose& src, const Pose& dst) {
  return dst.world_to_camera() * src.camera_to_world();
}

Mat3 rotation_x(double r) {
  return Eigen::AngleAxisd(r, Vec3::UnitX()).toRotationMatrix();
}
Mat3 rotation_y(double r) {
  return Eigen::AngleAxisd(r, Vec3::UnitY()).toRotationMatrix();
}
Mat3 rotation_z(double r) {
  return Eigen::AngleAxisd(r, Vec3::UnitZ()).toRotationMatrix();
}

std::vector<std::array<double, 3>> pose_grid_angles(double alpha_deg, double step_deg) {
  if (!(step_deg > 0.0)) throw ConfigError("pose grid step must be positive");
  if (!(alpha_deg >= step_deg)) throw ConfigError("pose grid range must be at least one step");
  const double ratio = alpha_deg / step_deg;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9) {
    std::ostringstream msg;
    msg << "pose grid range " << alpha_deg << " is not a multiple of step " << step_deg;
    throw ConfigError(msg.str());
  }
  const int n = static_cast<int>(steps);
  std::vector<std::array<double, 3>> out;
  const auto side = static_cast<std::size_t>(2 * n + 1);
  out.reserve(side * side * side - 1);
  for (int ix = -n; ix <= n; ++ix) {
    for (int iy = -n; iy <= n; ++iy) {
      for (int iz = -n; iz <= n; ++iz) {
        if (ix == 0 && iy == 0 && iz == 0) continue;
        out.push_back({ix * step_deg, iy * step_deg, iz * step_deg});
      }
    }
  }
  return out;
}

Pose perturb_pose(const Pose& reference, const std::array<double, 3>& angles_deg,
                  const std::optional<Vec3>& pivot) {
  const Mat3 local = rotation_z(degrees_to_radians(angles_deg[2])) *
                     rotation_y(degrees_to_radians(angles_deg[1])) *
                     rotation_x(degrees_to_radians(angles_deg[0]));
  Pose out;
  out.rotation = reference.rotation * local;
  if (pivot) {
    // Same rotation expressed in world axes, applied about the pivot point.
    const Mat3 world = reference.rotation * local * reference.rotation.transpose();
    out.translation = *pivot + world * (reference.translation - *pivot);
  } else {
    out.translation = reference.translation;
  }
  return out;
}

std::vector<Pose> pose_grid(const Pose& reference, double alpha_deg, double step_deg,
                            const std::optional<Vec3>& pivot) {
  reference.validate();
  std::vector<Pose> poses;
  for (const auto& angles : pose_grid_angles(alpha_deg, step_deg)) {
    poses.push_back(perturb_pose(reference, angles, pivot));
  }
  return poses;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 back = (eye - target).normalized();
  Vec3 right = up.cross(back);
  if (right.norm() < 1e-9) right = Vec3::UnitX().cross(back);
  right.normalize();
  const Vec3 cam_up = back.cross(right);
  Pose p;
  p.rotation.col(0) = right;
  p.rotation.col(1) = cam_up;
  p.rotation.col(2) = back;
  p.translation = eye;
  return p;
}

}  // namespace panerf
