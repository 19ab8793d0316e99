#include "panerf/toy_scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "panerf/error.hpp"

namespace panerf {

Primitive Primitive::sphere(const Vec3& center, double radius, const Vec3& color) {
  return {Kind::sphere, center, Vec3(radius, radius, radius), color};
}

Primitive Primitive::box(const Vec3& center, const Vec3& half_extent, const Vec3& color) {
  return {Kind::box, center, half_extent, color};
}

ToySceneSpec ToySceneSpec::sphere_and_box() {
  ToySceneSpec s;
  s.primitives.push_back(Primitive::sphere(Vec3(0.35, 0.25, 0.1), 0.55, Vec3(0.85, 0.25, 0.2)));
  s.primitives.push_back(
      Primitive::box(Vec3(-0.4, -0.35, -0.1), Vec3(0.35, 0.3, 0.4), Vec3(0.2, 0.4, 0.85)));
  return s;
}

namespace {

std::optional<ToyHit> hit_sphere(const Primitive& p, const Vec3& o, const Vec3& d, double t_min) {
  const Vec3 oc = o - p.center;
  const double r = p.extent.x();
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  double t = -b - s;
  if (t <= t_min) t = -b + s;
  if (t <= t_min) return std::nullopt;
  return ToyHit{t, (o + t * d - p.center) / r, 0};
}

std::optional<ToyHit> hit_box(const Primitive& p, const Vec3& o, const Vec3& d, double t_min) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  int axis0 = -1, axis1 = -1;
  for (int a = 0; a < 3; ++a) {
    const double lo = p.center[a] - p.extent[a];
    const double hi = p.center[a] + p.extent[a];
    if (d[a] == 0.0) {
      if (o[a] < lo || o[a] > hi) return std::nullopt;
      continue;
    }
    double ta = (lo - o[a]) / d[a];
    double tb = (hi - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
    }
    if (tb < t1) {
      t1 = tb;
      axis1 = a;
    }
  }
  if (t0 > t1) return std::nullopt;
  double t = t0;
  int axis = axis0;
  if (t <= t_min) {
    t = t1;
    axis = axis1;
  }
  if (t <= t_min || axis < 0) return std::nullopt;
  Vec3 n = Vec3::Zero();
  const double side = (o + t * d)[axis] - p.center[axis];
  n[axis] = side > 0.0 ? 1.0 : -1.0;
  return ToyHit{t, n, 0};
}

}  // namespace

std::optional<ToyHit> trace(const ToySceneSpec& spec, const Vec3& origin, const Vec3& direction,
                            double t_min) {
  if (spec.primitives.empty()) throw ConfigError("toy scene needs at least one primitive");
  std::optional<ToyHit> best;
  for (std::size_t i = 0; i < spec.primitives.size(); ++i) {
    const auto& p = spec.primitives[i];
    auto h = p.kind == Primitive::Kind::sphere ? hit_sphere(p, origin, direction, t_min)
                                               : hit_box(p, origin, direction, t_min);
    if (h && (!best || h->t < best->t)) {
      h->primitive = i;
      best = h;
    }
  }
  return best;
}

Vec3 shade(const ToySceneSpec& spec, const ToyHit& hit) {
  const Vec3 l = spec.light_direction.normalized();
  const double lambert = std::max(0.0, hit.normal.dot(l));
  return spec.primitives[hit.primitive].color * (spec.ambient + (1.0 - spec.ambient) * lambert);
}

ToyView render_toy_view(const ToySceneSpec& spec, const Intrinsics& camera, const Pose& pose,
                        int supersample) {
  camera.validate();
  if (supersample < 1) throw ConfigError("toy supersampling must be at least 1");
  ToyView v;
  v.image = Image(camera.width, camera.height, 3);
  v.depth = DepthMap(camera.width, camera.height, std::numeric_limits<float>::infinity());
  v.mask = Mask(camera.width, camera.height);
  const Vec3 forward = -pose.rotation.col(2);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Ray ray = ray_for_pixel(camera, pose, {double(x), double(y)});
      const auto hit = trace(spec, ray.origin, ray.direction);
      Vec3 c = spec.background;
      if (hit) {
        c = shade(spec, *hit);
        v.depth.at(x, y) = static_cast<float>(hit->t * ray.direction.dot(forward));
        v.mask.set(x, y, true);
      }
      if (supersample > 1) {
        c.setZero();
        for (int j = 0; j < supersample; ++j) {
          for (int i = 0; i < supersample; ++i) {
            const PixelCoord sub{x + (i + 0.5) / supersample - 0.5, y + (j + 0.5) / supersample - 0.5};
            const Ray r = ray_for_pixel(camera, pose, sub);
            const auto h = trace(spec, r.origin, r.direction);
            c += h ? shade(spec, *h) : spec.background;
          }
        }
        c /= double(supersample * supersample);
      }
      for (int k = 0; k < 3; ++k) v.image.at(x, y, k) = static_cast<float>(c[k]);
    }
  }
  return v;
}

Pose orbit_pose(double radius, double azimuth_deg, double elevation_deg) {
  const double az = degrees_to_radians(azimuth_deg);
  const double el = degrees_to_radians(elevation_deg);
  const Vec3 eye(radius * std::cos(el) * std::cos(az), radius * std::cos(el) * std::sin(az),
                 radius * std::sin(el));
  return look_at(eye, Vec3::Zero(), Vec3::UnitZ());
}

Scene render_toy_scene(const ToySceneSpec& spec, const std::vector<Pose>& poses,
                       const ToySceneOptions& o) {
  Scene s;
  s.camera = Intrinsics::from_horizontal_fov(o.camera_angle_x, o.width, o.height);
  s.range = o.range;
  s.background = spec.background;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    ToyView v = render_toy_view(spec, s.camera, poses[i], o.supersample);
    quantize_8bit(v.image);
    Frame f;
    f.name = "view_" + std::to_string(i);
    f.pose = poses[i];
    f.image = std::move(v.image);
    f.depth = std::move(v.depth);
    f.mask = std::move(v.mask);
    s.frames.push_back(std::move(f));
  }
  return s;
}

Scene generate_toy_scene(const ToySceneSpec& spec, int n_views, const ToySceneOptions& o,
                         std::mt19937_64& rng) {
  if (n_views < 1) throw ConfigError("toy scene needs at least one view");
  if (!(o.min_elevation_deg <= o.max_elevation_deg)) {
    throw ConfigError("toy scene elevation band is empty");
  }
  std::uniform_real_distribution<double> az(0.0, 360.0);
  std::uniform_real_distribution<double> el(o.min_elevation_deg, o.max_elevation_deg);
  std::vector<Pose> poses;
  for (int i = 0; i < n_views; ++i) {
    const double a = az(rng);
    const double e = el(rng);
    poses.push_back(orbit_pose(o.radius, a, e));
  }
  return render_toy_scene(spec, poses, o);
}

}  // namespace panerf
