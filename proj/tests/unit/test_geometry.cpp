#include <doctest.h>

#include <cmath>

#include <panerf/error.hpp>
#include <panerf/geometry.hpp>

#include "oracles.hpp"

using namespace panerf;

namespace {

const Intrinsics kCam{100.0, 100.0, 50.0, 50.0, 101, 101};

void check_close(const Vec3& a, const Vec3& b, double tol) {
  CHECK((a - b).norm() <= tol);
}

bool is_identity(const RigidTransform& t, double tol) {
  return (t.rotation - Mat3::Identity()).norm() <= tol && t.translation.norm() <= tol;
}

}  // namespace

TEST_CASE("principal ray looks down the viewing axis") {
  const Ray r = ray_for_pixel(kCam, Pose::identity(), {50, 50}, {0.5, 4.0});
  check_close(r.direction, Vec3(0, 0, -1), 1e-12);
  check_close(r.origin, Vec3::Zero(), 0);
  CHECK(r.near == 0.5);
  CHECK(r.far == 4.0);
}

TEST_CASE("pixel one focal length right of centre is a 45 degree ray") {
  // fx pixels right of cx: outside a 101-pixel image, so use a wider camera.
  const Intrinsics wide{100.0, 100.0, 50.0, 50.0, 201, 101};
  const Ray r = ray_for_pixel(wide, Pose::identity(), {150, 50});
  check_close(r.direction, Vec3(1, 0, -1).normalized(), 1e-12);
}

TEST_CASE("hand-evaluated pinhole ray") {
  const Ray r = ray_for_pixel(kCam, Pose::identity(), {55, 50});
  check_close(r.direction, Vec3(0.05, 0, -1).normalized(), 1e-12);
}

TEST_CASE("image rows grow downwards") {
  const Ray r = ray_for_pixel(kCam, Pose::identity(), {50, 60});
  CHECK(r.direction.y() < 0.0);
}

TEST_CASE("ray origin and direction follow the pose") {
  Pose p;
  p.rotation = rotation_y(0.3);
  p.translation = Vec3(1, 2, 3);
  const Ray r = ray_for_pixel(kCam, p, {55, 45});
  check_close(r.origin, p.translation, 0);
  check_close(r.direction, (p.rotation * Vec3(0.05, 0.05, -1)).normalized(), 1e-12);
}

TEST_CASE("out-of-bounds pixel is a domain error") {
  CHECK_THROWS_AS(ray_for_pixel(kCam, Pose::identity(), {-0.6, 10}), DomainError);
  CHECK_THROWS_AS(ray_for_pixel(kCam, Pose::identity(), {10, 100.5}), DomainError);
  CHECK_NOTHROW(ray_for_pixel(kCam, Pose::identity(), {-0.5, 100.49}));
}

TEST_CASE("intrinsics validation") {
  CHECK_THROWS_AS((Intrinsics{0, 1, 0, 0, 4, 4}.validate()), DomainError);
  CHECK_THROWS_AS((Intrinsics{1, 1, 4, 0, 4, 4}.validate()), DomainError);
  CHECK_NOTHROW((Intrinsics{1, 1, 0, 0, 4, 4}.validate()));
}

TEST_CASE("focal length from horizontal field of view") {
  const auto k = Intrinsics::from_horizontal_fov(0.6911, 800, 800);
  CHECK(k.fx == doctest::Approx(400.0 / std::tan(0.6911 / 2)).epsilon(1e-12));
  CHECK(k.cx == 400.0);
}

TEST_CASE("pose validation rejects non-rotations") {
  Pose p;
  p.rotation(0, 0) = 1.01;
  CHECK_THROWS_AS(p.validate(), DomainError);
  Pose m;
  m.rotation = Vec3(1, 1, -1).asDiagonal();
  CHECK_THROWS_AS(m.validate(), DomainError);
}

TEST_CASE("compose_relative of a pose with itself is the identity") {
  std::mt19937_64 rng(1);
  const Pose p = oracle::random_pose(rng);
  CHECK(is_identity(compose_relative(p, p), 1e-12));
}

TEST_CASE("compose_relative from identity to a translated camera") {
  Pose dst;
  dst.translation = Vec3(0.5, -1, 2);
  const auto t = compose_relative(Pose::identity(), dst);
  CHECK((t.rotation - Mat3::Identity()).norm() == 0.0);
  check_close(t.translation, -dst.translation, 0);
}

TEST_CASE("property: compose_relative round trip is the identity") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Pose a = oracle::random_pose(rng);
    const Pose b = oracle::random_pose(rng);
    CHECK(is_identity(compose_relative(a, b) * compose_relative(b, a), 1e-6));
  }
}

TEST_CASE("property: compose_relative maps source-camera points to destination-camera points") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Pose a = oracle::random_pose(rng);
    const Pose b = oracle::random_pose(rng);
    const Vec3 world(oracle::uniform(rng, -3, 3), oracle::uniform(rng, -3, 3), oracle::uniform(rng, -3, 3));
    const Vec3 in_a = a.world_to_camera().apply(world);
    const Vec3 in_b = b.world_to_camera().apply(world);
    CHECK((compose_relative(a, b).apply(in_a) - in_b).norm() < 1e-9);
  }
}

TEST_CASE("pose grid of 30 degrees at 5 degree steps has 2196 poses") {
  CHECK(pose_grid(Pose::identity(), 30, 5).size() == 2196);
  CHECK(pose_grid(Pose::identity(), 5, 5).size() == 26);
}

TEST_CASE("pose grid entry (5,0,0) of the identity is Rx(5 deg)") {
  const auto angles = pose_grid_angles(5, 5);
  const auto grid = pose_grid(Pose::identity(), 5, 5);
  bool found = false;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (angles[i] == std::array<double, 3>{5, 0, 0}) {
      found = true;
      const double c = std::cos(degrees_to_radians(5)), s = std::sin(degrees_to_radians(5));
      Mat3 rx;
      rx << 1, 0, 0, 0, c, -s, 0, s, c;
      CHECK((grid[i].rotation - rx).norm() < 1e-12);
      CHECK(grid[i].translation.norm() == 0.0);
    }
  }
  CHECK(found);
}

TEST_CASE("pose grid excludes the identity and orders x outermost") {
  const auto a = pose_grid_angles(5, 5);
  for (const auto& e : a) CHECK_FALSE((e[0] == 0 && e[1] == 0 && e[2] == 0));
  CHECK(a.front() == std::array<double, 3>{-5, -5, -5});
  CHECK(a[1] == std::array<double, 3>{-5, -5, 0});
  CHECK(a.back() == std::array<double, 3>{5, 5, 5});
}

TEST_CASE("pose grid rejects bad ranges") {
  CHECK_THROWS_AS(pose_grid_angles(7, 5), ConfigError);
  CHECK_THROWS_AS(pose_grid_angles(5, 0), ConfigError);
  CHECK_THROWS_AS(pose_grid_angles(2, 5), ConfigError);
  CHECK_NOTHROW(pose_grid_angles(1.5, 0.5));
}

TEST_CASE("camera-frame rotation order is Rz * Ry * Rx") {
  const std::array<double, 3> ang{4, -7, 11};
  const Pose p = perturb_pose(Pose::identity(), ang);
  const Mat3 expect = rotation_z(degrees_to_radians(11)) * rotation_y(degrees_to_radians(-7)) *
                      rotation_x(degrees_to_radians(4));
  CHECK((p.rotation - expect).norm() < 1e-12);
}

TEST_CASE("rotation about a pivot keeps the distance to it") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Pose ref = oracle::random_pose(rng);
    const Vec3 pivot(oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1));
    const Pose p = perturb_pose(ref, {10, -5, 15}, pivot);
    CHECK((p.center() - pivot).norm() == doctest::Approx((ref.center() - pivot).norm()).epsilon(1e-12));
    // The pivot keeps its camera-frame coordinates up to the local rotation.
    const Vec3 before = ref.world_to_camera().apply(pivot);
    const Vec3 after = p.world_to_camera().apply(pivot);
    CHECK(after.norm() == doctest::Approx(before.norm()).epsilon(1e-12));
  }
}

TEST_CASE("property: every grid pose is a rotation and the count formula holds") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const double step = oracle::uniform_int(rng, 1, 10);
    const double alpha = step * oracle::uniform_int(rng, 1, 3);
    const Pose ref = oracle::random_pose(rng);
    const auto grid = pose_grid(ref, alpha, step, Vec3::Zero());
    const double k = 2 * alpha / step + 1;
    CHECK(grid.size() == static_cast<std::size_t>(k * k * k - 1));
    for (const auto& p : grid) {
      CHECK((p.rotation.transpose() * p.rotation - Mat3::Identity()).norm() < 1e-6);
      CHECK(p.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("property: ray directions are unit length") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const int w = oracle::uniform_int(rng, 1, 64), h = oracle::uniform_int(rng, 1, 64);
    const Intrinsics k{oracle::uniform(rng, 5, 200), oracle::uniform(rng, 5, 200),
                       oracle::uniform(rng, 0, w - 1e-9), oracle::uniform(rng, 0, h - 1e-9), w, h};
    const Pose p = oracle::random_pose(rng);
    for (int j = 0; j < 20; ++j) {
      const Ray r = ray_for_pixel(k, p, {oracle::uniform(rng, -0.5, w - 0.5 - 1e-9),
                                         oracle::uniform(rng, -0.5, h - 0.5 - 1e-9)});
      CHECK(std::abs(r.direction.norm() - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("projection inverts the unit-depth back-projection") {
  const PixelCoord px{12.25, 70.5};
  const Vec3 p = 3.0 * camera_point_at_unit_depth(kCam, px);
  const auto proj = project_camera_point(kCam, p);
  REQUIRE(proj);
  CHECK(proj->pixel.u == doctest::Approx(px.u).epsilon(1e-12));
  CHECK(proj->pixel.v == doctest::Approx(px.v).epsilon(1e-12));
  CHECK(proj->depth == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_FALSE(project_camera_point(kCam, Vec3(0, 0, 1)));
}

TEST_CASE("look_at points the viewing axis at the target") {
  const Pose p = look_at(Vec3(4, 0, 2), Vec3::Zero());
  p.validate();
  const Ray r = ray_for_pixel(kCam, p, {50, 50});
  CHECK((r.direction - (-Vec3(4, 0, 2)).normalized()).norm() < 1e-12);
}
