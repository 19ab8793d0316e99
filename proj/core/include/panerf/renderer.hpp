#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "panerf/field.hpp"
#include "panerf/geometry.hpp"
#include "panerf/image.hpp"

namespace panerf {

/// n depths in [near, far], one per equal-width bin. Without an rng each
/// depth is its bin midpoint; with one it is uniform inside the bin.
/// Throws ConfigError when n < 2.
std::vector<double> sample_stratified(const Ray& ray, int n, std::mt19937_64* jitter = nullptr);

/// Samples along a batch of rays. Per ray r and sample i:
/// delta(i, r) = t(i+1, r) - t(i, r), and far - t(N-1, r) for the last sample.
template <typename T>
struct RaySampleBatch {
  MatrixX<T> t;        // N x R
  MatrixX<T> delta;    // N x R
  MatrixX<T> density;  // N x R
  Matrix3X<T> color;   // 3 x (R * N), column r * N + i

  // Forward state written by composite().
  MatrixX<T> transmittance;  // (N + 1) x R, row 0 == 1, row N == T_{N+1}
  MatrixX<T> weights;        // N x R

  Eigen::Index rays() const { return t.cols(); }
  Eigen::Index samples() const { return t.rows(); }
  bool has_forward_state() const {
    return transmittance.rows() == samples() + 1 && transmittance.cols() == rays() &&
           weights.rows() == samples() && weights.cols() == rays();
  }
};

template <typename T>
struct CompositeResult {
  Matrix3X<T> rgb;               // 3 x R, background included
  VectorX<T> accumulation;       // R, sum of weights
  VectorX<T> depth;              // R, weight-normalised expected depth (0 when invalid)
  std::vector<std::uint8_t> depth_valid;
};

/// Volume-rendering composite:
///   T_i = exp(-sum_{j<i} sigma_j delta_j),  w_i = T_i (1 - exp(-sigma_i delta_i)),
///   rgb = sum_i w_i c_i + T_{N+1} * background,
///   depth = sum_i w_i t_i / sum_i w_i (valid only when sum_i w_i > 1e-6).
/// Stores transmittance and weights in `samples` for composite_backward.
/// Throws ContractError on negative densities or inconsistent shapes.
template <typename T>
CompositeResult<T> composite(RaySampleBatch<T>& samples,
                             const Eigen::Matrix<T, 3, 1>& background = Eigen::Matrix<T, 3, 1>::Zero());

template <typename T>
struct CompositeGradients {
  MatrixX<T> density;  // N x R
  Matrix3X<T> color;   // 3 x (R * N)
};

/// Exact gradients of <rgb, rgb_gradient> + <weights, weight_gradient> with
/// respect to densities and colours. `weight_gradient` may be empty.
template <typename T>
CompositeGradients<T> composite_backward(
    const RaySampleBatch<T>& samples, const Matrix3X<T>& rgb_gradient,
    const MatrixX<T>& weight_gradient,
    const Eigen::Matrix<T, 3, 1>& background = Eigen::Matrix<T, 3, 1>::Zero());

template <typename T>
struct RayBatch {
  Matrix3X<T> origins;
  Matrix3X<T> directions;  // unit length
  VectorX<T> near;
  VectorX<T> far;

  Eigen::Index size() const { return origins.cols(); }
  void resize(Eigen::Index n) {
    origins.resize(3, n);
    directions.resize(3, n);
    near.resize(n);
    far.resize(n);
  }
  void set(Eigen::Index i, const Ray& ray) {
    origins.col(i) = ray.origin.cast<T>();
    directions.col(i) = ray.direction.cast<T>();
    near[i] = T(ray.near);
    far[i] = T(ray.far);
  }
};

struct RenderSettings {
  int samples_per_ray = 64;
  Vec3 background = Vec3::Zero();
  /// Rays per field-evaluation task. Fixed so results do not depend on the
  /// worker count.
  int task_rays = 256;
};

/// Forward state of rendering a ray batch through the MLP field.
template <typename T>
struct RenderPass {
  RaySampleBatch<T> samples;
  CompositeResult<T> result;
  std::vector<FieldCache<T>> caches;  // one per task, empty unless kept
};

/// Samples, evaluates and composites. Jitter draws come from `rng` in ray
/// order before any parallel work.
template <typename T>
RenderPass<T> render_rays(const FieldParams<T>& field, const RayBatch<T>& rays,
                          const RenderSettings& settings, std::mt19937_64* rng,
                          bool keep_cache);

/// Accumulates parameter gradients of <rgb, rgb_gradient> + <weights,
/// weight_gradient> into `gradients`. Requires a pass made with keep_cache.
template <typename T>
void render_rays_backward(const FieldParams<T>& field, const RenderPass<T>& pass,
                          const Matrix3X<T>& rgb_gradient, const MatrixX<T>& weight_gradient,
                          const RenderSettings& settings, FieldParams<T>& gradients);

/// Any radiance function (the MLP, or analytic test fields).
template <typename T>
using FieldEvaluator =
    std::function<FieldOutputs<T>(const Matrix3X<T>& positions, const Matrix3X<T>& directions)>;

struct RenderOptions {
  RenderSettings settings;
  DepthRange range{2.0, 6.0};
  /// Rays per chunk when assembling an image; has no numeric effect.
  int chunk_rays = 4096;
};

struct RenderedImage {
  Image rgb;           // 3 channels
  Image depth;         // 1 channel, expected ray distance, +inf where invalid
  Image accumulation;  // 1 channel
};

RenderedImage render_image(const FieldEvaluator<float>& field, const Intrinsics& camera,
                           const Pose& pose, const RenderOptions& options);
RenderedImage render_image(const FieldParams<float>& field, const Intrinsics& camera,
                           const Pose& pose, const RenderOptions& options);

/// All pixel rays of a camera in row-major order.
template <typename T>
RayBatch<T> camera_rays(const Intrinsics& camera, const Pose& pose, DepthRange range);

}  // namespace panerf
