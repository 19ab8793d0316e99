#include "panerf/renderer.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "panerf/error.hpp"
#include "panerf/parallel.hpp"

namespace panerf {

namespace {

template <typename T>
struct SampledRays {
  RaySampleBatch<T> batch;
  Matrix3X<T> positions;
  Matrix3X<T> directions;
};

template <typename T>
SampledRays<T> sample_rays(const RayBatch<T>& rays, int n, std::mt19937_64* rng) {
  if (n < 2) throw ConfigError("need at least 2 samples per ray");
  const Eigen::Index r_count = rays.size();
  SampledRays<T> s;
  s.batch.t.resize(n, r_count);
  s.batch.delta.resize(n, r_count);
  s.positions.resize(3, r_count * n);
  s.directions.resize(3, r_count * n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index r = 0; r < r_count; ++r) {
    const T near = rays.near[r];
    const T far = rays.far[r];
    const T bin = (far - near) / T(n);
    for (int i = 0; i < n; ++i) {
      const T u = rng ? T(unit(*rng)) : T(0.5);
      s.batch.t(i, r) = near + (T(i) + u) * bin;
    }
    for (int i = 0; i + 1 < n; ++i) s.batch.delta(i, r) = s.batch.t(i + 1, r) - s.batch.t(i, r);
    s.batch.delta(n - 1, r) = far - s.batch.t(n - 1, r);
    for (int i = 0; i < n; ++i) {
      const Eigen::Index col = r * n + i;
      s.positions.col(col) = rays.origins.col(r) + s.batch.t(i, r) * rays.directions.col(r);
      s.directions.col(col) = rays.directions.col(r);
    }
  }
  s.batch.density.resize(n, r_count);
  s.batch.color.resize(3, r_count * n);
  return s;
}

template <typename T>
void store_outputs(RaySampleBatch<T>& batch, const FieldOutputs<T>& out, Eigen::Index first_col) {
  const Eigen::Index n = batch.samples();
  for (Eigen::Index j = 0; j < out.density.cols(); ++j) {
    const Eigen::Index col = first_col + j;
    batch.density(col % n, col / n) = out.density(0, j);
  }
  batch.color.middleCols(first_col, out.color.cols()) = out.color;
}

}  // namespace

std::vector<double> sample_stratified(const Ray& ray, int n, std::mt19937_64* jitter) {
  if (n < 2) throw ConfigError("stratified sampling needs n >= 2");
  if (!(ray.near >= 0.0 && ray.near < ray.far)) throw DomainError("ray needs 0 <= near < far");
  std::vector<double> t(static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double bin = (ray.far - ray.near) / n;
  for (int i = 0; i < n; ++i) {
    const double u = jitter ? unit(*jitter) : 0.5;
    t[static_cast<std::size_t>(i)] = ray.near + (i + u) * bin;
  }
  return t;
}

template <typename T>
CompositeResult<T> composite(RaySampleBatch<T>& s, const Eigen::Matrix<T, 3, 1>& background) {
  const Eigen::Index n = s.samples();
  const Eigen::Index r_count = s.rays();
  if (s.delta.rows() != n || s.delta.cols() != r_count || s.density.rows() != n ||
      s.density.cols() != r_count || s.color.cols() != n * r_count) {
    throw ContractError("composite: sample arrays have inconsistent shapes");
  }
  if (!s.density.allFinite() || (s.density.array() < T(0)).any()) {
    throw ContractError("composite: densities must be finite and non-negative");
  }

  s.transmittance.resize(n + 1, r_count);
  s.weights.resize(n, r_count);
  CompositeResult<T> out;
  out.rgb.resize(3, r_count);
  out.accumulation.resize(r_count);
  out.depth.resize(r_count);
  out.depth_valid.assign(static_cast<std::size_t>(r_count), 0);

  for (Eigen::Index r = 0; r < r_count; ++r) {
    T optical = T(0);
    s.transmittance(0, r) = T(1);
    Eigen::Matrix<T, 3, 1> rgb = Eigen::Matrix<T, 3, 1>::Zero();
    T acc = T(0);
    T depth = T(0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const T tau = s.density(i, r) * s.delta(i, r);
      const T w = s.transmittance(i, r) * -std::expm1(-tau);
      optical += tau;
      s.transmittance(i + 1, r) = std::exp(-optical);
      s.weights(i, r) = w;
      rgb += w * s.color.col(r * n + i);
      acc += w;
      depth += w * s.t(i, r);
    }
    rgb += s.transmittance(n, r) * background;
    out.rgb.col(r) = rgb;
    out.accumulation[r] = acc;
    if (acc > T(1e-6)) {
      out.depth[r] = depth / acc;
      out.depth_valid[static_cast<std::size_t>(r)] = 1;
    } else {
      out.depth[r] = T(0);
    }
  }
  return out;
}

template <typename T>
CompositeGradients<T> composite_backward(const RaySampleBatch<T>& s,
                                         const Matrix3X<T>& rgb_gradient,
                                         const MatrixX<T>& weight_gradient,
                                         const Eigen::Matrix<T, 3, 1>& background) {
  if (!s.has_forward_state()) {
    throw ContractError("composite_backward: composite() has not been run on this batch");
  }
  const Eigen::Index n = s.samples();
  const Eigen::Index r_count = s.rays();
  if (rgb_gradient.cols() != r_count) {
    throw ContractError("composite_backward: rgb gradient has wrong batch size");
  }
  const bool has_wg = weight_gradient.size() != 0;
  if (has_wg && (weight_gradient.rows() != n || weight_gradient.cols() != r_count)) {
    throw ContractError("composite_backward: weight gradient has wrong shape");
  }

  CompositeGradients<T> g;
  g.density.resize(n, r_count);
  g.color.resize(3, n * r_count);
  std::vector<T> dw(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < r_count; ++r) {
    const Eigen::Matrix<T, 3, 1> grgb = rgb_gradient.col(r);
    for (Eigen::Index i = 0; i < n; ++i) {
      dw[static_cast<std::size_t>(i)] =
          grgb.dot(s.color.col(r * n + i)) + (has_wg ? weight_gradient(i, r) : T(0));
      g.color.col(r * n + i) = s.weights(i, r) * grgb;
    }
    // Raising sigma_k scales every later transmittance (and the background
    // term) by exp(-delta_k * d sigma).
    T later = s.transmittance(n, r) * grgb.dot(background);
    for (Eigen::Index k = n - 1; k >= 0; --k) {
      const auto kk = static_cast<std::size_t>(k);
      g.density(k, r) = s.delta(k, r) * (s.transmittance(k + 1, r) * dw[kk] - later);
      later += s.weights(k, r) * dw[kk];
    }
  }
  return g;
}

template <typename T>
RenderPass<T> render_rays(const FieldParams<T>& field, const RayBatch<T>& rays,
                          const RenderSettings& settings, std::mt19937_64* rng,
                          bool keep_cache) {
  const int n = settings.samples_per_ray;
  auto sampled = sample_rays(rays, n, rng);
  RenderPass<T> pass;
  pass.samples = std::move(sampled.batch);

  const Eigen::Index r_count = rays.size();
  const Eigen::Index task_rays = std::max(1, settings.task_rays);
  const auto tasks = static_cast<std::size_t>((r_count + task_rays - 1) / task_rays);
  if (keep_cache) pass.caches.resize(tasks);
  std::vector<FieldOutputs<T>> outputs(tasks);

  parallel_for(tasks, [&](std::size_t task) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(task) * task_rays;
    const Eigen::Index r1 = std::min(r_count, r0 + task_rays);
    const Eigen::Index c0 = r0 * n;
    const Eigen::Index cols = (r1 - r0) * n;
    const Matrix3X<T> pos = sampled.positions.middleCols(c0, cols);
    const Matrix3X<T> dir = sampled.directions.middleCols(c0, cols);
    outputs[task] = field_forward(field, pos, dir, keep_cache ? &pass.caches[task] : nullptr);
  });
  for (std::size_t task = 0; task < tasks; ++task) {
    store_outputs(pass.samples, outputs[task], static_cast<Eigen::Index>(task) * task_rays * n);
  }
  pass.result = composite(pass.samples, Eigen::Matrix<T, 3, 1>(settings.background.cast<T>()));
  return pass;
}

template <typename T>
void render_rays_backward(const FieldParams<T>& field, const RenderPass<T>& pass,
                          const Matrix3X<T>& rgb_gradient, const MatrixX<T>& weight_gradient,
                          const RenderSettings& settings, FieldParams<T>& gradients) {
  const Eigen::Index n = pass.samples.samples();
  const Eigen::Index r_count = pass.samples.rays();
  const Eigen::Index task_rays = std::max(1, settings.task_rays);
  const auto tasks = static_cast<std::size_t>((r_count + task_rays - 1) / task_rays);
  if (pass.caches.size() != tasks) {
    throw ContractError("render_rays_backward: forward pass was run without keep_cache");
  }
  const auto cg = composite_backward(pass.samples, rgb_gradient, weight_gradient,
                                     Eigen::Matrix<T, 3, 1>(settings.background.cast<T>()));

  std::vector<FieldParams<T>> partial(tasks);
  parallel_for(tasks, [&](std::size_t task) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(task) * task_rays;
    const Eigen::Index r1 = std::min(r_count, r0 + task_rays);
    const Eigen::Index cols = (r1 - r0) * n;
    FieldOutputs<T> og;
    og.density.resize(1, cols);
    for (Eigen::Index r = r0; r < r1; ++r) {
      for (Eigen::Index i = 0; i < n; ++i) og.density(0, (r - r0) * n + i) = cg.density(i, r);
    }
    og.color = cg.color.middleCols(r0 * n, cols);
    partial[task] = FieldParams<T>::zeros(field.config);
    field_backward(field, pass.caches[task], og, partial[task]);
  });
  for (const auto& p : partial) gradients += p;
}

template <typename T>
RayBatch<T> camera_rays(const Intrinsics& camera, const Pose& pose, DepthRange range) {
  camera.validate();
  RayBatch<T> rays;
  rays.resize(static_cast<Eigen::Index>(camera.width) * camera.height);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      rays.set(static_cast<Eigen::Index>(y) * camera.width + x,
               ray_for_pixel(camera, pose, {double(x), double(y)}, range));
    }
  }
  return rays;
}

namespace {

void wrap_numeric(const Intrinsics& camera, Eigen::Index first, Eigen::Index last,
                  const NumericError& e) {
  std::ostringstream msg;
  msg << e.what() << " while rendering pixels (" << first % camera.width << ", "
      << first / camera.width << ") .. (" << (last - 1) % camera.width << ", "
      << (last - 1) / camera.width << ")";
  throw NumericError(msg.str());
}

RenderedImage assemble(const Intrinsics& camera, const RenderOptions& options,
                       const std::function<CompositeResult<float>(const RayBatch<float>&)>& chunk_fn,
                       const Pose& pose) {
  const auto rays = camera_rays<float>(camera, pose, options.range);
  RenderedImage img;
  img.rgb = Image(camera.width, camera.height, 3);
  img.depth = Image(camera.width, camera.height, 1);
  img.accumulation = Image(camera.width, camera.height, 1);
  const Eigen::Index total = rays.size();
  const Eigen::Index chunk = std::max(1, options.chunk_rays);
  for (Eigen::Index first = 0; first < total; first += chunk) {
    const Eigen::Index last = std::min(total, first + chunk);
    RayBatch<float> part;
    part.origins = rays.origins.middleCols(first, last - first);
    part.directions = rays.directions.middleCols(first, last - first);
    part.near = rays.near.segment(first, last - first);
    part.far = rays.far.segment(first, last - first);
    CompositeResult<float> res;
    try {
      res = chunk_fn(part);
    } catch (const NumericError& e) {
      wrap_numeric(camera, first, last, e);
    }
    for (Eigen::Index i = first; i < last; ++i) {
      const Eigen::Index j = i - first;
      for (int c = 0; c < 3; ++c) img.rgb.data[static_cast<std::size_t>(i) * 3 + c] = res.rgb(c, j);
      img.depth.data[static_cast<std::size_t>(i)] =
          res.depth_valid[static_cast<std::size_t>(j)] ? res.depth[j]
                                                       : std::numeric_limits<float>::infinity();
      img.accumulation.data[static_cast<std::size_t>(i)] = res.accumulation[j];
    }
  }
  return img;
}

}  // namespace

RenderedImage render_image(const FieldEvaluator<float>& field, const Intrinsics& camera,
                           const Pose& pose, const RenderOptions& options) {
  return assemble(
      camera, options,
      [&](const RayBatch<float>& rays) {
        auto sampled = sample_rays(rays, options.settings.samples_per_ray, nullptr);
        const auto out = field(sampled.positions, sampled.directions);
        if (out.density.cols() != sampled.positions.cols() ||
            out.color.cols() != sampled.positions.cols()) {
          throw ContractError("field evaluator returned a batch of the wrong size");
        }
        store_outputs(sampled.batch, out, 0);
        return composite(sampled.batch,
                         Eigen::Vector3f(options.settings.background.cast<float>()));
      },
      pose);
}

RenderedImage render_image(const FieldParams<float>& field, const Intrinsics& camera,
                           const Pose& pose, const RenderOptions& options) {
  return assemble(
      camera, options,
      [&](const RayBatch<float>& rays) {
        return render_rays(field, rays, options.settings, nullptr, false).result;
      },
      pose);
}

#define PANERF_INSTANTIATE_RENDERER(T)                                                        \
  template CompositeResult<T> composite<T>(RaySampleBatch<T>&, const Eigen::Matrix<T, 3, 1>&); \
  template CompositeGradients<T> composite_backward<T>(                                       \
      const RaySampleBatch<T>&, const Matrix3X<T>&, const MatrixX<T>&,                        \
      const Eigen::Matrix<T, 3, 1>&);                                                         \
  template RenderPass<T> render_rays<T>(const FieldParams<T>&, const RayBatch<T>&,            \
                                        const RenderSettings&, std::mt19937_64*, bool);       \
  template void render_rays_backward<T>(const FieldParams<T>&, const RenderPass<T>&,          \
                                        const Matrix3X<T>&, const MatrixX<T>&,                \
                                        const RenderSettings&, FieldParams<T>&);              \
  template RayBatch<T> camera_rays<T>(const Intrinsics&, const Pose&, DepthRange);

PANERF_INSTANTIATE_RENDERER(float)
PANERF_INSTANTIATE_RENDERER(double)

#undef PANERF_INSTANTIATE_RENDERER

}  // namespace panerf
