#include "panerf/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "panerf/error.hpp"
#include "panerf/parallel.hpp"

namespace panerf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

struct Splat {
  std::size_t source;
  double depth;
  int x0, y0;
  double fx, fy;
};

// Source depths at the four integer neighbours of q (clamped at the border)
// and their bilinear weights. False when q is outside the image.
bool neighbour_depths(const DepthMap& depth, PixelCoord q, float d[4], double wt[4]) {
  constexpr double kSlack = 1e-6;
  if (!(q.u >= -kSlack && q.v >= -kSlack && q.u <= depth.width - 1 + kSlack &&
        q.v <= depth.height - 1 + kSlack)) {
    return false;
  }
  const int x0 = std::clamp(int(std::floor(q.u)), 0, depth.width - 1);
  const int y0 = std::clamp(int(std::floor(q.v)), 0, depth.height - 1);
  const int x1 = std::min(x0 + 1, depth.width - 1);
  const int y1 = std::min(y0 + 1, depth.height - 1);
  const double a = std::clamp(q.u - x0, 0.0, 1.0);
  const double b = std::clamp(q.v - y0, 0.0, 1.0);
  d[0] = depth.at(x0, y0);
  d[1] = depth.at(x1, y0);
  d[2] = depth.at(x0, y1);
  d[3] = depth.at(x1, y1);
  wt[0] = (1 - a) * (1 - b);
  wt[1] = a * (1 - b);
  wt[2] = (1 - a) * b;
  wt[3] = a * b;
  return true;
}

constexpr double kNegligibleWeight = 1e-6;

bool finite_depth(float d) { return std::isfinite(d) && d > 0.0f; }

// Target pixel centre ray at target depth z, seen from the source: it must
// land among four valid source depths whose bilinear interpolation matches
// its own depth.
bool surface_consistent(const DepthMap& depth, const Intrinsics& camera, const RigidTransform& back,
                        PixelCoord px, double z, double band) {
  const auto proj = project_camera_point(camera, back.apply(z * camera_point_at_unit_depth(camera, px)));
  if (!proj) return false;
  float d[4];
  double wt[4];
  if (!neighbour_depths(depth, proj->pixel, d, wt)) return false;
  double interp = 0.0, total = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (wt[k] < kNegligibleWeight) continue;
    if (!finite_depth(d[k])) return false;
    interp += wt[k] * d[k];
    total += wt[k];
  }
  interp /= total;
  return std::abs(proj->depth - interp) <= band * interp;
}

// Target pixel centre ray marched from near_depth to infinity in inverse
// depth: background is confirmed only if the ray never passes behind a
// surface the source saw.
bool background_consistent(const DepthMap& depth, const Intrinsics& camera,
                           const RigidTransform& back, PixelCoord px, double near_depth,
                           double band, int steps) {
  const Vec3 o = back.translation;
  const Vec3 d = back.rotation * camera_point_at_unit_depth(camera, px);
  for (int i = 0; i <= steps; ++i) {
    // Homogeneous point u * o + d is the target point at depth 1/u.
    const double u = (double(i) / steps) / near_depth;
    const Vec3 h = u * o + d;
    if (!(-h.z() > 0.0)) continue;
    const PixelCoord q{camera.cx + camera.fx * h.x() / -h.z(), camera.cy - camera.fy * h.y() / -h.z()};
    float nd[4];
    double wt[4];
    if (!neighbour_depths(depth, q, nd, wt)) continue;
    const double zs = u > 0.0 ? -h.z() / u : kInf;
    for (int k = 0; k < 4; ++k) {
      if (wt[k] >= kNegligibleWeight && finite_depth(nd[k]) && double(nd[k]) < zs * (1.0 - band)) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

DepthMap::DepthMap(int w, int h, float fill)
    : width(w), height(h), depth(static_cast<std::size_t>(w) * h, fill) {}

bool DepthMap::valid(int x, int y) const {
  const float d = at(x, y);
  return std::isfinite(d) && d > 0.0f;
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (float d : depth) n += (std::isfinite(d) && d > 0.0f) ? 1 : 0;
  return n;
}

double WarpStats::hole_fraction() const {
  return total_pixels == 0 ? 0.0 : static_cast<double>(holes) / static_cast<double>(total_pixels);
}

ScatterAccumulator::ScatterAccumulator(int w, int h, int c)
    : width(w),
      height(h),
      channels(c),
      color(static_cast<std::size_t>(w) * h * c, 0.0),
      weight(static_cast<std::size_t>(w) * h, 0.0),
      min_depth(static_cast<std::size_t>(w) * h, kInf) {}

std::optional<WarpTarget> warp_pixel(PixelCoord px, double depth, const Intrinsics& camera,
                                     const RigidTransform& transform, double min_depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw DomainError("warp_pixel needs depth > 0");
  const Vec3 p = transform.apply(depth * camera_point_at_unit_depth(camera, px));
  const auto proj = project_camera_point(camera, p, min_depth);
  if (!proj) return std::nullopt;
  return WarpTarget{{snap(proj->pixel.u), snap(proj->pixel.v)}, proj->depth};
}

WarpResult forward_warp(const Image& image, const DepthMap& depth, const Intrinsics& camera,
                        const RigidTransform& transform, const WarpPolicy& policy,
                        const std::vector<Image>& extra_channels) {
  const int w = image.width;
  const int h = image.height;
  if (depth.width != w || depth.height != h) {
    throw ContractError("forward_warp: image and depth map differ in size");
  }
  if (camera.width != w || camera.height != h) {
    throw ContractError("forward_warp: intrinsics do not match the image size");
  }
  for (const auto& e : extra_channels) {
    if (e.width != w || e.height != h) {
      throw ContractError("forward_warp: extra channel differs in size");
    }
  }

  WarpResult out;
  out.stats.total_pixels = image.pixel_count();

  // Pass 0: project every source pixel.
  std::vector<Splat> splats;
  splats.reserve(image.pixel_count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t src = static_cast<std::size_t>(y) * w + x;
      const PixelCoord px{double(x), double(y)};
      PixelCoord target;
      double z = kInf;
      if (depth.valid(x, y)) {
        const auto t = warp_pixel(px, depth.at(x, y), camera, transform);
        if (!t) {
          ++out.stats.behind_camera;
          continue;
        }
        target = t->pixel;
        z = t->depth;
      } else if (policy.scatter_background) {
        const Vec3 dir = transform.rotation * camera_point_at_unit_depth(camera, px);
        const auto proj = project_camera_point(camera, dir);
        if (!proj) {
          ++out.stats.behind_camera;
          continue;
        }
        target = {snap(proj->pixel.u), snap(proj->pixel.v)};
      } else {
        ++out.stats.invalid_depth;
        continue;
      }
      const double fu = std::floor(target.u);
      const double fv = std::floor(target.v);
      if (fu < -1.0 || fv < -1.0 || fu > w - 1 || fv > h - 1) {
        ++out.stats.outside;
        continue;
      }
      splats.push_back({src, z, int(fu), int(fv), target.u - fu, target.v - fv});
      ++out.stats.scattered;
    }
  }

  auto for_each_neighbour = [&](const Splat& s, auto&& fn) {
    const double wx[2] = {1.0 - s.fx, s.fx};
    const double wy[2] = {1.0 - s.fy, s.fy};
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int tx = s.x0 + dx;
        const int ty = s.y0 + dy;
        const double wt = wx[dx] * wy[dy];
        if (wt <= 0.0 || tx < 0 || ty < 0 || tx >= w || ty >= h) continue;
        // The splat covers the pixel centre when that pixel is its nearest neighbour.
        const bool covers = (dx == 0 ? s.fx <= 0.5 : s.fx > 0.5) &&
                            (dy == 0 ? s.fy <= 0.5 : s.fy > 0.5);
        fn(static_cast<std::size_t>(ty) * w + tx, wt, covers);
      }
    }
  };

  // Pass 1: z-buffer. Splats covering a pixel centre decide its nearest
  // surface; pixels no splat covers fall back to the nearest contribution.
  ScatterAccumulator acc(w, h, image.channels);
  std::vector<double> any_depth(image.pixel_count(), kInf);
  for (const auto& s : splats) {
    for_each_neighbour(s, [&](std::size_t t, double, bool covers) {
      if (covers) acc.min_depth[t] = std::min(acc.min_depth[t], s.depth);
      any_depth[t] = std::min(any_depth[t], s.depth);
    });
  }
  for (std::size_t t = 0; t < acc.min_depth.size(); ++t) {
    if (acc.min_depth[t] == kInf) acc.min_depth[t] = any_depth[t];
  }

  // Pass 2: blend contributions inside the depth band, in source order.
  const int extra_n = static_cast<int>(extra_channels.size());
  std::vector<double> extra_acc(image.pixel_count() * static_cast<std::size_t>(extra_n), 0.0);
  for (const auto& s : splats) {
    for_each_neighbour(s, [&](std::size_t t, double wt, bool) {
      const double nearest = acc.min_depth[t];
      const bool accept = nearest == kInf ? s.depth == kInf
                                          : s.depth <= nearest * (1.0 + policy.depth_band);
      if (!accept) return;
      acc.weight[t] += wt;
      for (int c = 0; c < image.channels; ++c) {
        acc.color[t * image.channels + c] += wt * image.data[s.source * image.channels + c];
      }
      for (int e = 0; e < extra_n; ++e) {
        extra_acc[t * extra_n + e] += wt * extra_channels[e].data[s.source];
      }
    });
  }

  out.image = Image(w, h, image.channels);
  out.validity = Mask(w, h);
  for (int e = 0; e < extra_n; ++e) out.extra.emplace_back(w, h, 1);
  const RigidTransform back = transform.inverse();
  double near_depth = kInf;
  for (float d : depth.depth) {
    if (finite_depth(d)) near_depth = std::min(near_depth, double(d));
  }
  near_depth = near_depth == kInf ? 1.0 : 0.1 * near_depth;
  const int march_steps = 2 * (w + h);
  for (std::size_t t = 0; t < image.pixel_count(); ++t) {
    if (acc.weight[t] < policy.min_weight) {
      ++out.stats.holes;
      continue;
    }
    if (policy.check_consistency) {
      const PixelCoord px{double(t % std::size_t(w)), double(t / std::size_t(w))};
      const bool ok = acc.min_depth[t] == kInf
                          ? background_consistent(depth, camera, back, px, near_depth,
                                                  policy.depth_band, march_steps)
                          : surface_consistent(depth, camera, back, px, acc.min_depth[t],
                                               policy.depth_band);
      if (!ok) {
        ++out.stats.inconsistent;
        ++out.stats.holes;
        continue;
      }
    }
    out.validity.data[t] = 1;
    for (int c = 0; c < image.channels; ++c) {
      out.image.data[t * image.channels + c] =
          static_cast<float>(acc.color[t * image.channels + c] / acc.weight[t]);
    }
    for (int e = 0; e < extra_n; ++e) {
      out.extra[e].data[t] = static_cast<float>(extra_acc[t * extra_n + e] / acc.weight[t]);
    }
  }
  return out;
}

Mask saliency_from_depth(const DepthMap& depth, const BackgroundRule& rule, bool* degenerate) {
  if (degenerate) *degenerate = false;
  Mask mask(depth.width, depth.height);
  double threshold = kInf;
  switch (rule.kind) {
    case BackgroundRule::Kind::finite_depth:
      break;
    case BackgroundRule::Kind::fixed_distance:
      threshold = rule.value;
      break;
    case BackgroundRule::Kind::percentile: {
      if (rule.value < 0.0 || rule.value > 100.0) {
        throw ConfigError("saliency percentile must be within [0, 100]");
      }
      std::vector<float> valid;
      for (float d : depth.depth) {
        if (std::isfinite(d) && d > 0.0f) valid.push_back(d);
      }
      if (valid.empty()) return mask;
      std::sort(valid.begin(), valid.end());
      if (valid.front() == valid.back()) {
        if (degenerate) *degenerate = true;
        return Mask(depth.width, depth.height, true);
      }
      const double pos = rule.value / 100.0 * static_cast<double>(valid.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, valid.size() - 1);
      threshold = valid[lo] + (pos - double(lo)) * (valid[hi] - valid[lo]);
      break;
    }
  }
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      mask.set(x, y, depth.valid(x, y) && (threshold == kInf || depth.at(x, y) < threshold));
    }
  }
  return mask;
}

Mask DepthSaliency::compute(const Image&, const DepthMap& depth, const std::optional<Mask>&) const {
  return saliency_from_depth(depth, rule_);
}

Mask SuppliedMaskSaliency::compute(const Image& image, const DepthMap&,
                                   const std::optional<Mask>& supplied_mask) const {
  if (!supplied_mask) throw DataError("saliency provider 'mask' needs a mask for every frame");
  if (supplied_mask->width != image.width || supplied_mask->height != image.height) {
    throw DataError("supplied saliency mask differs in size from its image");
  }
  return *supplied_mask;
}

std::vector<PseudoView> generate_pseudo_views(const std::vector<SourceView>& inputs,
                                              const Intrinsics& camera,
                                              const AugmentConfig& config,
                                              const SaliencyProvider& saliency) {
  if (inputs.empty()) throw ContractError("pseudo-view generation needs at least one input");
  const auto angles = pose_grid_angles(config.alpha_deg, config.step_deg);
  std::vector<PseudoView> views(inputs.size() * angles.size());

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& src = inputs[i];
    src.pose.validate();
    const Mask fg = saliency.compute(src.image, src.depth, src.mask);
    Image fg_channel(fg.width, fg.height, 1);
    for (std::size_t p = 0; p < fg.pixel_count(); ++p) fg_channel.data[p] = fg.data[p] ? 1.0f : 0.0f;
    const std::vector<Image> extra{fg_channel};

    parallel_for(angles.size(), [&](std::size_t a) {
      PseudoView& view = views[i * angles.size() + a];
      view.source_id = i;
      view.angles_deg = angles[a];
      view.pose = perturb_pose(src.pose, angles[a], config.pivot);
      auto warped = forward_warp(src.image, src.depth, camera,
                                 compose_relative(src.pose, view.pose), config.policy, extra);
      view.image = std::move(warped.image);
      view.validity = std::move(warped.validity);
      view.saliency = Mask(view.validity.width, view.validity.height);
      for (std::size_t p = 0; p < view.validity.pixel_count(); ++p) {
        view.saliency.data[p] = (view.validity.data[p] && warped.extra[0].data[p] >= 0.5f) ? 1 : 0;
      }
      view.hole_fraction = warped.stats.hole_fraction();
    });
  }
  return views;
}

}  // namespace panerf
