#include "panerf/losses.hpp"

#include <cmath>

#include "panerf/error.hpp"

namespace panerf {

PhotometricResult photometric_loss(const Eigen::Matrix3Xd& rendered,
                                   const Eigen::Matrix3Xd& reference,
                                   std::span<const std::uint8_t> validity,
                                   std::span<const std::uint8_t> saliency, double bg_weight) {
  const auto n = static_cast<std::size_t>(rendered.cols());
  if (static_cast<std::size_t>(reference.cols()) != n || validity.size() != n ||
      saliency.size() != n) {
    throw ContractError("photometric_loss: inputs differ in length");
  }
  PhotometricResult r;
  r.gradient = Eigen::Matrix3Xd::Zero(3, rendered.cols());
  double fg_sum = 0.0, bg_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!validity[i]) continue;
    const double e = (rendered.col(Eigen::Index(i)) - reference.col(Eigen::Index(i))).squaredNorm();
    if (saliency[i]) {
      fg_sum += e;
      ++r.foreground_count;
    } else {
      bg_sum += e;
      ++r.background_count;
    }
  }
  r.foreground_empty = r.foreground_count == 0;
  r.background_empty = r.background_count == 0;
  r.foreground = r.foreground_empty ? 0.0 : fg_sum / double(r.foreground_count);
  r.background = r.background_empty ? 0.0 : bg_sum / double(r.background_count);
  r.loss = r.foreground + bg_weight * r.background;

  const double fg_scale = r.foreground_empty ? 0.0 : 2.0 / double(r.foreground_count);
  const double bg_scale = r.background_empty ? 0.0 : 2.0 * bg_weight / double(r.background_count);
  for (std::size_t i = 0; i < n; ++i) {
    if (!validity[i]) continue;
    const auto c = Eigen::Index(i);
    r.gradient.col(c) = (saliency[i] ? fg_scale : bg_scale) * (rendered.col(c) - reference.col(c));
  }
  return r;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

MscResult msc_loss(const ImageBuffer<double>& synth, const ImageBuffer<double>& reference,
                   const EmbeddingProvider& provider, bool want_gradient) {
  if (!synth.same_shape(reference) || synth.channels != 3) {
    throw ContractError("msc_loss: images must be RGB and equally sized");
  }
  if (want_gradient && !provider.differentiable()) {
    throw ConfigError("msc_loss: gradients requested from a non-differentiable provider");
  }
  const int s = provider.input_size();
  MscResult r;
  if (want_gradient) r.gradient = ImageBuffer<double>(synth.width, synth.height, 3, 0.0);

  for (double fraction : provider.crop_fractions()) {
    const int cw = center_crop_extent(synth.width, fraction);
    const int ch = center_crop_extent(synth.height, fraction);
    if (cw < provider.min_crop() || ch < provider.min_crop()) {
      throw ConfigError("msc_loss: crop of " + std::to_string(cw) + "x" + std::to_string(ch) +
                        " is below the provider minimum of " +
                        std::to_string(provider.min_crop()));
    }
    r.crop_sizes.push_back(cw);
    const auto synth_in = resize_bilinear(center_crop(synth, fraction), s, s);
    const auto ref_in = resize_bilinear(center_crop(reference, fraction), s, s);
    const Eigen::VectorXd es = provider.embed(synth_in);
    const Eigen::VectorXd er = provider.embed(ref_in);
    const double sim = cosine_similarity(es, er);
    r.similarity.push_back(sim);
    r.loss += 1.0 - sim;

    if (!want_gradient) continue;
    const double ns = es.norm();
    const double nr = er.norm();
    if (ns == 0.0 || nr == 0.0) continue;
    // d(1 - cos)/d es
    const Eigen::VectorXd g = -(er / (ns * nr) - sim * es / (ns * ns));
    const auto g_in = provider.embed_backward(synth_in, g);
    const auto g_crop = resize_bilinear_adjoint(g_in, cw, ch);
    const int x0 = (synth.width - cw) / 2;
    const int y0 = (synth.height - ch) / 2;
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) {
        for (int c = 0; c < 3; ++c) r.gradient.at(x0 + x, y0 + y, c) += g_crop.at(x, y, c);
      }
    }
  }
  return r;
}

MscResult msc_loss_from_features(const FeatureSet& synth, const FeatureSet& reference) {
  if (synth.levels.size() != reference.levels.size() || synth.levels.empty()) {
    throw ContractError("feature sets differ in level count");
  }
  MscResult r;
  for (std::size_t l = 0; l < synth.levels.size(); ++l) {
    if (synth.levels[l].size() != reference.levels[l].size()) {
      throw ContractError("feature sets differ in dimension");
    }
    const double sim = cosine_similarity(synth.levels[l].cast<double>(),
                                         reference.levels[l].cast<double>());
    r.similarity.push_back(sim);
    r.loss += 1.0 - sim;
  }
  return r;
}

InformationPotentialResult ip_loss(const Eigen::MatrixXd& weights, double exclusion_eps) {
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw ContractError("ip_loss: weights must be finite and non-negative");
  }
  InformationPotentialResult r;
  r.gradient = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
  std::vector<double> potential(static_cast<std::size_t>(weights.cols()), 0.0);
  std::vector<double> sums(static_cast<std::size_t>(weights.cols()), 0.0);
  double total = 0.0;
  for (Eigen::Index ray = 0; ray < weights.cols(); ++ray) {
    const double sum = weights.col(ray).sum();
    if (!(sum >= exclusion_eps) || sum == 0.0) {
      ++r.excluded;
      continue;
    }
    ++r.included;
    const auto idx = static_cast<std::size_t>(ray);
    sums[idx] = sum;
    potential[idx] = (weights.col(ray) / sum).squaredNorm();
    total += potential[idx];
  }
  r.empty = r.included == 0;
  if (r.empty) return r;
  const double inv_r = 1.0 / double(r.included);
  r.loss = -total * inv_r;
  // d/dw_k sum_i (w_i/s)^2 = (2/s) (w_k/s - sum_i (w_i/s)^2)
  for (Eigen::Index ray = 0; ray < weights.cols(); ++ray) {
    const auto idx = static_cast<std::size_t>(ray);
    if (sums[idx] == 0.0) continue;
    const double s = sums[idx];
    r.gradient.col(ray) =
        -inv_r * (2.0 / s) * (weights.col(ray).array() / s - potential[idx]).matrix();
  }
  return r;
}

}  // namespace panerf
