#include "panerf/field.hpp"

#include <cmath>
#include <sstream>

#include "panerf/error.hpp"

namespace panerf {

namespace {

template <typename T>
T softplus(T z) {
  // log(1 + e^z) without overflow.
  return z > T(20) ? z : std::log1p(std::exp(z));
}

template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
void check_finite(const MatrixX<T>& m, const std::string& layer) {
  if (!m.allFinite()) throw NumericError("non-finite activations in field layer '" + layer + "'");
}

template <typename T>
MatrixX<T> affine(const DenseLayer<T>& layer, const MatrixX<T>& in) {
  MatrixX<T> out = layer.weight * in;
  out.colwise() += layer.bias;
  return out;
}

template <typename T>
void add_layer_grad(DenseLayer<T>& g, const MatrixX<T>& dz, const MatrixX<T>& in) {
  g.weight.noalias() += dz * in.transpose();
  g.bias.noalias() += dz.rowwise().sum();
}

std::string trunk_name(int i) { return "trunk." + std::to_string(i); }

// Rays share one direction across all their samples; encode each run of
// identical columns once.
template <typename T>
MatrixX<T> encode_repeated(const Matrix3X<T>& input, int frequencies, bool include_input) {
  const Eigen::Index n = input.cols();
  const int rows = 3 * ((include_input ? 1 : 0) + 2 * frequencies);
  MatrixX<T> out(rows, n);
  Eigen::Index j = 0;
  while (j < n) {
    Eigen::Index end = j + 1;
    while (end < n && input.col(end) == input.col(j)) ++end;
    const Matrix3X<T> one = input.col(j);
    const MatrixX<T> enc = encode<T>(one, frequencies, include_input);
    for (Eigen::Index k = j; k < end; ++k) out.col(k) = enc.col(0);
    j = end;
  }
  return out;
}

}  // namespace

FieldConfig FieldConfig::desk_scale() {
  FieldConfig c;
  c.depth = 2;
  c.width = 32;
  c.skip_layer = -1;
  return c;
}

void FieldConfig::validate() const {
  if (encoding.position_frequencies < 0 || encoding.direction_frequencies < 0) {
    throw ConfigError("encoding frequency counts must be >= 0");
  }
  if (encoding.position_size() == 0 || encoding.direction_size() == 0) {
    throw ConfigError("encoding produces no features");
  }
  if (depth < 1 || width < 2) throw ConfigError("field needs depth >= 1 and width >= 2");
  if (skip_layer >= 0 && skip_layer + 1 >= depth) {
    throw ConfigError("skip layer must be followed by another trunk layer");
  }
}

template <typename T>
MatrixX<T> encode(const Matrix3X<T>& input, int frequencies, bool include_input) {
  const Eigen::Index n = input.cols();
  const int rows = 3 * ((include_input ? 1 : 0) + 2 * frequencies);
  MatrixX<T> out(rows, n);
  const int base = include_input ? 3 : 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    T* col = out.col(j).data();
    for (int d = 0; d < 3; ++d) {
      const double x = static_cast<double>(input(d, j));
      if (include_input) col[d] = input(d, j);
      // Double-angle recurrence in double precision; drift after k doublings
      // is about 2^k ulp, far below float resolution for k <= 16.
      double s = std::sin(x);
      double c = std::cos(x);
      for (int k = 0; k < frequencies; ++k) {
        col[base + 6 * k + d] = static_cast<T>(s);
        col[base + 6 * k + 3 + d] = static_cast<T>(c);
        const double s2 = 2.0 * s * c;
        c = (c - s) * (c + s);
        s = s2;
      }
    }
  }
  return out;
}

template <typename T>
FieldParams<T> FieldParams<T>::zeros(const FieldConfig& config) {
  config.validate();
  FieldParams p;
  p.config = config;
  const int pos = config.encoding.position_size();
  const int dir = config.encoding.direction_size();
  const int w = config.width;
  auto add = [&](std::string name, int out, int in) {
    p.layers.push_back({std::move(name), MatrixX<T>::Zero(out, in), VectorX<T>::Zero(out)});
  };
  for (int i = 0; i < config.depth; ++i) {
    int in = w;
    if (i == 0) in = pos;
    if (config.skip_layer >= 0 && i == config.skip_layer + 1) in = w + pos;
    add(trunk_name(i), w, in);
  }
  add("density", 1, w);
  add("feature", w, w);
  add("color_hidden", w / 2, w + dir);
  add("color", 3, w / 2);
  return p;
}

template <typename T>
FieldParams<T> FieldParams<T>::initialized(const FieldConfig& config, std::mt19937_64& rng) {
  FieldParams p = zeros(config);
  for (auto& layer : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = T(dist(rng));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = T(dist(rng));
  }
  return p;
}

template <typename T>
std::size_t FieldParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

template <typename T>
bool FieldParams<T>::same_shape(const FieldParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
        layers[i].weight.cols() != other.layers[i].weight.cols() ||
        layers[i].bias.size() != other.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

template <typename T>
bool FieldParams<T>::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

template <typename T>
void FieldParams<T>::set_zero() {
  for (auto& l : layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

template <typename T>
FieldParams<T>& FieldParams<T>::operator+=(const FieldParams& other) {
  if (!same_shape(other)) throw ContractError("adding field parameters of different shapes");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

template <typename T>
void FieldParams<T>::for_each_tensor(
    const std::function<void(const std::string&, T*, std::size_t)>& fn) {
  for (auto& l : layers) {
    fn(l.name + ".weight", l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    fn(l.name + ".bias", l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

template <typename T>
void FieldParams<T>::for_each_tensor(
    const std::function<void(const std::string&, const T*, std::size_t)>& fn) const {
  for (const auto& l : layers) {
    fn(l.name + ".weight", l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    fn(l.name + ".bias", l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

template <typename T>
FieldOutputs<T> field_forward(const FieldParams<T>& params, const Matrix3X<T>& positions,
                              const Matrix3X<T>& directions, FieldCache<T>* cache) {
  if (positions.cols() != directions.cols()) {
    throw ContractError("field_forward: positions and directions differ in batch size");
  }
  const auto& cfg = params.config;
  if (params.layers.size() != static_cast<std::size_t>(cfg.depth) + 4) {
    throw ContractError("field_forward: parameter list does not match config");
  }

  FieldCache<T> local;
  FieldCache<T>& c = cache ? *cache : local;
  c.position_features =
      encode<T>(positions, cfg.encoding.position_frequencies, cfg.encoding.include_input);
  c.direction_features = encode_repeated(directions, cfg.encoding.direction_frequencies,
                                         cfg.encoding.include_input);
  c.trunk_inputs.assign(static_cast<std::size_t>(cfg.depth), {});
  c.trunk_pre.assign(static_cast<std::size_t>(cfg.depth), {});

  MatrixX<T> h = c.position_features;
  for (int i = 0; i < cfg.depth; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (cfg.skip_layer >= 0 && i == cfg.skip_layer + 1) {
      MatrixX<T> joined(h.rows() + c.position_features.rows(), h.cols());
      joined << h, c.position_features;
      h = std::move(joined);
    }
    c.trunk_inputs[idx] = std::move(h);
    c.trunk_pre[idx] = affine(params.layers[idx], c.trunk_inputs[idx]);
    check_finite(c.trunk_pre[idx], params.layers[idx].name);
    h = c.trunk_pre[idx].cwiseMax(T(0));
  }
  c.trunk_out = std::move(h);

  c.density_pre = affine(params.density(), c.trunk_out);
  check_finite(c.density_pre, "density");
  c.feature = affine(params.feature(), c.trunk_out);
  check_finite(c.feature, "feature");

  c.color_hidden_in.resize(c.feature.rows() + c.direction_features.rows(), c.feature.cols());
  c.color_hidden_in << c.feature, c.direction_features;
  c.color_hidden_pre = affine(params.color_hidden(), c.color_hidden_in);
  check_finite(c.color_hidden_pre, "color_hidden");
  c.color_hidden = c.color_hidden_pre.cwiseMax(T(0));
  const MatrixX<T> color_pre = affine(params.color(), c.color_hidden);
  check_finite(color_pre, "color");

  FieldOutputs<T> out;
  out.density = c.density_pre.unaryExpr([](T z) { return softplus(z); });
  out.color = color_pre.unaryExpr([](T z) { return sigmoid(z); });
  c.color = out.color;
  return out;
}

template <typename T>
void field_backward(const FieldParams<T>& params, const FieldCache<T>& c,
                    const FieldOutputs<T>& g, FieldParams<T>& grads) {
  const auto batch = c.trunk_out.cols();
  if (g.density.rows() != 1 || g.density.cols() != batch || g.color.rows() != 3 ||
      g.color.cols() != batch) {
    throw ContractError("field_backward: output gradients do not match the forward batch");
  }
  if (!grads.same_shape(params)) {
    throw ContractError("field_backward: gradient buffer shaped unlike parameters");
  }
  const auto& cfg = params.config;
  const std::size_t d = params.trunk_count();

  // colour head
  const MatrixX<T> dz_color =
      (g.color.array() * c.color.array() * (T(1) - c.color.array())).matrix();
  add_layer_grad(grads.layers[d + 3], dz_color, c.color_hidden);
  MatrixX<T> d_hidden = params.color().weight.transpose() * dz_color;
  d_hidden = (c.color_hidden_pre.array() > T(0)).select(d_hidden, T(0));
  add_layer_grad(grads.layers[d + 2], d_hidden, c.color_hidden_in);
  const MatrixX<T> d_hidden_in = params.color_hidden().weight.transpose() * d_hidden;
  const MatrixX<T> d_feature = d_hidden_in.topRows(c.feature.rows());
  add_layer_grad(grads.layers[d + 1], d_feature, c.trunk_out);
  MatrixX<T> dh = params.feature().weight.transpose() * d_feature;

  // density head: softplus' = sigmoid
  const MatrixX<T> dz_density =
      (g.density.array() * c.density_pre.unaryExpr([](T z) { return sigmoid(z); }).array())
          .matrix();
  add_layer_grad(grads.layers[d], dz_density, c.trunk_out);
  dh.noalias() += params.density().weight.transpose() * dz_density;

  for (int i = cfg.depth - 1; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    const MatrixX<T> dz = (c.trunk_pre[idx].array() > T(0)).select(dh, T(0));
    add_layer_grad(grads.layers[idx], dz, c.trunk_inputs[idx]);
    if (i == 0) break;
    MatrixX<T> d_in = params.layers[idx].weight.transpose() * dz;
    if (cfg.skip_layer >= 0 && i == cfg.skip_layer + 1) {
      dh = d_in.topRows(cfg.width);
    } else {
      dh = std::move(d_in);
    }
  }
}

template <typename T>
FieldParams<T> field_backward(const FieldParams<T>& params, const Matrix3X<T>& positions,
                              const Matrix3X<T>& directions,
                              const FieldOutputs<T>& output_gradients) {
  FieldCache<T> cache;
  field_forward(params, positions, directions, &cache);
  FieldParams<T> grads = FieldParams<T>::zeros(params.config);
  field_backward(params, cache, output_gradients, grads);
  return grads;
}

#define PANERF_INSTANTIATE_FIELD(T)                                                         \
  template MatrixX<T> encode<T>(const Matrix3X<T>&, int, bool);                             \
  template struct FieldParams<T>;                                                           \
  template FieldOutputs<T> field_forward<T>(const FieldParams<T>&, const Matrix3X<T>&,      \
                                            const Matrix3X<T>&, FieldCache<T>*);            \
  template void field_backward<T>(const FieldParams<T>&, const FieldCache<T>&,              \
                                  const FieldOutputs<T>&, FieldParams<T>&);                 \
  template FieldParams<T> field_backward<T>(const FieldParams<T>&, const Matrix3X<T>&,      \
                                            const Matrix3X<T>&, const FieldOutputs<T>&);

PANERF_INSTANTIATE_FIELD(float)
PANERF_INSTANTIATE_FIELD(double)

#undef PANERF_INSTANTIATE_FIELD

}  // namespace panerf
