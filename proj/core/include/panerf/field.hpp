#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace panerf {

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
/// One 3-vector per column.
template <typename T>
using Matrix3X = Eigen::Matrix<T, 3, Eigen::Dynamic>;

struct EncodingConfig {
  int position_frequencies = 10;
  int direction_frequencies = 4;
  bool include_input = true;

  int position_size() const { return 3 * ((include_input ? 1 : 0) + 2 * position_frequencies); }
  int direction_size() const { return 3 * ((include_input ? 1 : 0) + 2 * direction_frequencies); }
  bool operator==(const EncodingConfig&) const = default;
};

/// Sinusoidal features of every column of `input`: optionally the raw value,
/// then for k = 0..frequencies-1 the blocks sin(2^k x) and cos(2^k x), each
/// block holding the three components. Output rows: 3 * (include + 2 * frequencies).
template <typename T>
MatrixX<T> encode(const Matrix3X<T>& input, int frequencies, bool include_input);

/// MLP layout. The trunk has `depth` ReLU layers of `width` units; the layer
/// after `skip_layer` also receives the encoded position (-1 disables). The
/// density head is softplus(linear(h)); colour is
/// sigmoid(linear(relu(linear([linear(h), encoded direction])))).
struct FieldConfig {
  EncodingConfig encoding;
  int depth = 8;
  int width = 256;
  int skip_layer = 4;

  /// 2 x 32, no skip: the size used for fast experiments and tests.
  static FieldConfig desk_scale();
  void validate() const;
  bool operator==(const FieldConfig&) const = default;
};

template <typename T>
struct DenseLayer {
  std::string name;
  MatrixX<T> weight;  // out x in
  VectorX<T> bias;    // out
};

/// Ordered parameter store. Layers are trunk.0 .. trunk.{depth-1}, density,
/// feature, color_hidden, color.
template <typename T>
struct FieldParams {
  FieldConfig config;
  std::vector<DenseLayer<T>> layers;

  /// Shapes for `config`, all values zero.
  static FieldParams zeros(const FieldConfig& config);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static FieldParams initialized(const FieldConfig& config, std::mt19937_64& rng);

  std::size_t parameter_count() const;
  bool same_shape(const FieldParams& other) const;
  bool all_finite() const;
  void set_zero();
  FieldParams& operator+=(const FieldParams& other);

  /// Visits every tensor as (name, contiguous data, element count); biases
  /// are named "<layer>.bias" and weights "<layer>.weight".
  void for_each_tensor(const std::function<void(const std::string&, T*, std::size_t)>& fn);
  void for_each_tensor(
      const std::function<void(const std::string&, const T*, std::size_t)>& fn) const;

  template <typename U>
  FieldParams<U> cast() const {
    FieldParams<U> out;
    out.config = config;
    for (const auto& l : layers) {
      out.layers.push_back({l.name, l.weight.template cast<U>(), l.bias.template cast<U>()});
    }
    return out;
  }

  std::size_t trunk_count() const { return static_cast<std::size_t>(config.depth); }
  const DenseLayer<T>& density() const { return layers[trunk_count()]; }
  const DenseLayer<T>& feature() const { return layers[trunk_count() + 1]; }
  const DenseLayer<T>& color_hidden() const { return layers[trunk_count() + 2]; }
  const DenseLayer<T>& color() const { return layers[trunk_count() + 3]; }
};

template <typename T>
struct FieldOutputs {
  MatrixX<T> density;  // 1 x B, >= 0
  MatrixX<T> color;    // 3 x B, in [0, 1]
};

/// Activations kept by field_forward for the backward pass.
template <typename T>
struct FieldCache {
  MatrixX<T> position_features;
  MatrixX<T> direction_features;
  std::vector<MatrixX<T>> trunk_inputs;  // input of each trunk layer
  std::vector<MatrixX<T>> trunk_pre;     // pre-activation of each trunk layer
  MatrixX<T> trunk_out;
  MatrixX<T> density_pre;
  MatrixX<T> feature;
  MatrixX<T> color_hidden_in;
  MatrixX<T> color_hidden_pre;
  MatrixX<T> color_hidden;
  MatrixX<T> color;
};

/// Evaluates the field on a batch. Throws NumericError naming the first layer
/// whose activations are not finite. When `cache` is given it receives
/// everything field_backward needs.
template <typename T>
FieldOutputs<T> field_forward(const FieldParams<T>& params, const Matrix3X<T>& positions,
                              const Matrix3X<T>& directions, FieldCache<T>* cache = nullptr);

/// Adds d(sum(outputs .* output_gradients))/d(params) into `gradients`.
template <typename T>
void field_backward(const FieldParams<T>& params, const FieldCache<T>& cache,
                    const FieldOutputs<T>& output_gradients, FieldParams<T>& gradients);

/// Convenience form that recomputes the forward pass and returns fresh gradients.
template <typename T>
FieldParams<T> field_backward(const FieldParams<T>& params, const Matrix3X<T>& positions,
                              const Matrix3X<T>& directions,
                              const FieldOutputs<T>& output_gradients);

}  // namespace panerf
