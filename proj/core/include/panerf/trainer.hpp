#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "panerf/augment.hpp"
#include "panerf/checkpoint.hpp"
#include "panerf/embedding.hpp"
#include "panerf/field.hpp"
#include "panerf/geometry.hpp"
#include "panerf/renderer.hpp"
#include "panerf/scene.hpp"

namespace panerf {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  FieldParams<T> first_moment;
  FieldParams<T> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros(const FieldConfig& config);
};

/// One bias-corrected Adam update. Throws NumericError naming the first
/// tensor holding a non-finite gradient (parameters are left untouched).
template <typename T>
void optimizer_step(FieldParams<T>& params, const FieldParams<T>& gradients, AdamState<T>& state,
                    double learning_rate, const AdamConfig& adam = {});

/// Exponential decay to `final_factor` of the base rate over a stage.
double stage_learning_rate(double base, double final_factor, std::uint64_t iteration,
                           std::uint64_t stage_iterations);

/// One supervised image of the training set.
struct TrainView {
  Image image;
  Mask validity;
  Mask saliency;  // foreground flags; only read where validity holds
  Pose pose;
  bool pseudo = false;
};

/// A captured frame: every pixel valid, foreground from `saliency`.
TrainView real_view(const Frame& frame, const SaliencyProvider& saliency);
TrainView pseudo_view(const PseudoView& view);

struct TrainingSet {
  Intrinsics camera;
  DepthRange range{2.0, 6.0};
  Vec3 background = Vec3::Ones();
  std::vector<TrainView> real;
  std::vector<TrainView> pseudo;
  /// Held-out views whose PSNR is logged.
  std::vector<TrainView> probes;
};

enum class Stage : std::uint32_t { initialization = 0, finetune = 1, done = 2 };
const char* stage_name(Stage stage);

struct TrainConfig {
  FieldConfig field = FieldConfig::desk_scale();
  std::uint64_t init_iterations = 1000;
  std::uint64_t finetune_iterations = 4000;
  int rays_per_batch = 1024;
  int samples_per_ray = 64;
  bool jitter = true;
  double learning_rate = 5e-3;
  double lr_final_factor = 0.1;
  double lambda_msc = 0.1;
  double lambda_ip = 0.01;
  double bg_weight = 1.0;
  int msc_interval = 10;
  int msc_resolution = 24;  // width of the reduced render used for MSC
  /// Fraction of initialization rays drawn from pseudo-views; unset samples
  /// uniformly over every valid pixel.
  std::optional<double> pseudo_ratio;
  /// Extra rays per fine-tune batch, drawn from pseudo-view cameras without
  /// colour supervision, on which only the information potential acts.
  int ip_unseen_rays = 0;
  double ip_epsilon = 1e-6;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_interval = 500;
  std::uint64_t eval_interval = 500;
  std::uint64_t log_interval = 1;
  bool log_wall_time = true;
  int task_rays = 256;

  void validate() const;
  RenderSettings render_settings(const Vec3& background) const;
};

/// Optimiser, stage position and RNG: everything a resumed run needs.
struct TrainState {
  Stage stage = Stage::initialization;
  std::uint64_t iteration = 0;  // completed iterations in `stage`
  AdamState<float> adam;
  std::mt19937_64 rng;
  double best_probe_psnr = -1.0;
  std::uint64_t best_step = 0;

  static TrainState fresh(const TrainConfig& config);
  OptimizerSnapshot snapshot() const;
  static TrainState restore(const OptimizerSnapshot& snapshot);
};

/// Rays drawn for one iteration, with their supervision.
struct SampledRays {
  RayBatch<float> rays;
  Eigen::Matrix3Xd reference;
  std::vector<std::uint8_t> validity;
  std::vector<std::uint8_t> saliency;
  std::vector<std::uint8_t> pseudo;
  std::size_t real_count = 0;
  std::size_t pseudo_count = 0;
};

/// Index of valid pixels over a set of views for uniform sampling.
class PixelPool {
 public:
  PixelPool() = default;
  explicit PixelPool(const std::vector<const TrainView*>& views);

  std::size_t size() const { return total_; }
  bool empty() const { return total_ == 0; }
  /// (view, pixel) for a flat index in [0, size()).
  std::pair<const TrainView*, std::uint32_t> at(std::size_t index) const;

 private:
  std::vector<const TrainView*> views_;
  std::vector<std::vector<std::uint32_t>> pixels_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

/// Uniform over every valid pixel of `real` and `pseudo`. With a ratio, each
/// ray first picks the pseudo pool with that probability. Throws
/// ContractError when the pools hold no valid pixel.
SampledRays sample_ray_batch(const PixelPool& real, const PixelPool& pseudo,
                             const Intrinsics& camera, DepthRange range, std::size_t batch_size,
                             std::mt19937_64& rng, std::optional<double> pseudo_ratio = {});

/// Loss terms of one iteration. `total` is photometric + lambda_msc * msc +
/// lambda_ip * ip with the lambdas in effect for the stage.
struct LossBreakdown {
  double photometric = 0.0;
  double photometric_fg = 0.0;
  double photometric_bg = 0.0;
  double msc = 0.0;
  double ip = 0.0;
  double lambda_msc = 0.0;
  double lambda_ip = 0.0;
  double total = 0.0;
  std::size_t real_rays = 0;
  std::size_t pseudo_rays = 0;
  std::size_t fg_pixels = 0;
  std::size_t bg_pixels = 0;
  std::size_t ip_rays = 0;
  std::size_t ip_excluded = 0;
  bool msc_evaluated = false;

  double recombined() const { return photometric + lambda_msc * msc + lambda_ip * ip; }
};

struct IterationRecord {
  Stage stage = Stage::initialization;
  std::uint64_t iteration = 0;  // 1-based within the stage
  std::uint64_t step = 0;       // optimizer step
  double learning_rate = 0.0;
  LossBreakdown loss;
  std::optional<double> probe_psnr;
  double wall_time = 0.0;
};

/// Append-only CSV of IterationRecords.
class MetricsLog {
 public:
  static const std::vector<std::string>& columns(bool wall_time);

  /// Creates `path` with a header, or, when `resume_step` is set, keeps the
  /// existing header and every row whose step is <= resume_step.
  MetricsLog(const std::filesystem::path& path, bool wall_time,
             std::optional<std::uint64_t> resume_step = {});
  void append(const IterationRecord& record);
  static std::string format_row(const IterationRecord& record, bool wall_time);

 private:
  std::ofstream out_;
  bool wall_time_;
};

struct TrainHooks {
  MetricsLog* log = nullptr;
  /// Periodic checkpoints go to <dir>/step_<n>.ckpt and <dir>/latest.ckpt.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const IterationRecord&)> on_iteration;
};

/// Renders every probe view and returns their mean PSNR (nullopt without probes).
std::optional<double> probe_psnr(const FieldParams<float>& field, const TrainingSet& data,
                                 const TrainConfig& config);

/// Photometric-only optimisation on real and pseudo views, continuing from
/// state.iteration. Leaves the state at the start of the fine-tune stage.
void train_stage_init(FieldParams<float>& field, const TrainingSet& data,
                      const TrainConfig& config, TrainState& state, const TrainHooks& hooks = {});

/// Full objective on real views only. MSC runs every msc_interval iterations
/// on a reduced render of one real view (cycling through them); the
/// information potential acts on the batch weights.
void train_stage_finetune(FieldParams<float>& field, const TrainingSet& data,
                          const TrainConfig& config, TrainState& state,
                          const EmbeddingProvider& provider, const TrainHooks& hooks = {});

/// Runs whatever remains of both stages.
void train(FieldParams<float>& field, const TrainingSet& data, const TrainConfig& config,
           TrainState& state, const EmbeddingProvider& provider, const TrainHooks& hooks = {});

/// Mean information potential over a fixed, jitter-free set of `count` rays
/// drawn (with `seed`) from the real views.
double evaluate_ip(const FieldParams<float>& field, const TrainingSet& data,
                   const TrainConfig& config, std::size_t count, std::uint64_t seed);

}  // namespace panerf
