#include "panerf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "panerf/error.hpp"
#include "panerf/losses.hpp"
#include "panerf/metrics.hpp"

namespace panerf {

template <typename T>
AdamState<T> AdamState<T>::zeros(const FieldConfig& config) {
  return {FieldParams<T>::zeros(config), FieldParams<T>::zeros(config), 0};
}

template <typename T>
void optimizer_step(FieldParams<T>& params, const FieldParams<T>& gradients, AdamState<T>& state,
                    double learning_rate, const AdamConfig& adam) {
  if (!params.same_shape(gradients) || !params.same_shape(state.first_moment) ||
      !params.same_shape(state.second_moment)) {
    throw ContractError("optimizer_step: parameter, gradient and moment shapes differ");
  }
  gradients.for_each_tensor([](const std::string& name, const T* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i])) throw NumericError("non-finite gradient in tensor " + name);
    }
  });

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  auto update = [&](T* p, const T* g, T* m, T* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      const double mi = adam.beta1 * double(m[i]) + (1.0 - adam.beta1) * gi;
      const double vi = adam.beta2 * double(v[i]) + (1.0 - adam.beta2) * gi * gi;
      m[i] = T(mi);
      v[i] = T(vi);
      p[i] = T(double(p[i]) - learning_rate * (mi / c1) / (std::sqrt(vi / c2) + adam.epsilon));
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = gradients.layers[l];
    auto& m = state.first_moment.layers[l];
    auto& v = state.second_moment.layers[l];
    update(p.weight.data(), g.weight.data(), m.weight.data(), v.weight.data(),
           std::size_t(p.weight.size()));
    update(p.bias.data(), g.bias.data(), m.bias.data(), v.bias.data(), std::size_t(p.bias.size()));
  }
}

double stage_learning_rate(double base, double final_factor, std::uint64_t iteration,
                           std::uint64_t stage_iterations) {
  if (stage_iterations == 0) return base;
  return base * std::pow(final_factor, double(iteration) / double(stage_iterations));
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::initialization: return "init";
    case Stage::finetune: return "finetune";
    case Stage::done: return "done";
  }
  return "?";
}

void TrainConfig::validate() const {
  field.validate();
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(rays_per_batch > 0, "rays_per_batch must be positive");
  need(samples_per_ray >= 2, "samples_per_ray must be at least 2");
  need(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
  need(lr_final_factor > 0.0 && lr_final_factor <= 1.0, "lr_final_factor must lie in (0, 1]");
  need(lambda_msc >= 0.0 && lambda_ip >= 0.0, "loss weights must be non-negative");
  need(bg_weight >= 0.0, "bg_weight must be non-negative");
  need(msc_interval > 0, "msc_interval must be positive");
  need(msc_resolution >= 2, "msc_resolution must be at least 2");
  need(!pseudo_ratio || (*pseudo_ratio >= 0.0 && *pseudo_ratio <= 1.0),
       "pseudo_ratio must lie in [0, 1]");
  need(ip_unseen_rays >= 0, "ip_unseen_rays must be non-negative");
  need(ip_epsilon > 0.0, "ip_epsilon must be positive");
  need(checkpoint_interval > 0 && eval_interval > 0 && log_interval > 0,
       "checkpoint, eval and log intervals must be positive");
  need(task_rays > 0, "task_rays must be positive");
}

RenderSettings TrainConfig::render_settings(const Vec3& background) const {
  RenderSettings s;
  s.samples_per_ray = samples_per_ray;
  s.background = background;
  s.task_rays = task_rays;
  return s;
}

TrainState TrainState::fresh(const TrainConfig& config) {
  TrainState s;
  s.adam = AdamState<float>::zeros(config.field);
  s.rng.seed(config.seed);
  return s;
}

OptimizerSnapshot TrainState::snapshot() const {
  std::ostringstream rng_state;
  rng_state << rng;
  return {static_cast<std::uint32_t>(stage), iteration, adam.step, rng_state.str(),
          adam.first_moment, adam.second_moment};
}

TrainState TrainState::restore(const OptimizerSnapshot& snap) {
  TrainState s;
  if (snap.stage > static_cast<std::uint32_t>(Stage::done)) {
    throw DataError("checkpoint holds an unknown training stage");
  }
  s.stage = static_cast<Stage>(snap.stage);
  s.iteration = snap.iteration;
  s.adam = {snap.first_moment, snap.second_moment, snap.step};
  std::istringstream in(snap.rng_state);
  in >> s.rng;
  if (!in) throw DataError("checkpoint holds a malformed RNG state");
  return s;
}

TrainView real_view(const Frame& frame, const SaliencyProvider& saliency) {
  TrainView v;
  v.image = frame.image;
  v.validity = Mask(frame.image.width, frame.image.height, true);
  const DepthMap depth = frame.depth ? *frame.depth : DepthMap(frame.image.width, frame.image.height, 0.0f);
  v.saliency = saliency.compute(frame.image, depth, frame.mask);
  v.pose = frame.pose;
  return v;
}

TrainView pseudo_view(const PseudoView& view) {
  return {view.image, view.validity, view.saliency, view.pose, true};
}

PixelPool::PixelPool(const std::vector<const TrainView*>& views) : views_(views) {
  for (const TrainView* v : views_) {
    offsets_.push_back(total_);
    std::vector<std::uint32_t> px;
    for (std::size_t i = 0; i < v->validity.data.size(); ++i) {
      if (v->validity.data[i]) px.push_back(static_cast<std::uint32_t>(i));
    }
    total_ += px.size();
    pixels_.push_back(std::move(px));
  }
}

std::pair<const TrainView*, std::uint32_t> PixelPool::at(std::size_t index) const {
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  std::size_t v = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  // Skip views without valid pixels that share an offset.
  while (pixels_[v].empty() || index - offsets_[v] >= pixels_[v].size()) ++v;
  return {views_[v], pixels_[v][index - offsets_[v]]};
}

SampledRays sample_ray_batch(const PixelPool& real, const PixelPool& pseudo,
                             const Intrinsics& camera, DepthRange range, std::size_t batch_size,
                             std::mt19937_64& rng, std::optional<double> pseudo_ratio) {
  const std::size_t total = real.size() + pseudo.size();
  if (total == 0) throw ContractError("no valid pixel to sample rays from");
  SampledRays s;
  s.rays.resize(Eigen::Index(batch_size));
  s.reference.resize(3, Eigen::Index(batch_size));
  s.validity.assign(batch_size, 1);
  s.saliency.assign(batch_size, 0);
  s.pseudo.assign(batch_size, 0);

  const bool use_ratio = pseudo_ratio && !real.empty() && !pseudo.empty();
  std::bernoulli_distribution pick_pseudo(use_ratio ? *pseudo_ratio : 0.0);
  for (std::size_t r = 0; r < batch_size; ++r) {
    std::pair<const TrainView*, std::uint32_t> hit;
    if (use_ratio) {
      const PixelPool& pool = pick_pseudo(rng) ? pseudo : real;
      hit = pool.at(std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng));
    } else {
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
      hit = i < real.size() ? real.at(i) : pseudo.at(i - real.size());
    }
    const TrainView& v = *hit.first;
    const int x = static_cast<int>(hit.second % std::uint32_t(v.image.width));
    const int y = static_cast<int>(hit.second / std::uint32_t(v.image.width));
    s.rays.set(Eigen::Index(r), ray_for_pixel(camera, v.pose, {double(x), double(y)}, range));
    for (int c = 0; c < 3; ++c) s.reference(c, Eigen::Index(r)) = v.image.at(x, y, c);
    s.saliency[r] = v.saliency.data.empty() ? 1 : v.saliency.data[hit.second];
    s.pseudo[r] = v.pseudo ? 1 : 0;
    (v.pseudo ? s.pseudo_count : s.real_count)++;
  }
  return s;
}

const std::vector<std::string>& MetricsLog::columns(bool wall_time) {
  static const std::vector<std::string> base = {
      "step",       "stage",        "iteration",  "learning_rate", "total",     "photometric",
      "photometric_fg", "photometric_bg", "msc",  "ip",            "lambda_msc", "lambda_ip",
      "real_rays",  "pseudo_rays",  "fg_pixels",  "bg_pixels",     "ip_rays",   "ip_excluded",
      "msc_evaluated", "probe_psnr"};
  static const std::vector<std::string> with_time = [] {
    auto v = base;
    v.push_back("wall_time_s");
    return v;
  }();
  return wall_time ? with_time : base;
}

namespace {

std::string header_line(bool wall_time) {
  std::string h;
  for (const auto& c : MetricsLog::columns(wall_time)) h += (h.empty() ? "" : ",") + c;
  return h;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MetricsLog::MetricsLog(const std::filesystem::path& path, bool wall_time,
                       std::optional<std::uint64_t> resume_step)
    : wall_time_(wall_time) {
  std::vector<std::string> kept;
  if (resume_step && std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (line != header_line(wall_time)) {
          throw DataError("metrics log " + path.string() + " has a different column layout");
        }
        continue;
      }
      if (line.empty()) continue;
      const std::uint64_t step = std::stoull(line.substr(0, line.find(',')));
      if (step <= *resume_step) kept.push_back(line);
    }
  }
  out_.open(path, std::ios::trunc);
  if (!out_) throw DataError("cannot write metrics log " + path.string());
  out_ << header_line(wall_time) << '\n';
  for (const auto& l : kept) out_ << l << '\n';
  out_.flush();
}

std::string MetricsLog::format_row(const IterationRecord& r, bool wall_time) {
  const LossBreakdown& l = r.loss;
  std::string s = std::to_string(r.step) + "," + stage_name(r.stage) + "," +
                  std::to_string(r.iteration) + "," + num(r.learning_rate) + "," + num(l.total) +
                  "," + num(l.photometric) + "," + num(l.photometric_fg) + "," +
                  num(l.photometric_bg) + "," + num(l.msc) + "," + num(l.ip) + "," +
                  num(l.lambda_msc) + "," + num(l.lambda_ip) + "," + std::to_string(l.real_rays) +
                  "," + std::to_string(l.pseudo_rays) + "," + std::to_string(l.fg_pixels) + "," +
                  std::to_string(l.bg_pixels) + "," + std::to_string(l.ip_rays) + "," +
                  std::to_string(l.ip_excluded) + "," + (l.msc_evaluated ? "1" : "0") + "," +
                  (r.probe_psnr ? num(*r.probe_psnr) : "");
  if (wall_time) s += "," + num(r.wall_time);
  return s;
}

void MetricsLog::append(const IterationRecord& record) {
  out_ << format_row(record, wall_time_) << '\n';
  out_.flush();
}

std::optional<double> probe_psnr(const FieldParams<float>& field, const TrainingSet& data,
                                 const TrainConfig& config) {
  if (data.probes.empty()) return std::nullopt;
  RenderOptions opts;
  opts.settings = config.render_settings(data.background);
  opts.range = data.range;
  double sum = 0.0;
  for (const auto& p : data.probes) {
    const auto img = render_image(field, data.camera, p.pose, opts);
    sum += psnr(img.rgb, p.image).value;
  }
  return sum / double(data.probes.size());
}

namespace {

std::vector<const TrainView*> pointers(const std::vector<TrainView>& v) {
  std::vector<const TrainView*> out;
  for (const auto& x : v) out.push_back(&x);
  return out;
}

void save(const FieldParams<float>& field, const TrainState& state,
          const std::filesystem::path& path) {
  write_checkpoint(path, {field, state.snapshot()});
}

std::string step_name(std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%06llu.ckpt", static_cast<unsigned long long>(step));
  return buf;
}

[[noreturn]] void numeric_abort(const FieldParams<float>& field, const TrainState& state,
                                const TrainHooks& hooks, const std::string& what) {
  std::string where = "no checkpoint directory configured, no snapshot written";
  if (hooks.checkpoint_dir) {
    const auto path = *hooks.checkpoint_dir / ("nonfinite_" + step_name(state.adam.step));
    try {
      save(field, state, path);
      where = "snapshot written to " + path.string();
    } catch (const Error& e) {
      where = std::string("snapshot failed: ") + e.what();
    }
  }
  throw NumericError(what + " at " + stage_name(state.stage) + " iteration " +
                     std::to_string(state.iteration + 1) + "; " + where);
}

ImageBuffer<double> to_image(const Matrix3X<float>& rgb, int w, int h) {
  ImageBuffer<double> img(w, h, 3);
  for (int i = 0; i < w * h; ++i) {
    for (int c = 0; c < 3; ++c) img.data[std::size_t(i) * 3 + c] = rgb(c, i);
  }
  return img;
}

struct StageContext {
  FieldParams<float>& field;
  const TrainingSet& data;
  const TrainConfig& config;
  TrainState& state;
  const TrainHooks& hooks;
  std::uint64_t stage_iterations;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

// Applies the gradient, then logs, evaluates and checkpoints as configured.
void finish_iteration(StageContext& ctx, const FieldParams<float>& grads, LossBreakdown loss,
                      double lr) {
  if (!std::isfinite(loss.total)) {
    numeric_abort(ctx.field, ctx.state, ctx.hooks, "non-finite loss");
  }
  try {
    optimizer_step(ctx.field, grads, ctx.state.adam, lr);
  } catch (const NumericError& e) {
    numeric_abort(ctx.field, ctx.state, ctx.hooks, e.what());
  }
  ++ctx.state.iteration;

  IterationRecord rec;
  rec.stage = ctx.state.stage;
  rec.iteration = ctx.state.iteration;
  rec.step = ctx.state.adam.step;
  rec.learning_rate = lr;
  rec.loss = loss;
  const bool last = ctx.state.iteration == ctx.stage_iterations;
  if (ctx.state.iteration % ctx.config.eval_interval == 0 || last) {
    rec.probe_psnr = probe_psnr(ctx.field, ctx.data, ctx.config);
    if (rec.probe_psnr && *rec.probe_psnr > ctx.state.best_probe_psnr) {
      ctx.state.best_probe_psnr = *rec.probe_psnr;
      ctx.state.best_step = rec.step;
    }
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.start).count();
  if (ctx.hooks.log && (ctx.state.iteration % ctx.config.log_interval == 0 || rec.probe_psnr)) {
    ctx.hooks.log->append(rec);
  }
  if (ctx.hooks.on_iteration) ctx.hooks.on_iteration(rec);
  if (ctx.hooks.checkpoint_dir && (ctx.state.iteration % ctx.config.checkpoint_interval == 0 || last)) {
    std::filesystem::create_directories(*ctx.hooks.checkpoint_dir);
    save(ctx.field, ctx.state, *ctx.hooks.checkpoint_dir / step_name(rec.step));
    save(ctx.field, ctx.state, *ctx.hooks.checkpoint_dir / "latest.ckpt");
  }
}

void check_views(const TrainingSet& data) {
  data.camera.validate();
  auto check = [&](const TrainView& v) {
    if (v.image.width != data.camera.width || v.image.height != data.camera.height ||
        v.image.channels != 3 || v.validity.width != v.image.width ||
        v.validity.height != v.image.height ||
        (!v.saliency.data.empty() && v.saliency.data.size() != v.validity.data.size())) {
      throw ContractError("training view does not match the camera");
    }
  };
  for (const auto& v : data.real) check(v);
  for (const auto& v : data.pseudo) check(v);
}

}  // namespace

void train_stage_init(FieldParams<float>& field, const TrainingSet& data,
                      const TrainConfig& config, TrainState& state, const TrainHooks& hooks) {
  config.validate();
  if (state.stage != Stage::initialization) return;
  check_views(data);
  const PixelPool real(pointers(data.real));
  const PixelPool pseudo(pointers(data.pseudo));
  const RenderSettings settings = config.render_settings(data.background);
  StageContext ctx{field, data, config, state, hooks, config.init_iterations};

  while (state.iteration < config.init_iterations) {
    const double lr = stage_learning_rate(config.learning_rate, config.lr_final_factor,
                                          state.iteration, config.init_iterations);
    const auto batch = sample_ray_batch(real, pseudo, data.camera, data.range,
                                        std::size_t(config.rays_per_batch), state.rng,
                                        config.pseudo_ratio);
    RenderPass<float> pass;
    try {
      pass = render_rays(field, batch.rays, settings, config.jitter ? &state.rng : nullptr, true);
    } catch (const NumericError& e) {
      numeric_abort(field, state, hooks, e.what());
    }
    const auto photo = photometric_loss(pass.result.rgb.cast<double>(), batch.reference,
                                        batch.validity, batch.saliency, config.bg_weight);
    auto grads = FieldParams<float>::zeros(field.config);
    render_rays_backward(field, pass, Matrix3X<float>(photo.gradient.cast<float>()),
                         MatrixX<float>(), settings, grads);

    LossBreakdown loss;
    loss.photometric = photo.loss;
    loss.photometric_fg = photo.foreground;
    loss.photometric_bg = photo.background;
    loss.real_rays = batch.real_count;
    loss.pseudo_rays = batch.pseudo_count;
    loss.fg_pixels = photo.foreground_count;
    loss.bg_pixels = photo.background_count;
    loss.total = loss.recombined();
    finish_iteration(ctx, grads, loss, lr);
  }
  state.stage = Stage::finetune;
  state.iteration = 0;
}

void train_stage_finetune(FieldParams<float>& field, const TrainingSet& data,
                          const TrainConfig& config, TrainState& state,
                          const EmbeddingProvider& provider, const TrainHooks& hooks) {
  config.validate();
  if (state.stage != Stage::finetune) return;
  check_views(data);
  if (data.real.empty() && config.finetune_iterations > 0) {
    throw ContractError("fine-tuning needs at least one real view");
  }
  const PixelPool real(pointers(data.real));
  const PixelPool none;
  const RenderSettings settings = config.render_settings(data.background);
  StageContext ctx{field, data, config, state, hooks, config.finetune_iterations};

  const int msc_w = config.msc_resolution;
  const int msc_h = std::max(
      2, static_cast<int>(std::lround(double(msc_w) * data.camera.height / data.camera.width)));
  const Intrinsics msc_camera = data.camera.resized(msc_w, msc_h);
  std::vector<ImageBuffer<double>> msc_reference;
  if (config.lambda_msc > 0.0) {
    for (const auto& v : data.real) {
      msc_reference.push_back(resize_bilinear(v.image.cast<double>(), msc_w, msc_h));
    }
  }

  while (state.iteration < config.finetune_iterations) {
    const double lr = stage_learning_rate(config.learning_rate, config.lr_final_factor,
                                          state.iteration, config.finetune_iterations);
    auto batch = sample_ray_batch(real, none, data.camera, data.range,
                                  std::size_t(config.rays_per_batch), state.rng);
    const std::size_t supervised = std::size_t(config.rays_per_batch);
    if (config.ip_unseen_rays > 0 && !data.pseudo.empty()) {
      // Unsupervised rays through pseudo-view cameras; validity 0 keeps them
      // out of the photometric term.
      const std::size_t extra = std::size_t(config.ip_unseen_rays);
      RayBatch<float> all;
      all.resize(Eigen::Index(supervised + extra));
      all.origins.leftCols(Eigen::Index(supervised)) = batch.rays.origins;
      all.directions.leftCols(Eigen::Index(supervised)) = batch.rays.directions;
      all.near.head(Eigen::Index(supervised)) = batch.rays.near;
      all.far.head(Eigen::Index(supervised)) = batch.rays.far;
      Eigen::Matrix3Xd ref = Eigen::Matrix3Xd::Zero(3, Eigen::Index(supervised + extra));
      ref.leftCols(Eigen::Index(supervised)) = batch.reference;
      std::uniform_int_distribution<std::size_t> pick_view(0, data.pseudo.size() - 1);
      std::uniform_int_distribution<int> px(0, data.camera.width - 1);
      std::uniform_int_distribution<int> py(0, data.camera.height - 1);
      for (std::size_t k = 0; k < extra; ++k) {
        const TrainView& v = data.pseudo[pick_view(state.rng)];
        const int x = px(state.rng);
        const int y = py(state.rng);
        all.set(Eigen::Index(supervised + k),
                ray_for_pixel(data.camera, v.pose, {double(x), double(y)}, data.range));
      }
      batch.rays = std::move(all);
      batch.reference = std::move(ref);
      batch.validity.resize(supervised + extra, 0);
      batch.saliency.resize(supervised + extra, 0);
    }

    RenderPass<float> pass;
    try {
      pass = render_rays(field, batch.rays, settings, config.jitter ? &state.rng : nullptr, true);
    } catch (const NumericError& e) {
      numeric_abort(field, state, hooks, e.what());
    }
    const auto photo = photometric_loss(pass.result.rgb.cast<double>(), batch.reference,
                                        batch.validity, batch.saliency, config.bg_weight);
    LossBreakdown loss;
    loss.photometric = photo.loss;
    loss.photometric_fg = photo.foreground;
    loss.photometric_bg = photo.background;
    loss.real_rays = batch.real_count;
    loss.pseudo_rays = batch.pseudo_count;
    loss.fg_pixels = photo.foreground_count;
    loss.bg_pixels = photo.background_count;
    loss.lambda_msc = config.lambda_msc;
    loss.lambda_ip = config.lambda_ip;

    MatrixX<float> weight_grad;
    if (config.lambda_ip > 0.0) {
      const auto ip = ip_loss(pass.samples.weights.cast<double>(), config.ip_epsilon);
      loss.ip = ip.loss;
      loss.ip_rays = ip.included;
      loss.ip_excluded = ip.excluded;
      weight_grad = (config.lambda_ip * ip.gradient).cast<float>();
    }
    auto grads = FieldParams<float>::zeros(field.config);
    render_rays_backward(field, pass, Matrix3X<float>(photo.gradient.cast<float>()), weight_grad,
                         settings, grads);

    if (config.lambda_msc > 0.0 && state.iteration % std::uint64_t(config.msc_interval) == 0) {
      const std::size_t view =
          (state.iteration / std::uint64_t(config.msc_interval)) % data.real.size();
      const auto rays = camera_rays<float>(msc_camera, data.real[view].pose, data.range);
      RenderPass<float> msc_pass;
      try {
        msc_pass = render_rays(field, rays, settings, nullptr, true);
      } catch (const NumericError& e) {
        numeric_abort(field, state, hooks, e.what());
      }
      const auto synth = to_image(msc_pass.result.rgb, msc_w, msc_h);
      const auto msc = msc_loss(synth, msc_reference[view], provider, true);
      Matrix3X<float> g(3, rays.size());
      for (Eigen::Index i = 0; i < rays.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
          g(c, i) = float(config.lambda_msc * msc.gradient.data[std::size_t(i) * 3 + c]);
        }
      }
      render_rays_backward(field, msc_pass, g, MatrixX<float>(), settings, grads);
      loss.msc = msc.loss;
      loss.msc_evaluated = true;
    }
    loss.total = loss.recombined();
    finish_iteration(ctx, grads, loss, lr);
  }
  state.stage = Stage::done;
  state.iteration = 0;
}

void train(FieldParams<float>& field, const TrainingSet& data, const TrainConfig& config,
           TrainState& state, const EmbeddingProvider& provider, const TrainHooks& hooks) {
  train_stage_init(field, data, config, state, hooks);
  train_stage_finetune(field, data, config, state, provider, hooks);
}

double evaluate_ip(const FieldParams<float>& field, const TrainingSet& data,
                   const TrainConfig& config, std::size_t count, std::uint64_t seed) {
  const PixelPool real(pointers(data.real));
  std::mt19937_64 rng(seed);
  const auto batch = sample_ray_batch(real, PixelPool(), data.camera, data.range, count, rng);
  const auto pass =
      render_rays(field, batch.rays, config.render_settings(data.background), nullptr, false);
  return ip_loss(pass.samples.weights.cast<double>(), config.ip_epsilon).loss;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void optimizer_step<float>(FieldParams<float>&, const FieldParams<float>&,
                                    AdamState<float>&, double, const AdamConfig&);
template void optimizer_step<double>(FieldParams<double>&, const FieldParams<double>&,
                                     AdamState<double>&, double, const AdamConfig&);

}  // namespace panerf
