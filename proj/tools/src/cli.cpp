#include "panerf_cli/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <panerf/checkpoint.hpp>
#include <panerf/embedding.hpp>
#include <panerf/error.hpp>
#include <panerf/image_io.hpp>
#include <panerf/metrics.hpp>
#include <panerf/parallel.hpp>
#include <panerf/renderer.hpp>
#include <panerf/scene.hpp>
#include <panerf/trainer.hpp>

namespace panerf::cli {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  if (dynamic_cast<const DataError*>(&e)) return kData;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const ContractError*>(&e)) {
    return kUsage;
  }
  return kData;  // I/O and anything else from the environment
}

namespace {

struct AugmentOptions {
  std::string split = "train";
  double alpha_deg = 30.0;
  double step_deg = 5.0;
  std::string pivot = "origin";
  std::string saliency = "auto";
  std::string bg_rule = "finite";
  double bg_value = 0.0;
  double depth_band = 0.01;
  double min_weight = 0.25;
  bool consistency_check = true;
};

// Supplied mask when the frame has one, depth otherwise.
class AutoSaliency final : public SaliencyProvider {
 public:
  explicit AutoSaliency(BackgroundRule rule) : depth_(rule) {}
  Mask compute(const Image& image, const DepthMap& depth,
               const std::optional<Mask>& supplied) const override {
    return supplied ? *supplied : depth_.compute(image, depth, supplied);
  }
  std::string name() const override { return "auto"; }

 private:
  DepthSaliency depth_;
};

void add_augment_options(CLI::App* app, AugmentOptions& o) {
  app->add_option("--split", o.split, "Scene split whose frames are augmented")->capture_default_str();
  app->add_option("--alpha", o.alpha_deg, "Grid half-width in degrees about each camera axis")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app->add_option("--step", o.step_deg, "Grid spacing in degrees")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--pivot", o.pivot, "Rotation centre: origin (world origin) or camera (camera centre)")
      ->capture_default_str()
      ->check(CLI::IsMember({"origin", "camera"}));
  app->add_option("--saliency", o.saliency, "Foreground source: auto (mask, else depth), depth or mask")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "depth", "mask"}));
  app->add_option("--bg-rule", o.bg_rule,
                  "Depth background rule: finite (invalid depth is background), fixed "
                  "(depth >= --bg-value) or percentile (depth >= the --bg-value percentile)")
      ->capture_default_str()
      ->check(CLI::IsMember({"finite", "fixed", "percentile"}));
  app->add_option("--bg-value", o.bg_value, "Distance or percentile for --bg-rule")->capture_default_str();
  app->add_option("--depth-band", o.depth_band, "Relative depth band blended by the z-buffer")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app->add_option("--min-weight", o.min_weight, "Splat weight below which a target pixel is a hole")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app->add_flag("--consistency-check,!--no-consistency-check", o.consistency_check,
                "Re-check warped pixels against the source depth")
      ->capture_default_str();
}

AugmentConfig augment_config(const AugmentOptions& o) {
  AugmentConfig c;
  c.alpha_deg = o.alpha_deg;
  c.step_deg = o.step_deg;
  if (o.pivot == "camera") c.pivot.reset();
  c.policy.depth_band = o.depth_band;
  c.policy.min_weight = o.min_weight;
  c.policy.check_consistency = o.consistency_check;
  pose_grid_angles(c.alpha_deg, c.step_deg);  // rejects a step that does not divide alpha
  return c;
}

std::unique_ptr<SaliencyProvider> make_saliency(const AugmentOptions& o) {
  BackgroundRule rule;
  if (o.bg_rule == "fixed") {
    rule.kind = BackgroundRule::Kind::fixed_distance;
  } else if (o.bg_rule == "percentile") {
    rule.kind = BackgroundRule::Kind::percentile;
    if (o.bg_value < 0.0 || o.bg_value > 100.0) throw ConfigError("--bg-value must be a percentile in [0, 100]");
  }
  rule.value = o.bg_value;
  if (o.saliency == "mask") return std::make_unique<SuppliedMaskSaliency>();
  if (o.saliency == "depth") return std::make_unique<DepthSaliency>(rule);
  return std::make_unique<AutoSaliency>(rule);
}

std::vector<std::size_t> frames_of(const Scene& scene, const std::string& split) {
  if (split == "all") {
    std::vector<std::size_t> all(scene.frames.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  return scene.split(split);
}

std::vector<PseudoView> augment_scene(const Scene& scene, const AugmentOptions& o,
                                      const AugmentConfig& config, const SaliencyProvider& saliency,
                                      PseudoCacheInfo& info) {
  const auto idx = frames_of(scene, o.split);
  if (idx.empty()) throw DataError("split '" + o.split + "' has no frames to augment");
  std::vector<SourceView> inputs;
  info = {config.alpha_deg, config.step_deg, saliency.name(), {}};
  for (auto i : idx) {
    const auto& f = scene.frames[i];
    if (!f.depth) throw DataError("frame " + f.name + " has no depth map; augmentation needs depth");
    inputs.push_back({f.image, *f.depth, f.pose, f.mask});
    info.sources.push_back(f.name);
  }
  return generate_pseudo_views(inputs, scene.camera, config, saliency);
}

std::string file_stem(const std::string& frame_name) {
  std::string s = frame_name;
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s.empty() ? "frame" : s;
}

// --- augment ---------------------------------------------------------------

struct AugmentCommand {
  std::string scene;
  std::string out;
  AugmentOptions aug;
};

int cmd_augment(const AugmentCommand& c, std::ostream& out) {
  const auto config = augment_config(c.aug);
  const auto saliency = make_saliency(c.aug);
  const auto scene = load_scene(c.scene);
  PseudoCacheInfo info;
  const auto views = augment_scene(scene, c.aug, config, *saliency, info);

  fs::create_directories(c.out);
  write_pseudo_cache(c.out, views, info);
  std::ofstream stats(fs::path(c.out) / "stats.csv");
  stats << "view,source,angle_x,angle_y,angle_z,hole_fraction\n";
  double holes = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    holes += v.hole_fraction;
    const auto line = fmt::format("{},{},{},{},{},{:.17g}", i, info.sources[v.source_id], v.angles_deg[0],
                                  v.angles_deg[1], v.angles_deg[2], v.hole_fraction);
    stats << line << '\n';
    fmt::print(out, "pseudo {:5d}  source {}  angles ({:g}, {:g}, {:g})  holes {:.4f}\n", i,
               info.sources[v.source_id], v.angles_deg[0], v.angles_deg[1], v.angles_deg[2],
               v.hole_fraction);
  }
  const double mean = views.empty() ? 0.0 : holes / double(views.size());
  fmt::print(out, "{} pseudo-views from {} inputs ({} per input); mean hole fraction {:.6f}\n",
             views.size(), info.sources.size(), views.size() / std::max<std::size_t>(info.sources.size(), 1),
             mean);
  fmt::print(out, "cache written to {}\n", c.out);
  return kSuccess;
}

// --- train -----------------------------------------------------------------

struct TrainCommand {
  std::string scene;
  std::string out;
  std::string pseudo;
  bool augment_inline = false;
  bool real_only = false;
  bool resume = false;
  std::string probe_split = "val";
  std::optional<double> pseudo_ratio;
  TrainConfig config;
  AugmentOptions aug;
};

void add_train_options(CLI::App* app, TrainCommand& c) {
  auto& t = c.config;
  app->add_option("--scene", c.scene, "Scene directory or manifest")->required();
  app->add_option("--out", c.out, "Run directory (metrics.csv, checkpoints/, final.ckpt)")->required();
  app->add_option("--pseudo", c.pseudo, "Pseudo-view cache written by `augment`");
  app->add_flag("--augment-inline", c.augment_inline, "Generate pseudo-views in memory (augment options apply)");
  app->add_flag("--real-only", c.real_only, "Train without pseudo-views (photometric baseline when lambdas are 0)");
  app->add_flag("--resume", c.resume, "Continue from <out>/checkpoints/latest.ckpt");
  app->add_option("--probe-split", c.probe_split, "Split whose frames are rendered for probe PSNR")
      ->capture_default_str();
  app->add_option("--init-iters", t.init_iterations, "Initialization iterations (real + pseudo views)")
      ->capture_default_str();
  app->add_option("--finetune-iters", t.finetune_iterations, "Fine-tune iterations (real views, MSC + IP)")
      ->capture_default_str();
  app->add_option("--rays", t.rays_per_batch, "Rays per batch")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--samples", t.samples_per_ray, "Samples per ray")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_flag("--jitter,!--no-jitter", t.jitter, "Stratified jitter during training")->capture_default_str();
  app->add_option("--lr", t.learning_rate, "Base learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--lr-final", t.lr_final_factor, "Learning-rate factor reached at the end of each stage")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--lambda-msc", t.lambda_msc, "Semantic-consistency weight (fine-tune)")->capture_default_str();
  app->add_option("--lambda-ip", t.lambda_ip, "Information-potential weight (fine-tune)")->capture_default_str();
  app->add_option("--bg-weight", t.bg_weight, "Photometric weight of background pixels")->capture_default_str();
  app->add_option("--msc-interval", t.msc_interval, "Iterations between MSC evaluations")->capture_default_str();
  app->add_option("--msc-resolution", t.msc_resolution, "Width of the reduced MSC render")->capture_default_str();
  app->add_option("--pseudo-ratio", c.pseudo_ratio,
                  "Fraction of initialization rays from pseudo-views (default: uniform over all pixels)")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--ip-unseen-rays", t.ip_unseen_rays, "Extra IP-only rays per fine-tune batch from pseudo cameras")
      ->capture_default_str();
  app->add_option("--ip-epsilon", t.ip_epsilon, "Weight-sum floor below which a ray is excluded from IP")
      ->capture_default_str();
  app->add_option("--seed", t.seed, "Seed for initialization, sampling and jitter")->capture_default_str();
  app->add_option("--checkpoint-interval", t.checkpoint_interval, "Iterations between checkpoints")
      ->capture_default_str();
  app->add_option("--eval-interval", t.eval_interval, "Iterations between probe evaluations")->capture_default_str();
  app->add_flag("--log-wall-time,!--no-log-wall-time", t.log_wall_time, "Add a wall_time_s column to metrics.csv")
      ->capture_default_str();
  app->add_option("--task-rays", t.task_rays, "Rays per parallel task (fixed for determinism)")->capture_default_str();
  app->add_option("--field-depth", t.field.depth, "Trunk layers")->capture_default_str();
  app->add_option("--field-width", t.field.width, "Units per trunk layer")->capture_default_str();
  app->add_option("--skip-layer", t.field.skip_layer, "Trunk layer followed by the position skip (-1: none)")
      ->capture_default_str();
  app->add_option("--pos-freq", t.field.encoding.position_frequencies, "Position encoding frequencies")
      ->capture_default_str();
  app->add_option("--dir-freq", t.field.encoding.direction_frequencies, "Direction encoding frequencies")
      ->capture_default_str();
  add_augment_options(app, c.aug);
}

TrainView probe_view(const Frame& f) {
  TrainView v;
  v.image = f.image;
  v.validity = Mask(f.image.width, f.image.height, true);
  v.saliency = f.mask ? *f.mask : Mask(f.image.width, f.image.height, true);
  v.pose = f.pose;
  return v;
}

int cmd_train(TrainCommand& c, std::ostream& out) {
  auto& cfg = c.config;
  cfg.pseudo_ratio = c.pseudo_ratio;
  cfg.validate();
  const int sources = int(!c.pseudo.empty()) + int(c.augment_inline) + int(c.real_only);
  if (sources != 1) throw ConfigError("train needs exactly one of --pseudo DIR, --augment-inline, --real-only");
  std::optional<AugmentConfig> aug_cfg;
  if (c.augment_inline) aug_cfg = augment_config(c.aug);
  const auto saliency = make_saliency(c.aug);

  const auto scene = load_scene(c.scene);
  TrainingSet data;
  data.camera = scene.camera;
  data.range = scene.range;
  data.background = scene.background;
  const auto train_idx = frames_of(scene, c.aug.split);
  if (train_idx.empty()) throw DataError("split '" + c.aug.split + "' has no training frames");
  for (auto i : train_idx) data.real.push_back(real_view(scene.frames[i], *saliency));
  for (auto i : scene.split(c.probe_split)) data.probes.push_back(probe_view(scene.frames[i]));
  if (!c.pseudo.empty()) {
    for (const auto& v : read_pseudo_cache(c.pseudo)) data.pseudo.push_back(pseudo_view(v));
  } else if (aug_cfg) {
    PseudoCacheInfo info;
    for (const auto& v : augment_scene(scene, c.aug, *aug_cfg, *saliency, info)) {
      data.pseudo.push_back(pseudo_view(v));
    }
  }

  const fs::path dir(c.out);
  const fs::path ckpt_dir = dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  FieldParams<float> field;
  TrainState state;
  std::unique_ptr<MetricsLog> log;
  if (c.resume) {
    const auto latest = ckpt_dir / "latest.ckpt";
    if (!fs::exists(latest)) throw DataError("nothing to resume: " + latest.string() + " does not exist");
    auto ck = read_checkpoint(latest);
    if (!ck.optimizer) throw DataError(latest.string() + " holds no optimizer state");
    if (!(ck.params.config == cfg.field)) throw ConfigError("field flags differ from the checkpoint being resumed");
    field = std::move(ck.params);
    state = TrainState::restore(*ck.optimizer);
    log = std::make_unique<MetricsLog>(dir / "metrics.csv", cfg.log_wall_time, state.adam.step);
    fmt::print(out, "resuming at step {} ({} iteration {})\n", state.adam.step, stage_name(state.stage),
               state.iteration);
  } else {
    std::mt19937_64 init_rng(cfg.seed);
    field = FieldParams<float>::initialized(cfg.field, init_rng);
    state = TrainState::fresh(cfg);
    log = std::make_unique<MetricsLog>(dir / "metrics.csv", cfg.log_wall_time);
  }
  fmt::print(out, "training on {} real and {} pseudo views ({} probes), {} parameters\n", data.real.size(),
             data.pseudo.size(), data.probes.size(), field.parameter_count());

  TrainHooks hooks;
  hooks.log = log.get();
  hooks.checkpoint_dir = ckpt_dir;
  hooks.on_iteration = [&](const IterationRecord& r) {
    if (r.probe_psnr) {
      fmt::print(out, "step {:7d}  {:8s} it {:6d}  loss {:.6f}  probe PSNR {:.3f} dB\n", r.step,
                 stage_name(r.stage), r.iteration, r.loss.total, *r.probe_psnr);
    }
  };
  train(field, data, cfg, state, BuiltinEmbedding(), hooks);
  write_checkpoint(dir / "final.ckpt", {field, state.snapshot()});
  fmt::print(out, "done after {} optimizer steps; final checkpoint {}\n", state.adam.step,
             (dir / "final.ckpt").string());
  return kSuccess;
}

// --- render ----------------------------------------------------------------

struct RenderCommand {
  std::string checkpoint;
  std::string scene;
  std::string split = "test";
  std::string out;
  int samples = 64;
  int chunk = 4096;
};

RenderOptions render_options(const Scene& scene, int samples, int chunk) {
  RenderOptions ro;
  ro.settings.samples_per_ray = samples;
  ro.settings.background = scene.background;
  ro.range = scene.range;
  ro.chunk_rays = chunk;
  return ro;
}

// Expected ray distance to z-depth.
DepthMap z_depth(const Image& distance, const Intrinsics& camera) {
  DepthMap d(distance.width, distance.height, std::numeric_limits<float>::infinity());
  for (int y = 0; y < distance.height; ++y) {
    for (int x = 0; x < distance.width; ++x) {
      const float t = distance.at(x, y, 0);
      if (!std::isfinite(t)) continue;
      const double norm = camera_point_at_unit_depth(camera, {double(x), double(y)}).norm();
      d.at(x, y) = static_cast<float>(t / norm);
    }
  }
  return d;
}

int cmd_render(const RenderCommand& c, std::ostream& out) {
  if (c.samples < 1) throw ConfigError("--samples must be positive");
  const auto ck = read_checkpoint(c.checkpoint);
  const auto scene = load_scene(c.scene);
  const auto idx = frames_of(scene, c.split);
  if (idx.empty()) throw DataError("split '" + c.split + "' has no frames to render");
  const fs::path dir(c.out);
  fs::create_directories(dir);
  const auto ro = render_options(scene, c.samples, c.chunk);
  for (auto i : idx) {
    const auto& f = scene.frames[i];
    const auto r = render_image(ck.params, scene.camera, f.pose, ro);
    const auto stem = file_stem(f.name);
    write_png(dir / (stem + ".png"), r.rgb);
    write_pfm(dir / (stem + "_depth.pfm"), z_depth(r.depth, scene.camera));
    write_png(dir / (stem + "_acc.png"), r.accumulation);
    fmt::print(out, "rendered {} -> {}\n", f.name, (dir / (stem + ".png")).string());
  }
  return kSuccess;
}

// --- eval ------------------------------------------------------------------

struct EvalCommand {
  std::string checkpoint;
  std::string scene;
  std::string split = "test";
  std::string out;
  int samples = 64;
  bool masked = false;
  bool plots = false;
  std::string metrics;
};

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

// step and the named columns of a training metrics CSV (empty cells skipped).
std::vector<Series> training_series(const fs::path& path, const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read metrics log " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells(1);
    for (char ch : line) {
      if (ch == ',') {
        cells.emplace_back();
      } else {
        cells.back() += ch;
      }
    }
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
  const auto header = split(line);
  auto column = [&](const std::string& n) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == n) return i;
    }
    throw DataError(path.string() + " has no column " + n);
  };
  const std::size_t step = column("step");
  std::vector<std::size_t> cols;
  std::vector<Series> series;
  for (const auto& n : names) {
    cols.push_back(column(n));
    series.push_back({n, {}});
  }
  while (std::getline(in, line)) {
    const auto cells = split(line);
    if (cells.size() != header.size()) throw DataError(path.string() + ": ragged row");
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cells[cols[k]].empty()) continue;
      series[k].points.emplace_back(std::stod(cells[step]), std::stod(cells[cols[k]]));
    }
  }
  return series;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

int cmd_eval(const EvalCommand& c, std::ostream& out) {
  if (c.samples < 1) throw ConfigError("--samples must be positive");
  const auto ck = read_checkpoint(c.checkpoint);
  const auto scene = load_scene(c.scene);
  const auto idx = frames_of(scene, c.split);
  if (idx.empty()) throw DataError("split '" + c.split + "' has no frames to evaluate");
  const fs::path dir(c.out);
  fs::create_directories(dir);
  const auto ro = render_options(scene, c.samples, 4096);

  MetricReport report;
  for (auto i : idx) {
    const auto& f = scene.frames[i];
    const Mask* mask = nullptr;
    if (c.masked) {
      if (!f.mask) throw DataError("frame " + f.name + " has no mask for --masked evaluation");
      mask = &*f.mask;
    }
    const auto r = render_image(ck.params, scene.camera, f.pose, ro);
    report.views.push_back({f.name, psnr(r.rgb, f.image, 1.0, mask), ssim(r.rgb, f.image, {}, mask)});
  }
  report.finalize();

  std::string csv = "view,psnr,ssim,psnr_infinite\n";
  for (const auto& v : report.views) {
    csv += fmt::format("{},{},{},{}\n", v.name, number(v.psnr.value), number(v.ssim), v.psnr.infinite ? 1 : 0);
    fmt::print(out, "{:24s}  PSNR {:>9s} dB  SSIM {:.4f}{}\n", v.name,
               v.psnr.infinite ? "inf" : fmt::format("{:.3f}", v.psnr.value), v.ssim,
               v.psnr.infinite ? "  (identical)" : "");
  }
  csv += fmt::format("mean,{},{},{}\n", number(report.mean_psnr), number(report.mean_ssim),
                     report.any_infinite ? 1 : 0);
  write_text(dir / "eval.csv", csv);
  fmt::print(out, "mean over {} views: PSNR {} dB, SSIM {:.4f}{}\n", report.views.size(),
             report.any_infinite ? "inf" : fmt::format("{:.3f}", report.mean_psnr), report.mean_ssim,
             c.masked ? " (masked)" : "");

  if (c.plots) {
    std::vector<std::pair<std::string, double>> p, s;
    for (const auto& v : report.views) {
      p.emplace_back(v.name, v.psnr.value);
      s.emplace_back(v.name, v.ssim);
    }
    write_text(dir / "psnr_per_view.svg", svg_bar_plot("PSNR per view (" + c.split + ")", "PSNR (dB)", p));
    write_text(dir / "ssim_per_view.svg", svg_bar_plot("SSIM per view (" + c.split + ")", "SSIM", s));
    if (!c.metrics.empty()) {
      write_text(dir / "training_loss.svg",
                 svg_line_plot("Training loss", "step", "loss",
                               training_series(c.metrics, {"total", "photometric", "msc", "ip"})));
      write_text(dir / "training_probe_psnr.svg",
                 svg_line_plot("Probe PSNR during training", "step", "PSNR (dB)",
                               training_series(c.metrics, {"probe_psnr"})));
    }
    fmt::print(out, "plots written to {}\n", dir.string());
  } else if (!c.metrics.empty()) {
    throw ConfigError("--metrics is only used together with --plots");
  }
  return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"panerf: few-shot neural radiance fields with pseudo-view augmentation"};
  app.footer(
      "Config file (--config): INI text. Top-level keys set the global options;\n"
      "[augment], [train], [render] and [eval] sections take the long option names\n"
      "of that subcommand without dashes, e.g. `lambda-msc = 0.1`. Unknown keys are\n"
      "rejected. Command-line flags override the file.\n"
      "Exit codes: 0 success, 1 usage or configuration, 2 data, 3 numeric failure.");
  app.set_version_flag("--version", "panerf 0.1.0");
  app.set_config("--config", "", "INI file with option values (see below)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")
      ->envname("PANERF_THREADS")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  AugmentCommand augment;
  auto* a = app.add_subcommand("augment", "Write pseudo-views of a scene's frames to a cache");
  a->add_option("--scene", augment.scene, "Scene directory or manifest")->required();
  a->add_option("--out", augment.out, "Cache directory")->required();
  add_augment_options(a, augment.aug);

  TrainCommand train_cmd;
  auto* t = app.add_subcommand("train", "Two-stage training: initialization, then fine-tuning");
  add_train_options(t, train_cmd);

  RenderCommand render;
  auto* r = app.add_subcommand("render", "Render RGB, depth (PFM) and accumulation for scene poses");
  r->add_option("--checkpoint", render.checkpoint, "Checkpoint file")->required();
  r->add_option("--scene", render.scene, "Scene supplying camera, range and poses")->required();
  r->add_option("--split", render.split, "Frames to render (`all` for every frame)")->capture_default_str();
  r->add_option("--out", render.out, "Output directory")->required();
  r->add_option("--samples", render.samples, "Samples per ray")->capture_default_str();
  r->add_option("--chunk", render.chunk, "Rays per render chunk (no numeric effect)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  EvalCommand eval;
  auto* e = app.add_subcommand("eval", "PSNR/SSIM of renders against held-out frames");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--scene", eval.scene, "Scene with the held-out frames")->required();
  e->add_option("--split", eval.split, "Frames to evaluate (`all` for every frame)")->capture_default_str();
  e->add_option("--out", eval.out, "Output directory for eval.csv and plots")->required();
  e->add_option("--samples", eval.samples, "Samples per ray")->capture_default_str();
  e->add_flag("--masked", eval.masked, "Restrict metrics to each frame's mask (masked-pixel mean)");
  e->add_flag("--plots", eval.plots, "Write SVG plots");
  e->add_option("--metrics", eval.metrics, "Training metrics.csv to plot over iterations");

  for (auto* sub : {a, t, r, e}) sub->configurable();

  if (const char* env = std::getenv("PANERF_THREADS")) {
    int n = 0;
    const std::string v(env);
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || end != v.data() + v.size() || n < 1) {
      fmt::print(err, "error: PANERF_THREADS must be a positive integer, got '{}'\n", v);
      return kUsage;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    set_num_threads(threads);
    retain_freed_memory();
    if (a->parsed()) return cmd_augment(augment, out);
    if (t->parsed()) return cmd_train(train_cmd, out);
    if (r->parsed()) return cmd_render(render, out);
    return cmd_eval(eval, out);
  } catch (const std::exception& ex) {
    fmt::print(err, "error: {}\n", ex.what());
    return exit_code_for(ex);
  }
}

}  // namespace panerf::cli
