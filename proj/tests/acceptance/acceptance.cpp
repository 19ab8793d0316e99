// Acceptance runner. `panerf_acceptance <n>` runs criterion n; without an
// argument every criterion runs. One PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <panerf/augment.hpp>
#include <panerf/embedding.hpp>
#include <panerf/losses.hpp>
#include <panerf/metrics.hpp>
#include <panerf/parallel.hpp>
#include <panerf/renderer.hpp>
#include <panerf/toy_scene.hpp>
#include <panerf/trainer.hpp>

#include "oracles.hpp"
#include "tmpdir.hpp"

using namespace panerf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// 1: gradients against central differences.
Outcome gradient_suite() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  oracle::GradCheck field, comp, msc, ip;
  const int instances = 100;
  for (int i = 0; i < instances; ++i) field.merge(oracle::check_field_instance(rng));
  for (int i = 0; i < instances; ++i) comp.merge(oracle::check_composite_instance(rng));
  for (int i = 0; i < instances; ++i) msc.merge(oracle::check_msc_instance(rng));
  for (int i = 0; i < instances; ++i) ip.merge(oracle::check_ip_instance(rng));
  const double t = seconds_since(start);
  const double worst = std::max({field.max_error, comp.max_error, msc.max_error, ip.max_error});
  Outcome o;
  o.pass = worst <= 1e-4 && t < 60.0 && field.checked > 0 && comp.checked > 0 && msc.checked > 0 &&
           ip.checked > 0;
  o.detail = fmt(
      "%d instances each; max rel err field %.2e (%zu coords, %zu at kinks skipped) composite %.2e "
      "msc %.2e (%zu skipped) ip %.2e; %.1fs",
      instances, field.max_error, field.checked, field.excluded, comp.max_error, msc.max_error,
      msc.excluded, ip.max_error, t);
  return o;
}

// 2: compositing and information-potential identities.
Outcome rendering_identities() {
  std::mt19937_64 rng(1002);
  double conservation = 0.0;
  for (int t = 0; t < 500; ++t) {
    auto b = oracle::random_samples(rng, oracle::uniform_int(rng, 2, 128), oracle::uniform_int(rng, 1, 16));
    if (t % 3 == 0) b.density *= 30.0;
    composite(b);
    for (Eigen::Index r = 0; r < b.rays(); ++r) {
      conservation = std::max(conservation, std::abs(b.weights.col(r).sum() - (1.0 - b.transmittance(b.samples(), r))));
    }
  }

  bool bounds = true;
  for (int t = 0; t < 500; ++t) {
    const int n = oracle::uniform_int(rng, 1, 128);
    Eigen::MatrixXd w(n, oracle::uniform_int(rng, 1, 16));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = oracle::uniform(rng, 0, 1) < 0.5 ? 0.0 : oracle::uniform(rng, 0, 1);
    w(0, 0) = 1.0;
    const double l = ip_loss(w).loss;
    bounds = bounds && l >= -1.0 - 1e-12 && l <= -1.0 / n + 1e-12;
  }
  double extremes = 0.0;
  for (int n : {1, 2, 7, 64, 128}) {
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, 3);
    for (int r = 0; r < 3; ++r) delta((r * 5) % n, r) = 0.3 + r;
    extremes = std::max(extremes, std::abs(ip_loss(delta).loss + 1.0));
    extremes = std::max(extremes, std::abs(ip_loss(Eigen::MatrixXd::Constant(n, 3, 0.2)).loss + 1.0 / n));
  }

  RaySampleBatch<double> ex;
  ex.t.resize(2, 1);
  ex.t << 1.0, 1.5;
  ex.delta = Eigen::MatrixXd::Constant(2, 1, 0.5);
  ex.density.resize(2, 1);
  ex.density << 1.0, 2.0;
  ex.color.resize(3, 2);
  ex.color << 1, 0, 0, 1, 0, 0;
  const auto res = composite(ex);
  const double example = std::max({std::abs(ex.weights(0, 0) - 0.39347), std::abs(ex.weights(1, 0) - 0.38340),
                                   std::abs(res.rgb(0, 0) - 0.39347), std::abs(res.rgb(1, 0) - 0.38340),
                                   std::abs(res.rgb(2, 0))});
  Outcome o;
  o.pass = conservation <= 1e-12 && bounds && extremes <= 1e-12 && example <= 1e-4;
  o.detail = fmt("max |sum w - (1 - T)| %.1e; ip bounds %s; delta/uniform equality err %.1e; example err %.1e",
                 conservation, bounds ? "hold" : "violated", extremes, example);
  return o;
}

Image two_pixel_target(std::mt19937_64& rng, bool& near_won) {
  const int w = 16;
  const int cx = oracle::uniform_int(rng, 0, w - 1);
  // Two columns on the same side of the principal column whose rays meet a
  // common camera-space x at depths d_a and d_b.
  int ua, ub;
  do {
    ua = oracle::uniform_int(rng, 0, w - 1);
    ub = oracle::uniform_int(rng, 0, w - 1);
  } while (ua == cx || ub == cx || ua == ub || (ua - cx) * (ub - cx) <= 0);
  const double fx = oracle::uniform(rng, 5, 40);
  const double da = oracle::uniform(rng, 0.5, 5.0);
  const double db = da * double(ua - cx) / double(ub - cx);
  const Intrinsics cam{fx, fx, double(cx), 0.0, w, 1};
  Image img(w, 1, 3);
  DepthMap depth(w, 1, std::numeric_limits<float>::infinity());
  const float ca = float(oracle::uniform(rng, 0, 1)), cb = float(oracle::uniform(rng, 0, 1));
  img.at(ua, 0, 0) = ca;
  img.at(ub, 0, 0) = cb;
  depth.at(ua, 0) = float(da);
  depth.at(ub, 0) = float(db);
  RigidTransform t;
  t.translation.x() = -double(ua - cx) * da / fx;
  WarpPolicy policy;
  policy.scatter_background = false;
  const auto out = forward_warp(img, depth, cam, t, policy);
  const float expected = da < db ? ca : cb;
  near_won = out.validity.at(cx, 0) && std::abs(out.image.at(cx, 0, 0) - expected) < 1e-4;
  return out.image;
}

// 3: warping oracles.
Outcome warping_oracle() {
  std::mt19937_64 rng(1003);
  double identity = 0.0;
  std::size_t holes = 0;
  for (int t = 0; t < 50; ++t) {
    const int w = oracle::uniform_int(rng, 4, 40), h = oracle::uniform_int(rng, 4, 40);
    const Intrinsics cam{30, 30, w / 2.0, h / 2.0, w, h};
    Image img(w, h, 3);
    DepthMap depth(w, h, 1.0f);
    for (auto& v : img.data) v = float(oracle::uniform(rng, 0, 1));
    for (auto& v : depth.depth) v = float(oracle::uniform(rng, 0.5, 9));
    const auto out = forward_warp(img, depth, cam, RigidTransform::identity());
    holes += out.stats.holes;
    for (std::size_t i = 0; i < img.data.size(); ++i) identity = std::max(identity, double(std::abs(out.image.data[i] - img.data[i])));
  }

  bool counts = pose_grid_angles(30, 5).size() == 2196;
  for (double step : {1.0, 2.5, 5.0, 10.0}) {
    for (int m = 1; m <= 4; ++m) {
      const double alpha = step * m;
      const std::size_t side = std::size_t(2 * m + 1);
      counts = counts && pose_grid_angles(alpha, step).size() == side * side * side - 1;
    }
  }

  int won = 0;
  const int cases = 200;
  for (int t = 0; t < cases; ++t) {
    bool ok = false;
    two_pixel_target(rng, ok);
    won += ok;
  }
  Outcome o;
  o.pass = identity <= 1e-6 && holes == 0 && counts && won == cases;
  o.detail = fmt("identity max err %.1e with %zu holes; grid counts %s (alpha 30 step 5 -> %zu); "
                 "nearer pixel won %d/%d occlusion cases",
                 identity, holes, counts ? "match" : "MISMATCH", pose_grid_angles(30, 5).size(), won, cases);
  return o;
}

// 4: pseudo-views against ground-truth renders of the grid poses.
Outcome pseudo_view_fidelity() {
  const auto start = Clock::now();
  const auto spec = ToySceneSpec::sphere_and_box();
  ToySceneOptions opts;
  const std::vector<Pose> sources{orbit_pose(4.0, 30, 30), orbit_pose(4.0, 160, 45), orbit_pose(4.0, 260, 20)};
  const auto scene = render_toy_scene(spec, sources, opts);
  std::vector<SourceView> inputs;
  for (const auto& f : scene.frames) inputs.push_back({f.image, *f.depth, f.pose, f.mask});
  AugmentConfig cfg;
  cfg.alpha_deg = 10;
  cfg.step_deg = 5;
  const auto views = generate_pseudo_views(inputs, scene.camera, cfg, DepthSaliency{});
  double worst = std::numeric_limits<double>::infinity(), sum = 0.0, worst_holes = 0.0;
  for (const auto& v : views) {
    auto gt = render_toy_view(spec, scene.camera, v.pose).image;
    quantize_8bit(gt);
    const auto p = psnr(v.image, gt, 1.0, &v.validity);
    worst = std::min(worst, p.value);
    sum += std::min(p.value, 100.0);
    worst_holes = std::max(worst_holes, v.hole_fraction);
  }
  const double t = seconds_since(start);
  Outcome o;
  o.pass = worst >= 25.0 && t < 120.0 && views.size() == 3 * 124;
  o.detail = fmt("%zu pseudo-views (|angle| <= 10 deg); min masked PSNR %.2f dB, mean %.2f dB; "
                 "max hole fraction %.3f; %.1fs",
                 views.size(), worst, sum / double(views.size()), worst_holes, t);
  return o;
}

TrainingSet toy_training_set(const Scene& scene, const std::vector<std::size_t>& train,
                             const std::vector<std::size_t>& probes) {
  TrainingSet set;
  set.camera = scene.camera;
  set.range = scene.range;
  set.background = scene.background;
  const DepthSaliency saliency;
  for (auto i : train) set.real.push_back(real_view(scene.frames[i], saliency));
  for (auto i : probes) set.probes.push_back(real_view(scene.frames[i], saliency));
  return set;
}

double view_psnr(const FieldParams<float>& field, const TrainingSet& set, const TrainView& v,
                 const TrainConfig& cfg) {
  RenderOptions ro;
  ro.settings = cfg.render_settings(set.background);
  ro.range = set.range;
  return psnr(render_image(field, set.camera, v.pose, ro).rgb, v.image).value;
}

// 5: a single view overfit with photometric updates only.
Outcome overfit_smoke() {
  const auto start = Clock::now();
  const auto scene = render_toy_scene(ToySceneSpec::sphere_and_box(), {orbit_pose(4.0, 40, 30)}, ToySceneOptions{});
  const auto set = toy_training_set(scene, {0}, {});
  TrainConfig cfg;
  cfg.field = FieldConfig::desk_scale();
  cfg.samples_per_ray = 64;
  cfg.init_iterations = 1000;
  cfg.finetune_iterations = 0;
  cfg.seed = 5;
  std::mt19937_64 init_rng(cfg.seed);
  auto field = FieldParams<float>::initialized(cfg.field, init_rng);
  auto state = TrainState::fresh(cfg);
  train_stage_init(field, set, cfg, state);
  const double p = view_psnr(field, set, set.real[0], cfg);
  const double t = seconds_since(start);
  Outcome o;
  o.pass = p >= 30.0 && t < 600.0;
  o.detail = fmt("2x%d field, N=%d, %llu iterations of %d rays: training-view PSNR %.2f dB; %.1fs",
                 cfg.field.width, cfg.samples_per_ray, (unsigned long long)cfg.init_iterations,
                 cfg.rays_per_batch, p, t);
  return o;
}

// Three orbit views 120 degrees apart plus a held-out probe between the
// pseudo-views of the first; `full` adds the pseudo-views.
struct FewShotData {
  TrainingSet real_only;
  TrainingSet full;
  std::size_t pseudo_views = 0;
};

FewShotData few_shot_data(int width, double alpha_deg) {
  const auto spec = ToySceneSpec::sphere_and_box();
  ToySceneOptions opts;
  opts.width = opts.height = width;
  const auto scene = render_toy_scene(spec,
                                      {orbit_pose(4.0, 0, 30), orbit_pose(4.0, 120, 30),
                                       orbit_pose(4.0, 240, 30), orbit_pose(4.0, 12, 38)},
                                      opts);
  FewShotData d;
  d.real_only = toy_training_set(scene, {0, 1, 2}, {3});
  std::vector<SourceView> inputs;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& f = scene.frames[i];
    inputs.push_back({f.image, *f.depth, f.pose, f.mask});
  }
  AugmentConfig aug;
  aug.alpha_deg = alpha_deg;
  aug.step_deg = 5;
  const auto pseudo = generate_pseudo_views(inputs, scene.camera, aug, DepthSaliency{});
  d.pseudo_views = pseudo.size();
  d.full = d.real_only;
  for (const auto& v : pseudo) d.full.pseudo.push_back(pseudo_view(v));
  return d;
}

TrainConfig few_shot_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.init_iterations = 2000;
  cfg.finetune_iterations = 1000;
  cfg.rays_per_batch = 512;
  cfg.samples_per_ray = 32;
  cfg.pseudo_ratio = 0.5;
  cfg.seed = seed;
  cfg.eval_interval = cfg.init_iterations + cfg.finetune_iterations;
  cfg.checkpoint_interval = cfg.eval_interval;
  return cfg;
}

struct FewShotRun {
  double full_psnr = 0.0;
  double baseline_psnr = 0.0;
  double ip_after_init = 0.0;
  double ip_after_finetune = 0.0;
};

FewShotRun few_shot_seed(const FewShotData& d, std::uint64_t seed) {
  const auto cfg = few_shot_config(seed);
  std::mt19937_64 init_rng(seed);
  const auto start_field = FieldParams<float>::initialized(cfg.field, init_rng);
  const BuiltinEmbedding embedding;
  const std::uint64_t ip_seed = seed + 100;
  FewShotRun r;

  auto field = start_field;
  auto state = TrainState::fresh(cfg);
  train_stage_init(field, d.full, cfg, state);
  r.ip_after_init = evaluate_ip(field, d.full, cfg, 1024, ip_seed);
  train_stage_finetune(field, d.full, cfg, state, embedding);
  r.ip_after_finetune = evaluate_ip(field, d.full, cfg, 1024, ip_seed);
  r.full_psnr = view_psnr(field, d.full, d.full.probes[0], cfg);

  // Same iteration budget, photometric loss on the three real views only.
  auto base_cfg = cfg;
  base_cfg.init_iterations = cfg.init_iterations + cfg.finetune_iterations;
  base_cfg.finetune_iterations = 0;
  base_cfg.pseudo_ratio.reset();
  auto base = start_field;
  auto base_state = TrainState::fresh(base_cfg);
  train_stage_init(base, d.real_only, base_cfg, base_state);
  r.baseline_psnr = view_psnr(base, d.real_only, d.real_only.probes[0], base_cfg);
  return r;
}

double median3(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

// 6: pseudo-views plus MSC/IP against the photometric-only baseline.
Outcome few_shot_direction() {
  const auto start = Clock::now();
  const auto data = few_shot_data(48, 10);
  std::vector<FewShotRun> runs;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    runs.push_back(few_shot_seed(data, seed));
    const auto& r = runs.back();
    per_seed += fmt("; seed %llu: %.2f vs %.2f dB, IP %.3f -> %.3f", (unsigned long long)seed,
                    r.full_psnr, r.baseline_psnr, r.ip_after_init, r.ip_after_finetune);
  }
  const double gain = median3(runs[0].full_psnr - runs[0].baseline_psnr,
                              runs[1].full_psnr - runs[1].baseline_psnr,
                              runs[2].full_psnr - runs[2].baseline_psnr);
  const double ip_drop = median3(runs[0].ip_after_init - runs[0].ip_after_finetune,
                                 runs[1].ip_after_init - runs[1].ip_after_finetune,
                                 runs[2].ip_after_init - runs[2].ip_after_finetune);
  const double t = seconds_since(start);
  Outcome o;
  o.pass = gain >= 1.0 && ip_drop > 0.0 && t < 1800.0;
  o.detail = fmt("median probe gain %.2f dB, median IP decrease %.4f (%zu pseudo-views)", gain,
                 ip_drop, data.pseudo_views) +
             per_seed + fmt("; %.0fs", t);
  return o;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells(1);
    for (char c : line) {
      if (c == ',') {
        cells.emplace_back();
      } else {
        cells.back() += c;
      }
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TrainConfig short_config(std::uint64_t seed) {
  auto cfg = few_shot_config(seed);
  cfg.init_iterations = 60;
  cfg.finetune_iterations = 60;
  cfg.rays_per_batch = 128;
  cfg.samples_per_ray = 16;
  cfg.msc_interval = 5;
  cfg.msc_resolution = 12;
  cfg.eval_interval = 20;
  cfg.checkpoint_interval = 30;
  cfg.ip_unseen_rays = 32;
  cfg.log_wall_time = false;
  return cfg;
}

// Runs both stages with a CSV log and checkpoints under `dir`.
void logged_run(const FewShotData& d, const TrainConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "ckpt");
  std::mt19937_64 init_rng(cfg.seed);
  auto field = FieldParams<float>::initialized(cfg.field, init_rng);
  auto state = TrainState::fresh(cfg);
  MetricsLog log(dir / "metrics.csv", cfg.log_wall_time);
  TrainHooks hooks;
  hooks.log = &log;
  hooks.checkpoint_dir = dir / "ckpt";
  train(field, d.full, cfg, state, BuiltinEmbedding(), hooks);
}

// 7: the logged loss breakdown of every iteration.
Outcome stage_separation() {
  const auto start = Clock::now();
  const auto data = few_shot_data(24, 10);
  const auto dir = oracle::scratch_dir("acceptance_7");
  const auto cfg = short_config(7);
  logged_run(data, cfg, dir);
  const auto rows = read_csv(dir / "metrics.csv");
  if (rows.empty()) return {false, "metrics log is empty"};
  const auto& header = rows[0];
  auto col = [&](const char* name) {
    return std::size_t(std::find(header.begin(), header.end(), name) - header.begin());
  };
  const std::size_t stage = col("stage"), msc = col("msc"), ip = col("ip"),
                    lmsc = col("lambda_msc"), lip = col("lambda_ip"), total = col("total"),
                    photo = col("photometric"), pseudo = col("pseudo_rays"),
                    evaluated = col("msc_evaluated"), ip_rays = col("ip_rays");
  std::size_t init_rows = 0, ft_rows = 0, violations = 0, init_pseudo = 0, ft_msc = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != header.size()) {
      ++violations;
      continue;
    }
    if (r[stage] == "init") {
      ++init_rows;
      violations += r[msc] != "0" || r[ip] != "0" || r[lmsc] != "0" || r[lip] != "0" ||
                    r[evaluated] != "0" || r[ip_rays] != "0" || r[total] != r[photo];
      init_pseudo += r[pseudo] != "0";
    } else if (r[stage] == "finetune") {
      ++ft_rows;
      violations += r[pseudo] != "0";
      ft_msc += r[evaluated] == "1";
    } else {
      ++violations;
    }
  }
  const double t = seconds_since(start);
  Outcome o;
  o.pass = violations == 0 && init_rows == cfg.init_iterations &&
           ft_rows == cfg.finetune_iterations && init_pseudo > 0 && ft_msc > 0;
  o.detail = fmt("%zu init rows (%zu with pseudo rays), %zu fine-tune rows (%zu with MSC); "
                 "%zu violations; %.1fs",
                 init_rows, init_pseudo, ft_rows, ft_msc, violations, t);
  return o;
}

// 8: two identical single-threaded runs.
Outcome reproducibility() {
  const auto start = Clock::now();
  const auto data = few_shot_data(24, 10);
  const auto dir = oracle::scratch_dir("acceptance_8");
  const auto cfg = short_config(8);
  logged_run(data, cfg, dir / "a");
  logged_run(data, cfg, dir / "b");
  std::size_t files = 0, differing = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto other = dir / "b" / std::filesystem::relative(e.path(), dir / "a");
    if (!std::filesystem::exists(other) || read_bytes(e.path()) != read_bytes(other)) ++differing;
  }
  std::size_t files_b = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "b")) files_b += e.is_regular_file();
  const double t = seconds_since(start);
  Outcome o;
  o.pass = differing == 0 && files == files_b && files >= 3;
  o.detail = fmt("%zu files compared (checkpoints and metrics CSV), %zu differ; %.1fs", files,
                 differing, t);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  set_num_threads(1);
  retain_freed_memory();
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"rendering identities", rendering_identities},
      {"warping oracle", warping_oracle},
      {"pseudo-view fidelity", pseudo_view_fidelity},
      {"overfit smoke train", overfit_smoke},
      {"few-shot direction", few_shot_direction},
      {"stage separation", stage_separation},
      {"reproducibility", reproducibility},
  };
  std::vector<int> run;
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) run.push_back(std::atoi(argv[i]));
  } else {
    for (int i = 1; i <= int(criteria.size()); ++i) run.push_back(i);
  }
  bool all = true;
  for (int n : run) {
    if (n < 1 || n > int(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %d\n", n);
      return 1;
    }
    Outcome o;
    try {
      o = criteria[n - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d (%s): %s - %s\n", n, criteria[n - 1].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
