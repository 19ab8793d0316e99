#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include <panerf/error.hpp>
#include <panerf/image_io.hpp>

#include "panerf_cli/cli.hpp"

namespace panerf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json matrix_json(const Mat4& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Mat4 matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw DataError(where + ": transform_matrix must be 4x4");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw DataError(where + ": transform_matrix must be 4x4");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

void write_pseudo_cache(const fs::path& dir, const std::vector<PseudoView>& views,
                        const PseudoCacheInfo& info) {
  for (const char* sub : {"images", "validity", "saliency"}) fs::create_directories(dir / sub);
  json entries = json::array();
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    const std::string stem = fmt::format("p_{:05d}", i);
    write_png(dir / "images" / (stem + ".png"), v.image);
    write_mask_png(dir / "validity" / (stem + ".png"), v.validity);
    write_mask_png(dir / "saliency" / (stem + ".png"), v.saliency);
    entries.push_back({{"image", "images/" + stem + ".png"},
                       {"validity", "validity/" + stem + ".png"},
                       {"saliency", "saliency/" + stem + ".png"},
                       {"source_id", v.source_id},
                       {"angles_deg", {v.angles_deg[0], v.angles_deg[1], v.angles_deg[2]}},
                       {"hole_fraction", v.hole_fraction},
                       {"transform_matrix", matrix_json(v.pose.matrix())}});
  }
  const json manifest = {{"format", "panerf-pseudo"},
                         {"version", kPseudoCacheVersion},
                         {"alpha_deg", info.alpha_deg},
                         {"step_deg", info.step_deg},
                         {"saliency", info.saliency},
                         {"sources", info.sources},
                         {"views", entries}};
  std::ofstream(dir / "pseudo.json") << manifest.dump(1) << '\n';
}

std::vector<PseudoView> read_pseudo_cache(const fs::path& dir, PseudoCacheInfo* info) {
  const auto path = dir / "pseudo.json";
  std::ifstream in(path);
  if (!in) throw DataError("no pseudo-view cache at " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "panerf-pseudo") throw DataError(path.string() + " is not a pseudo-view cache");
  if (j.value("version", 0) != kPseudoCacheVersion) {
    throw DataError(fmt::format("{}: cache version {} (expected {})", path.string(),
                                j.value("version", 0), kPseudoCacheVersion));
  }
  std::vector<PseudoView> views;
  try {
    if (info) {
      info->alpha_deg = j.at("alpha_deg").get<double>();
      info->step_deg = j.at("step_deg").get<double>();
      info->saliency = j.at("saliency").get<std::string>();
      info->sources = j.at("sources").get<std::vector<std::string>>();
    }
    for (const auto& e : j.at("views")) {
      const std::string where = path.string() + " view " + std::to_string(views.size());
      PseudoView v;
      v.image = read_png(dir / e.at("image").get<std::string>());
      v.validity = read_mask_png(dir / e.at("validity").get<std::string>());
      v.saliency = read_mask_png(dir / e.at("saliency").get<std::string>());
      if (v.image.channels != 3 || v.validity.width != v.image.width ||
          v.validity.height != v.image.height || v.saliency.width != v.image.width ||
          v.saliency.height != v.image.height) {
        throw DataError(where + ": image and masks disagree in size");
      }
      v.source_id = e.at("source_id").get<std::size_t>();
      const auto a = e.at("angles_deg").get<std::vector<double>>();
      if (a.size() != 3) throw DataError(where + ": angles_deg needs three entries");
      v.angles_deg = {a[0], a[1], a[2]};
      v.hole_fraction = e.at("hole_fraction").get<double>();
      v.pose = Pose::from_matrix(matrix_from_json(e.at("transform_matrix"), where));
      views.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return views;
}

}  // namespace panerf::cli
