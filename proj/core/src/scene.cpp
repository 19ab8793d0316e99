#include "panerf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "panerf/error.hpp"
#include "panerf/image_io.hpp"

namespace panerf {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> Scene::split(const std::string& name) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].split == name) out.push_back(i);
  }
  return out;
}

void quantize_8bit(Image& image) {
  for (auto& v : image.data) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  }
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
}

Pose parse_pose(const json& m, const std::string& frame) {
  if (!m.is_array() || (m.size() != 4 && m.size() != 3)) {
    throw DataError("frame '" + frame + "': transform_matrix must have 3 or 4 rows of 4 numbers");
  }
  Mat4 mat = Mat4::Identity();
  for (std::size_t r = 0; r < m.size(); ++r) {
    if (!m[r].is_array() || m[r].size() != 4) {
      throw DataError("frame '" + frame + "': transform_matrix row " + std::to_string(r) +
                      " must hold 4 numbers");
    }
    for (std::size_t c = 0; c < 4; ++c) {
      if (!m[r][c].is_number()) {
        throw DataError("frame '" + frame + "': transform_matrix has a non-numeric entry");
      }
      mat(Eigen::Index(r), Eigen::Index(c)) = m[r][c].get<double>();
    }
  }
  if (m.size() == 4 && (mat.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-6) {
    throw DataError("frame '" + frame + "': last matrix row must be 0 0 0 1");
  }
  try {
    Pose p = Pose::from_matrix(mat);
    p.validate();
    return p;
  } catch (const DomainError& e) {
    throw DataError("frame '" + frame + "': " + e.what());
  }
}

json pose_json(const Pose& p) {
  const Mat4 m = p.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

Image to_rgb(Image img, const Vec3& bg, const std::string& frame) {
  if (img.channels == 3) return img;
  Image out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      switch (img.channels) {
        case 1:
        case 2: {
          const float a = img.channels == 2 ? img.at(x, y, 1) : 1.0f;
          for (int c = 0; c < 3; ++c) {
            out.at(x, y, c) = img.at(x, y, 0) * a + float(bg[c]) * (1.0f - a);
          }
          break;
        }
        case 4: {
          const float a = img.at(x, y, 3);
          for (int c = 0; c < 3; ++c) {
            out.at(x, y, c) = img.at(x, y, c) * a + float(bg[c]) * (1.0f - a);
          }
          break;
        }
        default:
          throw DataError("frame '" + frame + "': unsupported channel count");
      }
    }
  }
  return out;
}

template <typename F>
auto for_frame(const std::string& frame, F&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError("frame '" + frame + "': " + e.what(), e.offset());
  } catch (const DataError& e) {
    throw DataError("frame '" + frame + "': " + e.what());
  }
}

void load_optional_files(Frame& f, const fs::path& depth, const fs::path& mask) {
  if (!depth.empty()) {
    f.depth = for_frame(f.name, [&] { return read_pfm(depth); });
    if (f.depth->width != f.image.width || f.depth->height != f.image.height) {
      throw DataError("frame '" + f.name + "': depth size differs from image");
    }
  }
  if (!mask.empty()) {
    f.mask = for_frame(f.name, [&] { return read_mask_png(mask); });
    if (f.mask->width != f.image.width || f.mask->height != f.image.height) {
      throw DataError("frame '" + f.name + "': mask size differs from image");
    }
  }
}

void check_sizes(const Scene& s) {
  for (const auto& f : s.frames) {
    if (f.image.width != s.camera.width || f.image.height != s.camera.height) {
      throw DataError("frame '" + f.name + "': image is " + std::to_string(f.image.width) + "x" +
                      std::to_string(f.image.height) + ", camera expects " +
                      std::to_string(s.camera.width) + "x" + std::to_string(s.camera.height));
    }
  }
}

fs::path relative_file(const fs::path& base, const json& v, const std::string& frame,
                       const char* key) {
  if (!v.is_string()) throw DataError("frame '" + frame + "': '" + key + "' must be a string");
  const fs::path p = base / v.get<std::string>();
  if (!fs::exists(p)) throw DataError("frame '" + frame + "': missing file " + p.string());
  return p;
}

Scene load_native(const fs::path& file) {
  const json j = read_json(file);
  if (j.value("format", std::string()) != "panerf-scene") {
    throw DataError(file.string() + " is not a panerf scene manifest");
  }
  const int version = j.value("version", 0);
  if (version != kSceneFormatVersion) {
    throw DataError(file.string() + ": unsupported manifest version " + std::to_string(version));
  }
  const fs::path base = file.parent_path();
  Scene s;
  try {
    const json& cam = j.at("camera");
    const int w = cam.at("width").get<int>();
    const int h = cam.at("height").get<int>();
    if (cam.contains("camera_angle_x")) {
      s.camera = Intrinsics::from_horizontal_fov(cam.at("camera_angle_x").get<double>(), w, h);
    } else {
      s.camera = {cam.at("fx").get<double>(), cam.at("fy").get<double>(),
                  cam.at("cx").get<double>(), cam.at("cy").get<double>(), w, h};
    }
    s.range = {j.value("near", 2.0), j.value("far", 6.0)};
    if (j.contains("background")) {
      const auto bg = j.at("background").get<std::vector<double>>();
      if (bg.size() != 3) throw DataError("background must have 3 components");
      s.background = Vec3(bg[0], bg[1], bg[2]);
    }
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": " + e.what());
  }
  try {
    s.camera.validate();
  } catch (const DomainError& e) {
    throw DataError(file.string() + ": " + e.what());
  }
  if (!(s.range.near >= 0.0 && s.range.far > s.range.near)) {
    throw DataError(file.string() + ": need 0 <= near < far");
  }

  const json& frames = j.at("frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& fj = frames[i];
    Frame f;
    f.name = fj.value("name", "frame_" + std::to_string(i));
    f.split = fj.value("split", std::string("train"));
    if (!fj.contains("transform_matrix")) {
      throw DataError("frame '" + f.name + "': missing transform_matrix");
    }
    f.pose = parse_pose(fj.at("transform_matrix"), f.name);
    if (!fj.contains("image")) throw DataError("frame '" + f.name + "': missing image");
    const fs::path img = relative_file(base, fj.at("image"), f.name, "image");
    f.image = to_rgb(for_frame(f.name, [&] { return read_png(img); }), s.background, f.name);
    const fs::path depth = fj.contains("depth") ? relative_file(base, fj["depth"], f.name, "depth")
                                                : fs::path();
    const fs::path mask =
        fj.contains("mask") ? relative_file(base, fj["mask"], f.name, "mask") : fs::path();
    load_optional_files(f, depth, mask);
    s.frames.push_back(std::move(f));
  }
  check_sizes(s);
  return s;
}

void load_transforms(const fs::path& file, const std::string& split, const Vec3& background,
                     Scene& s, bool first) {
  const json j = read_json(file);
  const fs::path base = file.parent_path();
  if (!j.contains("camera_angle_x") || !j["camera_angle_x"].is_number()) {
    throw DataError(file.string() + ": missing camera_angle_x");
  }
  const double angle_x = j["camera_angle_x"].get<double>();
  if (!j.contains("frames") || !j["frames"].is_array()) {
    throw DataError(file.string() + ": missing frames");
  }
  for (std::size_t i = 0; i < j["frames"].size(); ++i) {
    const json& fj = j["frames"][i];
    Frame f;
    f.split = split;
    std::string rel = fj.value("file_path", std::string());
    if (rel.empty()) throw DataError(file.string() + ": frame " + std::to_string(i) + " has no file_path");
    if (!fs::path(rel).has_extension()) rel += ".png";
    f.name = split + "/" + fs::path(rel).stem().string();
    if (!fj.contains("transform_matrix")) {
      throw DataError("frame '" + f.name + "': missing transform_matrix");
    }
    f.pose = parse_pose(fj["transform_matrix"], f.name);
    const fs::path img = relative_file(base, json(rel), f.name, "file_path");
    f.image = to_rgb(for_frame(f.name, [&] { return read_png(img); }), background, f.name);
    const fs::path depth = fj.contains("depth_path")
                               ? relative_file(base, fj["depth_path"], f.name, "depth_path")
                               : fs::path();
    const fs::path mask = fj.contains("mask_path")
                              ? relative_file(base, fj["mask_path"], f.name, "mask_path")
                              : fs::path();
    load_optional_files(f, depth, mask);
    if (first && s.frames.empty()) {
      s.camera = Intrinsics::from_horizontal_fov(angle_x, f.image.width, f.image.height);
    }
    s.frames.push_back(std::move(f));
  }
}

}  // namespace

Scene load_scene(const fs::path& path, const Vec3& background) {
  if (!fs::exists(path)) throw DataError("scene path " + path.string() + " does not exist");
  fs::path file = path;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "scene.json")) {
      file = path / "scene.json";
    } else {
      Scene s;
      s.background = background;
      bool any = false;
      for (const char* split : {"train", "val", "test"}) {
        const fs::path t = path / (std::string("transforms_") + split + ".json");
        if (!fs::exists(t)) continue;
        load_transforms(t, split, background, s, !any);
        any = true;
      }
      if (!any) {
        if (!fs::exists(path / "transforms.json")) {
          throw DataError("no scene.json or transforms*.json in " + path.string());
        }
        load_transforms(path / "transforms.json", "train", background, s, true);
      }
      check_sizes(s);
      return s;
    }
  }
  const json probe = read_json(file);
  if (probe.contains("format")) return load_native(file);
  Scene s;
  s.background = background;
  const std::string stem = file.stem().string();
  const std::string split = stem.rfind("transforms_", 0) == 0 ? stem.substr(11) : "train";
  load_transforms(file, split, background, s, true);
  check_sizes(s);
  return s;
}

void save_scene(const fs::path& dir, const Scene& scene) {
  fs::create_directories(dir / "images");
  json frames = json::array();
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    const Frame& f = scene.frames[i];
    const std::string stem = "frame_" + std::to_string(i);
    json fj;
    fj["name"] = f.name;
    fj["split"] = f.split;
    fj["image"] = "images/" + stem + ".png";
    write_png(dir / "images" / (stem + ".png"), f.image);
    if (f.depth) {
      fs::create_directories(dir / "depth");
      fj["depth"] = "depth/" + stem + ".pfm";
      write_pfm(dir / "depth" / (stem + ".pfm"), *f.depth);
    }
    if (f.mask) {
      fs::create_directories(dir / "masks");
      fj["mask"] = "masks/" + stem + ".png";
      write_mask_png(dir / "masks" / (stem + ".png"), *f.mask);
    }
    fj["transform_matrix"] = pose_json(f.pose);
    frames.push_back(std::move(fj));
  }
  json j;
  j["format"] = "panerf-scene";
  j["version"] = kSceneFormatVersion;
  j["camera"] = {{"fx", scene.camera.fx}, {"fy", scene.camera.fy}, {"cx", scene.camera.cx},
                 {"cy", scene.camera.cy}, {"width", scene.camera.width},
                 {"height", scene.camera.height}};
  j["near"] = scene.range.near;
  j["far"] = scene.range.far;
  j["background"] = {scene.background.x(), scene.background.y(), scene.background.z()};
  j["frames"] = std::move(frames);
  std::ofstream out(dir / "scene.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "scene.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace panerf
