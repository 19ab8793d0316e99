#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "panerf/augment.hpp"
#include "panerf/geometry.hpp"
#include "panerf/image.hpp"

namespace panerf {

struct Frame {
  std::string name;
  std::string split = "train";
  Pose pose;
  Image image;                   // RGB in [0, 1], alpha already composited
  std::optional<DepthMap> depth;  // z-depth; absent when the dataset has none
  std::optional<Mask> mask;
};

struct Scene {
  Intrinsics camera;
  DepthRange range{2.0, 6.0};
  Vec3 background = Vec3::Ones();
  std::vector<Frame> frames;

  /// Indices of frames whose split equals `split`, in file order.
  std::vector<std::size_t> split(const std::string& split) const;
};

inline constexpr int kSceneFormatVersion = 1;

/// Loads either the native manifest or a NeRF-synthetic "transforms" layout.
///
/// `path` may be a manifest file or a directory. A directory is searched for
/// scene.json (native), then transforms_{train,val,test}.json, then
/// transforms.json.
///
/// Native manifest (JSON, paths relative to the manifest):
///   { "format": "panerf-scene", "version": 1,
///     "camera": {"fx", "fy", "cx", "cy", "width", "height"}
///             | {"camera_angle_x", "width", "height"},
///     "near": 2.0, "far": 6.0, "background": [1, 1, 1],
///     "frames": [{"name", "split", "image", "depth"?, "mask"?,
///                 "transform_matrix": 4x4 camera-to-world rows}] }
///
/// Transforms layout: "camera_angle_x" plus frames with "file_path" (".png"
/// appended when it has no extension) and "transform_matrix"; optional
/// per-frame "depth_path" (PFM) and "mask_path" extensions. Alpha is
/// composited over `background`.
///
/// Throws DataError naming the frame on missing files, malformed matrices or
/// size mismatches.
Scene load_scene(const std::filesystem::path& path, const Vec3& background = Vec3::Ones());

/// Writes `scene` as a native manifest in `directory` (images/, depth/ and
/// masks/ subdirectories). Images are stored as 8-bit PNG.
void save_scene(const std::filesystem::path& directory, const Scene& scene);

/// Rounds every channel to the nearest multiple of 1/255, the precision PNG keeps.
void quantize_8bit(Image& image);

}  // namespace panerf
