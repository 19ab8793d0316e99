#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "panerf/field.hpp"

namespace panerf {

/// Binary checkpoint layout, all integers and floats little-endian:
///
///   char[8]  magic "PANERFCK"
///   u32      format version (kCheckpointVersion)
///   u32      position frequencies, u32 direction frequencies, u8 include_input
///   u32      trunk depth, u32 width, i32 skip layer (-1 = none)
///   u32      tensor count, then per tensor:
///              u32 name length, name bytes, u32 rank, u32 dims[rank],
///              f32 values in row-major order
///   u8       1 if an optimizer section follows, else 0. The section holds
///            u32 stage, u64 iteration, u64 optimizer step, u32 length + bytes
///            of the RNG state, then the first- and second-moment tensors
///            in the same record format as above.
inline constexpr char kCheckpointMagic[8] = {'P', 'A', 'N', 'E', 'R', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct OptimizerSnapshot {
  std::uint32_t stage = 0;
  std::uint64_t iteration = 0;
  std::uint64_t step = 0;
  std::string rng_state;
  FieldParams<float> first_moment;
  FieldParams<float> second_moment;
};

struct Checkpoint {
  FieldParams<float> params;
  std::optional<OptimizerSnapshot> optimizer;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws ParseError on malformed bytes and DataError on a version mismatch.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary sibling and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace panerf
