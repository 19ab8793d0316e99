#pragma once

#include <filesystem>

#include "panerf/augment.hpp"
#include "panerf/image.hpp"

namespace panerf {

/// 8-bit PNG with linear [0,1] mapping (no gamma handling). Grey, grey+alpha,
/// RGB and RGBA files are accepted; channels are returned as stored (1..4).
/// 16-bit files are reduced to 8 bits. Throws DataError on unreadable files.
Image read_png(const std::filesystem::path& path);

/// Writes 1, 2, 3 or 4 channels; values are clamped to [0,1] and rounded to 8 bits.
void write_png(const std::filesystem::path& path, const Image& image);

/// Masks are single-channel PNGs: 255 for set, 0 for clear. On read any
/// value >= 128 counts as set.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

/// Depth maps as single-channel PFM ("Pf"): little-endian (scale -1), rows
/// stored bottom to top. Invalid pixels are written as +inf, so any valid map
/// round-trips bit-exactly. Big-endian files (positive scale) are read too.
/// Throws ParseError carrying the byte offset of a malformed header or payload.
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_pfm(const std::filesystem::path& path);

}  // namespace panerf
