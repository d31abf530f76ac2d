#pragma once

#include <filesystem>

#include "ridekit/image.hpp"

namespace ridekit {

/// On-disk raster encodings.
///
/// raw: lossless little-endian container,
///   bytes 0-7   magic "RKGRID01"
///   bytes 8-27  uint32 height, width, channels, dtype (1 = f64), domain tag
///   bytes 28-   height*width*channels IEEE-754 doubles, row-major, interleaved
/// png: 8-bit gray or RGB; values are clamped to [0,1] and rounded to n/255.
/// pgm: binary P5, single channel, maxval <= 65535 on load, 255 on save.
enum class RasterFormat { raw, png, pgm };

/// Chooses the format from the file extension (.raw, .png, .pgm).
RasterFormat format_from_path(const std::filesystem::path& path);

/// PNG and PGM inputs load as Domain::composite in [0,1]; raw files keep the
/// stored domain tag.
ImageGrid load_raster(const std::filesystem::path& path);
void save_raster(const ImageGrid& img, const std::filesystem::path& path);
void save_raster(const ImageGrid& img, const std::filesystem::path& path, RasterFormat format);

/// Any nonzero pixel (PGM/PNG) or value >= 0.5 (raw) is foreground.
BinaryMask load_mask(const std::filesystem::path& path);
/// Writes 0/255 binary PGM.
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Min-max rescales a grid into a composite-domain preview. A flat grid maps
/// to 0.
ImageGrid preview_normalized(const ImageGrid& img);

}  // namespace ridekit
