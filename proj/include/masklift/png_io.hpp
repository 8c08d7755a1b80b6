#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Dense>

namespace masklift {

/// height x width, row (0,0) = top-left pixel.
using Image16 = Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Writes a 16-bit grayscale PNG. Samples are stored big-endian in the file
/// as the format requires; no ancillary chunks, so identical images produce
/// identical files.
void save_png16(const Image16& image, const std::filesystem::path& path);

/// Reads a PNG written by save_png16. Rejects anything that is not 16-bit
/// grayscale rather than silently converting.
Image16 load_png16(const std::filesystem::path& path);

}  // namespace masklift
