#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "reconnet/plane.hpp"

namespace reconnet {

// 8-bit raster decoded from binary PGM (1 channel) or PPM (3 channels).
struct ImageFile {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> samples;  // row-major, channel fastest

  friend bool operator==(const ImageFile&, const ImageFile&) = default;
};

// Accepts P5/P6 with '#' comments in the header and maxval 255. Errors carry
// the byte offset of the offending token.
ImageFile decode_netpbm(std::span<const std::uint8_t> bytes);
// Canonical header "P5\n<w> <h>\n255\n" (P6 for three channels).
std::vector<std::uint8_t> encode_netpbm(const ImageFile& image);

ImageFile load_image(const std::filesystem::path& path);
void save_image(const ImageFile& image, const std::filesystem::path& path);

// Per-channel planes scaled to [0, 1].
std::vector<Plane> planes_from_image(const ImageFile& image);
// Inverse of planes_from_image: round(clamp(v, 0, 1) * 255) per sample.
ImageFile image_from_planes(std::span<const Plane> planes);

// BT.601 luma: (0.299 R + 0.587 G + 0.114 B) / 255; grayscale is just scaled.
Plane luminance(const ImageFile& image);

}  // namespace reconnet
