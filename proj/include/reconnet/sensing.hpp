#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "reconnet/plane.hpp"

namespace reconnet {

inline constexpr std::size_t kBlockSide = 33;
inline constexpr std::size_t kBlockDim = kBlockSide * kBlockSide;

// The four measurement rates used throughout the experiments.
inline constexpr double kStandardRates[] = {0.25, 0.10, 0.04, 0.01};

// m x n sensing operator, row-major. Blocks are vectorized row-major.
struct MeasurementMatrix {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<double> entries;
  std::uint64_t seed = 0;
  bool quantized = false;

  std::span<const double> row(std::size_t i) const { return {entries.data() + i * n, n}; }
  friend bool operator==(const MeasurementMatrix&, const MeasurementMatrix&) = default;
};

// Measurement count for a rate: floor(mr * n), at least 1. For n = 1089 the
// four standard rates return the fixed counts 272, 109, 43 and 10 (the
// 0.10 count is one above the floor of 108.9).
std::size_t measurements_for_rate(std::size_t n, double mr);

// i.i.d. N(0, 1) entries from Rng(seed), rows orthonormalized by modified
// Gram-Schmidt.
MeasurementMatrix generate_matrix(std::size_t m, std::size_t n, std::uint64_t seed);

// Symmetric 8-bit quantization: entry -> round(entry / s) * s with
// s = max|entry| / 127.
MeasurementMatrix quantize_matrix_8bit(const MeasurementMatrix& phi);

// max |Phi Phi^T - I| over all entries.
double orthonormality_residual(const MeasurementMatrix& phi);

// Phi x and Phi^T y in double precision.
std::vector<double> apply(const MeasurementMatrix& phi, std::span<const double> x);
std::vector<double> apply_transpose(const MeasurementMatrix& phi, std::span<const double> y);

// PHIM container: "PHIM", u32 version, u32 m, u32 n, u64 seed, u8 quantized,
// then m * n little-endian float64 entries.
std::vector<std::uint8_t> encode_matrix(const MeasurementMatrix& phi);
MeasurementMatrix decode_matrix(std::span<const std::uint8_t> bytes);
void save_matrix(const MeasurementMatrix& phi, const std::filesystem::path& path);
MeasurementMatrix load_matrix(const std::filesystem::path& path);

// Image cut into non-overlapping 33 x 33 blocks after edge-replicate padding.
struct BlockGrid {
  std::size_t height = 0;  // original
  std::size_t width = 0;
  std::size_t padded_height = 0;
  std::size_t padded_width = 0;
  std::vector<std::vector<double>> blocks;  // raster order, each kBlockDim row-major

  std::size_t block_rows() const { return padded_height / kBlockSide; }
  std::size_t block_cols() const { return padded_width / kBlockSide; }
};

BlockGrid split_blocks(const Plane& image);

// Places blocks in raster order, crops to the original size and clamps to [0, 1].
Plane assemble_blocks(const BlockGrid& grid);

struct MeasurementSet {
  std::vector<std::vector<double>> y;  // one vector of length m per block
  double noise_sigma = 0.0;            // 8-bit pixel units
  std::uint64_t noise_seed = 0;
  std::uint64_t matrix_seed = 0;
  std::size_t m = 0;
  bool quantized = false;
};

// y_i = Phi x_i + e_i with e_i ~ N(0, (noise_sigma / 255)^2). Block i draws its
// noise from Rng(seed ^ i), so the result does not depend on evaluation order.
MeasurementSet sense(const MeasurementMatrix& phi, const BlockGrid& grid, double noise_sigma, std::uint64_t seed);

}  // namespace reconnet
