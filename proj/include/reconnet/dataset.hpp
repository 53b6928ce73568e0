#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reconnet/plane.hpp"
#include "reconnet/sensing.hpp"

namespace reconnet {

using Patch = std::vector<float>;

struct PatchExtraction {
  std::vector<Patch> patches;         // raster order within each plane, planes in input order
  std::vector<std::size_t> skipped;   // indices of planes smaller than the patch size
};

// Patches with top-left corners on the {0, stride, 2 stride, ...} lattice
// that fit entirely inside each plane.
PatchExtraction extract_patches(std::span<const Plane> planes, std::size_t size = kBlockSide,
                                std::size_t stride = 14);

// Seeded random subset of `count` patches, kept in their original order.
// Returns the input unchanged when count is 0 or not smaller than its size.
std::vector<Patch> sample_patches(std::vector<Patch> patches, std::size_t count, std::uint64_t seed);

enum class SplitTag : std::uint8_t { Train, Validation };

struct TrainingRecord {
  std::vector<float> y;  // length m
  std::vector<float> x;  // length kBlockDim, values in [0, 1]
};

struct PatchDataset {
  std::size_t m = 0;
  std::uint64_t matrix_seed = 0;
  SplitTag split = SplitTag::Train;
  std::vector<TrainingRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct DatasetSplit {
  PatchDataset train;
  PatchDataset validation;
};

// Noiseless pairs (Phi x, x). Rng(seed) shuffles the patch indices and the
// first round(fraction * count) go to validation; both splits keep the
// original patch order.
DatasetSplit build_dataset(std::span<const Patch> patches, const MeasurementMatrix& phi,
                           double validation_fraction = 0.1, std::uint64_t seed = 0);

// DSET cache: "DSET", u32 m, u64 matrix seed, u32 record count, then per
// record kBlockDim float32 x followed by m float32 y, little-endian.
// Mean label pixel over all records; throws ArgumentError when empty.
double mean_pixel(const PatchDataset& dataset);

std::vector<std::uint8_t> encode_dataset(const PatchDataset& dataset);
PatchDataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const PatchDataset& dataset, const std::filesystem::path& path);
PatchDataset load_dataset(const std::filesystem::path& path);

// Newline-delimited image paths; blank lines and '#' comments are skipped.
// Relative entries resolve against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);

// Loads every manifest image as a luminance plane.
std::vector<Plane> load_luminance_planes(std::span<const std::filesystem::path> paths);

}  // namespace reconnet
