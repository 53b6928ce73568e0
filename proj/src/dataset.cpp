#include "reconnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "reconnet/binary_io.hpp"
#include "reconnet/error.hpp"
#include "reconnet/image_io.hpp"
#include "reconnet/rng.hpp"

namespace reconnet {

std::vector<Patch> sample_patches(std::vector<Patch> patches, std::size_t count, std::uint64_t seed) {
  if (count == 0 || patches.size() <= count) return patches;
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed ^ 0x5bd1e995ULL);
  shuffle(std::span<std::size_t>(order), rng);
  order.resize(count);
  std::sort(order.begin(), order.end());
  std::vector<Patch> kept;
  kept.reserve(count);
  for (auto i : order) kept.push_back(std::move(patches[i]));
  return kept;
}

PatchExtraction extract_patches(std::span<const Plane> planes, std::size_t size, std::size_t stride) {
  if (planes.empty()) throw ArgumentError("patch extraction needs at least one image");
  if (size == 0 || stride == 0) throw ArgumentError("patch size and stride must be positive");
  PatchExtraction result;
  for (std::size_t idx = 0; idx < planes.size(); ++idx) {
    const Plane& plane = planes[idx];
    if (plane.height < size || plane.width < size) {
      result.skipped.push_back(idx);
      continue;
    }
    for (std::size_t r0 = 0; r0 + size <= plane.height; r0 += stride)
      for (std::size_t c0 = 0; c0 + size <= plane.width; c0 += stride) {
        Patch patch(size * size);
        for (std::size_t r = 0; r < size; ++r)
          for (std::size_t c = 0; c < size; ++c)
            patch[r * size + c] = static_cast<float>(plane.at(r0 + r, c0 + c));
        result.patches.push_back(std::move(patch));
      }
  }
  return result;
}

DatasetSplit build_dataset(std::span<const Patch> patches, const MeasurementMatrix& phi, double validation_fraction,
                           std::uint64_t seed) {
  if (phi.n != kBlockDim) throw ArgumentError("dataset matrix must have n = 1089");
  if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5))
    throw ArgumentError("validation fraction must lie in [0, 0.5], got " + std::to_string(validation_fraction));
  for (const auto& patch : patches)
    if (patch.size() != kBlockDim) throw ArgumentError("patches must hold 1089 samples");

  const std::size_t count = patches.size();
  const auto val_count = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(count)));
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<bool> is_val(count, false);
  for (std::size_t i = 0; i < val_count; ++i) is_val[order[i]] = true;

  DatasetSplit split;
  split.train = {phi.m, phi.seed, SplitTag::Train, {}};
  split.validation = {phi.m, phi.seed, SplitTag::Validation, {}};
  std::vector<TrainingRecord> records(count);
  const auto n = static_cast<long>(count);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const Patch& patch = patches[static_cast<std::size_t>(i)];
    std::vector<double> x(patch.begin(), patch.end());
    const auto y = reconnet::apply(phi, x);
    records[static_cast<std::size_t>(i)] = {std::vector<float>(y.begin(), y.end()), patch};
  }
  for (std::size_t i = 0; i < count; ++i)
    (is_val[i] ? split.validation : split.train).records.push_back(std::move(records[i]));
  return split;
}

double mean_pixel(const PatchDataset& dataset) {
  if (dataset.empty()) throw ArgumentError("dataset is empty");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : dataset.records) {
    for (float v : r.x) sum += v;
    count += r.x.size();
  }
  return sum / static_cast<double>(count);
}

std::vector<std::uint8_t> encode_dataset(const PatchDataset& dataset) {
  ByteWriter w;
  w.bytes("DSET");
  w.u32(static_cast<std::uint32_t>(dataset.m));
  w.u64(dataset.matrix_seed);
  w.u32(static_cast<std::uint32_t>(dataset.records.size()));
  for (const auto& rec : dataset.records) {
    if (rec.x.size() != kBlockDim || rec.y.size() != dataset.m)
      throw ArgumentError("dataset record has inconsistent lengths");
    for (float v : rec.x) w.f32(v);
    for (float v : rec.y) w.f32(v);
  }
  return w.take();
}

PatchDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "DSET");
  r.expect_magic("DSET");
  PatchDataset ds;
  ds.m = r.u32("m");
  if (ds.m == 0 || ds.m > kBlockDim) r.fail("m", "invalid measurement count");
  ds.matrix_seed = r.u64("matrix_seed");
  const std::uint32_t count = r.u32("record_count");
  if (r.remaining() != static_cast<std::size_t>(count) * (kBlockDim + ds.m) * 4)
    r.fail("records", "payload size does not match record count");
  ds.records.resize(count);
  for (auto& rec : ds.records) {
    rec.x.resize(kBlockDim);
    rec.y.resize(ds.m);
    for (auto& v : rec.x) v = r.f32("x");
    for (auto& v : rec.y) v = r.f32("y");
  }
  r.expect_end();
  return ds;
}

void save_dataset(const PatchDataset& dataset, const std::filesystem::path& path) {
  write_file(path, encode_dataset(dataset));
}

PatchDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::vector<std::filesystem::path> entries;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::filesystem::path entry = line.substr(first, last - first + 1);
    if (entry.is_relative()) entry = path.parent_path() / entry;
    entries.push_back(entry.lexically_normal());
  }
  return entries;
}

std::vector<Plane> load_luminance_planes(std::span<const std::filesystem::path> paths) {
  std::vector<Plane> planes;
  planes.reserve(paths.size());
  for (const auto& p : paths) planes.push_back(luminance(load_image(p)));
  return planes;
}

}  // namespace reconnet
