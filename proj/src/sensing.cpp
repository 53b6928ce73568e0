#include "reconnet/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "numerics/eigen_maps.hpp"
#include "reconnet/binary_io.hpp"
#include "reconnet/error.hpp"
#include "reconnet/rng.hpp"

namespace reconnet {

using detail::ConstMatrixMap;
using detail::ConstVectorMap;
using detail::VectorMap;

namespace {

constexpr std::uint32_t kPhimVersion = 1;

struct StandardCount {
  double rate;
  std::size_t m;
};
constexpr StandardCount kStandardCounts[] = {{0.25, 272}, {0.10, 109}, {0.04, 43}, {0.01, 10}};

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

std::size_t measurements_for_rate(std::size_t n, double mr) {
  if (!(mr > 0.0 && mr <= 1.0)) throw ArgumentError("measurement rate must lie in (0, 1], got " + std::to_string(mr));
  if (n == kBlockDim)
    for (const auto& p : kStandardCounts)
      if (std::abs(mr - p.rate) < 1e-9) return p.m;
  const auto m = static_cast<std::size_t>(std::floor(mr * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(m, 1, n);
}

MeasurementMatrix generate_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw ArgumentError("matrix dimensions must be positive");
  if (m > n) throw ArgumentError("measurement count " + std::to_string(m) + " exceeds block dimension " +
                                 std::to_string(n));
  MeasurementMatrix phi{m, n, std::vector<double>(m * n), seed, false};
  Rng rng(seed);
  for (auto& e : phi.entries) e = rng.normal();

  for (std::size_t i = 0; i < m; ++i) {
    double* v = phi.entries.data() + i * n;
    std::span<double> vi(v, n);
    for (std::size_t j = 0; j < i; ++j) {
      std::span<const double> qj = phi.row(j);
      const double proj = dot(qj, vi);
      for (std::size_t k = 0; k < n; ++k) v[k] -= proj * qj[k];
    }
    const double norm = std::sqrt(dot(vi, vi));
    if (!(norm > 1e-12)) throw ArgumentError("Gram-Schmidt breakdown at row " + std::to_string(i));
    for (std::size_t k = 0; k < n; ++k) v[k] /= norm;
  }
  return phi;
}

MeasurementMatrix quantize_matrix_8bit(const MeasurementMatrix& phi) {
  if (phi.quantized) throw ArgumentError("matrix is already quantized");
  double peak = 0.0;
  for (double e : phi.entries) peak = std::max(peak, std::abs(e));
  if (peak == 0.0) throw ArgumentError("cannot quantize an all-zero matrix");
  const double step = peak / 127.0;
  MeasurementMatrix q = phi;
  for (double& e : q.entries) e = std::round(e / step) * step;
  q.quantized = true;
  return q;
}

double orthonormality_residual(const MeasurementMatrix& phi) {
  double worst = 0.0;
  for (std::size_t i = 0; i < phi.m; ++i)
    for (std::size_t j = i; j < phi.m; ++j) {
      const double g = dot(phi.row(i), phi.row(j));
      worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

std::vector<double> apply(const MeasurementMatrix& phi, std::span<const double> x) {
  if (x.size() != phi.n) throw ArgumentError("signal length " + std::to_string(x.size()) + " != n " +
                                             std::to_string(phi.n));
  std::vector<double> y(phi.m);
  ConstMatrixMap<double> a(phi.entries.data(), phi.m, phi.n);
  VectorMap<double>(y.data(), static_cast<Eigen::Index>(phi.m)).noalias() =
      a * ConstVectorMap<double>(x.data(), static_cast<Eigen::Index>(phi.n));
  return y;
}

std::vector<double> apply_transpose(const MeasurementMatrix& phi, std::span<const double> y) {
  if (y.size() != phi.m) throw ArgumentError("measurement length " + std::to_string(y.size()) + " != m " +
                                             std::to_string(phi.m));
  std::vector<double> x(phi.n);
  ConstMatrixMap<double> a(phi.entries.data(), phi.m, phi.n);
  VectorMap<double>(x.data(), static_cast<Eigen::Index>(phi.n)).noalias() =
      a.transpose() * ConstVectorMap<double>(y.data(), static_cast<Eigen::Index>(phi.m));
  return x;
}

std::vector<std::uint8_t> encode_matrix(const MeasurementMatrix& phi) {
  if (phi.entries.size() != phi.m * phi.n) throw ArgumentError("matrix entry count does not match m x n");
  ByteWriter w;
  w.bytes("PHIM");
  w.u32(kPhimVersion);
  w.u32(static_cast<std::uint32_t>(phi.m));
  w.u32(static_cast<std::uint32_t>(phi.n));
  w.u64(phi.seed);
  w.u8(phi.quantized ? 1 : 0);
  for (double e : phi.entries) w.f64(e);
  return w.take();
}

MeasurementMatrix decode_matrix(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "PHIM");
  r.expect_magic("PHIM");
  if (r.u32("version") != kPhimVersion) r.fail("version", "unsupported version");
  MeasurementMatrix phi;
  phi.m = r.u32("m");
  phi.n = r.u32("n");
  if (phi.m == 0 || phi.n == 0 || phi.m > phi.n) r.fail("m", "invalid dimensions");
  phi.seed = r.u64("seed");
  const std::uint8_t flag = r.u8("quantized");
  if (flag > 1) r.fail("quantized", "flag must be 0 or 1");
  phi.quantized = flag == 1;
  if (r.remaining() != phi.m * phi.n * 8) r.fail("entries", "payload size does not match m x n");
  phi.entries.resize(phi.m * phi.n);
  for (auto& e : phi.entries) e = r.f64("entries");
  r.expect_end();
  return phi;
}

void save_matrix(const MeasurementMatrix& phi, const std::filesystem::path& path) {
  write_file(path, encode_matrix(phi));
}

MeasurementMatrix load_matrix(const std::filesystem::path& path) { return decode_matrix(read_file(path)); }

BlockGrid split_blocks(const Plane& image) {
  if (image.height < 1 || image.width < 1) throw ArgumentError("image must be at least 1x1");
  if (image.data.size() != image.height * image.width) throw ArgumentError("plane data length mismatch");
  BlockGrid grid;
  grid.height = image.height;
  grid.width = image.width;
  grid.padded_height = (image.height + kBlockSide - 1) / kBlockSide * kBlockSide;
  grid.padded_width = (image.width + kBlockSide - 1) / kBlockSide * kBlockSide;
  for (std::size_t br = 0; br < grid.block_rows(); ++br)
    for (std::size_t bc = 0; bc < grid.block_cols(); ++bc) {
      std::vector<double> block(kBlockDim);
      for (std::size_t r = 0; r < kBlockSide; ++r) {
        const std::size_t sr = std::min(br * kBlockSide + r, image.height - 1);
        for (std::size_t c = 0; c < kBlockSide; ++c) {
          const std::size_t sc = std::min(bc * kBlockSide + c, image.width - 1);
          block[r * kBlockSide + c] = image.at(sr, sc);
        }
      }
      grid.blocks.push_back(std::move(block));
    }
  return grid;
}

Plane assemble_blocks(const BlockGrid& grid) {
  if (grid.padded_height % kBlockSide != 0 || grid.padded_width % kBlockSide != 0 ||
      grid.padded_height < grid.height || grid.padded_width < grid.width)
    throw ArgumentError("block grid geometry is inconsistent");
  if (grid.blocks.size() != grid.block_rows() * grid.block_cols())
    throw ArgumentError("block grid expects " + std::to_string(grid.block_rows() * grid.block_cols()) +
                        " blocks, got " + std::to_string(grid.blocks.size()));
  Plane out(grid.height, grid.width);
  for (std::size_t r = 0; r < grid.height; ++r)
    for (std::size_t c = 0; c < grid.width; ++c) {
      const auto& block = grid.blocks[(r / kBlockSide) * grid.block_cols() + c / kBlockSide];
      if (block.size() != kBlockDim) throw ArgumentError("block has wrong length");
      out.at(r, c) = std::clamp(block[(r % kBlockSide) * kBlockSide + c % kBlockSide], 0.0, 1.0);
    }
  return out;
}

MeasurementSet sense(const MeasurementMatrix& phi, const BlockGrid& grid, double noise_sigma, std::uint64_t seed) {
  if (phi.n != kBlockDim) throw ArgumentError("sensing expects n = 1089, got " + std::to_string(phi.n));
  if (noise_sigma < 0.0) throw ArgumentError("noise sigma must be non-negative");
  MeasurementSet set;
  set.noise_sigma = noise_sigma;
  set.noise_seed = seed;
  set.matrix_seed = phi.seed;
  set.m = phi.m;
  set.quantized = phi.quantized;
  for (const auto& block : grid.blocks)
    if (block.size() != kBlockDim) throw ArgumentError("block has wrong length");
  set.y.resize(grid.blocks.size());
  const double scale = noise_sigma / 255.0;
  const auto count = static_cast<long>(grid.blocks.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < count; ++i) {
    auto y = reconnet::apply(phi, grid.blocks[static_cast<std::size_t>(i)]);
    if (noise_sigma > 0.0) {
      Rng rng(seed ^ static_cast<std::uint64_t>(i));
      for (double& v : y) v += scale * rng.normal();
    }
    set.y[static_cast<std::size_t>(i)] = std::move(y);
  }
  return set;
}

}  // namespace reconnet
