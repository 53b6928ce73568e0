#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "reconnet/baseline.hpp"
#include "reconnet/error.hpp"
#include "reconnet/evaluation.hpp"
#include "reconnet/model.hpp"
#include "reconnet/sensing.hpp"

using namespace reconnet;

namespace {

Plane random_plane(std::size_t h, std::size_t w, Rng& rng) {
  Plane p{h, w, std::vector<double>(h * w)};
  oracle::fill_uniform<double>(p.data, rng);
  return p;
}

}  // namespace

TEST_CASE("measurement counts") {
  CHECK(measurements_for_rate(1089, 0.25) == 272);
  CHECK(measurements_for_rate(1089, 0.10) == 109);
  CHECK(measurements_for_rate(1089, 0.04) == 43);
  CHECK(measurements_for_rate(1089, 0.01) == 10);
  CHECK(measurements_for_rate(1089, 1.0) == 1089);
  CHECK(measurements_for_rate(1089, 0.5) == 544);
  CHECK(measurements_for_rate(100, 0.001) == 1);
  CHECK_THROWS_AS(measurements_for_rate(1089, 0.0), ArgumentError);
  CHECK_THROWS_AS(measurements_for_rate(1089, 1.5), ArgumentError);
  CHECK_THROWS_AS(measurements_for_rate(1089, -0.1), ArgumentError);
}

TEST_CASE("generated matrices") {
  SUBCASE("1x1 is +-1") {
    auto phi = generate_matrix(1, 1, 99);
    CHECK(std::abs(phi.entries[0]) == doctest::Approx(1.0));
  }
  SUBCASE("orthonormal rows and deterministic") {
    auto a = generate_matrix(109, 1089, 7);
    CHECK(orthonormality_residual(a) < 1e-6);
    CHECK(a == generate_matrix(109, 1089, 7));
    CHECK_FALSE(a.entries == generate_matrix(109, 1089, 8).entries);
    CHECK(a.seed == 7);
    CHECK_FALSE(a.quantized);
  }
  SUBCASE("operator norm at most one") {
    auto phi = generate_matrix(272, 1089, 42);
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> x(1089);
      oracle::fill_normal<double>(x, rng);
      CHECK(oracle::norm(oracle::phi_times(phi, x)) <= oracle::norm(x) + 1e-6);
    }
  }
  SUBCASE("m > n rejected") { CHECK_THROWS_AS(generate_matrix(5, 4, 0), ArgumentError); }
}

TEST_CASE("8-bit quantization") {
  auto phi = generate_matrix(43, 1089, 3);
  phi.entries[5] = 0.0;
  auto q = quantize_matrix_8bit(phi);
  CHECK(q.quantized);
  CHECK(q.entries[5] == 0.0);
  double max_abs = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < phi.entries.size(); ++i)
    if (std::abs(phi.entries[i]) > max_abs) max_abs = std::abs(phi.entries[i]), arg = i;
  const double s = max_abs / 127.0;
  CHECK(std::abs(q.entries[arg]) == doctest::Approx(max_abs).epsilon(1e-12));
  std::set<double> levels;
  for (std::size_t i = 0; i < phi.entries.size(); ++i) {
    CHECK(std::abs(q.entries[i] - phi.entries[i]) <= s / 2 + 1e-15);
    levels.insert(q.entries[i]);
  }
  CHECK(levels.size() <= 255);
  CHECK_THROWS_AS(quantize_matrix_8bit(q), ArgumentError);
  MeasurementMatrix zero{2, 3, std::vector<double>(6, 0.0), 0, false};
  CHECK_THROWS_AS(quantize_matrix_8bit(zero), ArgumentError);
}

TEST_CASE("split blocks geometry") {
  Rng rng(2);
  SUBCASE("33x33 is one block") {
    auto img = random_plane(33, 33, rng);
    auto grid = split_blocks(img);
    CHECK(grid.blocks.size() == 1);
    CHECK(grid.blocks[0] == img.data);
  }
  SUBCASE("256x256 pads to 264") {
    auto grid = split_blocks(random_plane(256, 256, rng));
    CHECK(grid.padded_height == 264);
    CHECK(grid.padded_width == 264);
    CHECK(grid.blocks.size() == 64);
  }
  SUBCASE("34x33 replicates the last row") {
    auto img = random_plane(34, 33, rng);
    auto grid = split_blocks(img);
    CHECK(grid.padded_height == 66);
    CHECK(grid.padded_width == 33);
    REQUIRE(grid.blocks.size() == 2);
    const auto& second = grid.blocks[1];
    for (std::size_t r = 0; r < 33; ++r)
      for (std::size_t c = 0; c < 33; ++c) CHECK(second[r * 33 + c] == img.at(33, c));
  }
}

TEST_CASE("assemble blocks") {
  Rng rng(3);
  SUBCASE("round trip over random sizes") {
    for (int t = 0; t < 30; ++t) {
      auto img = random_plane(1 + rng.uniform_index(80), 1 + rng.uniform_index(80), rng);
      CHECK(assemble_blocks(split_blocks(img)) == img);
    }
  }
  SUBCASE("piecewise constant blocks") {
    auto grid = split_blocks(random_plane(33, 66, rng));
    grid.blocks[0].assign(kBlockDim, 0.25);
    grid.blocks[1].assign(kBlockDim, 0.75);
    auto img = assemble_blocks(grid);
    CHECK(img.at(10, 10) == 0.25);
    CHECK(img.at(10, 40) == 0.75);
  }
  SUBCASE("clamps and checks count") {
    auto grid = split_blocks(random_plane(33, 33, rng));
    grid.blocks[0].assign(kBlockDim, 1.7);
    grid.blocks[0][0] = -0.3;
    auto img = assemble_blocks(grid);
    CHECK(img.data[0] == 0.0);
    CHECK(img.data[1] == 1.0);
    grid.blocks.push_back(grid.blocks[0]);
    CHECK_THROWS_AS(assemble_blocks(grid), ArgumentError);
  }
}

TEST_CASE("sensing") {
  Rng rng(4);
  SUBCASE("zero block gives zero measurements") {
    auto phi = generate_matrix(43, 1089, 1);
    Plane zero{33, 33, std::vector<double>(kBlockDim, 0.0)};
    auto set = sense(phi, split_blocks(zero), 0.0, 0);
    for (double v : set.y[0]) CHECK(v == 0.0);
  }
  SUBCASE("square matrix backprojection reproduces the block") {
    auto phi = generate_matrix(1089, 1089, 2);
    auto img = random_plane(40, 50, rng);
    auto grid = split_blocks(img);
    auto set = sense(phi, grid, 0.0, 0);
    for (std::size_t i = 0; i < grid.blocks.size(); ++i) {
      auto x = backproject(phi, set.y[i]);
      double worst = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - grid.blocks[i][k]));
      CHECK(worst < 1e-5);
    }
    auto rec = reconstruct_plane(img, phi, backproject_method(), 0.0, 0, identity_denoiser());
    CHECK(psnr(img, rec.intermediate) >= kPsnrCap);
  }
  SUBCASE("matches matvec oracle and is deterministic") {
    auto phi = generate_matrix(109, 1089, 3);
    auto grid = split_blocks(random_plane(66, 66, rng));
    auto set = sense(phi, grid, 0.0, 0);
    CHECK(set.m == 109);
    CHECK(set.matrix_seed == 3);
    for (std::size_t i = 0; i < grid.blocks.size(); ++i)
      CHECK(oracle::relative_error(set.y[i], oracle::phi_times(phi, grid.blocks[i])) < 1e-6);
    auto noisy = sense(phi, grid, 20.0, 77);
    CHECK(noisy.y == sense(phi, grid, 20.0, 77).y);
    CHECK_FALSE(noisy.y == sense(phi, grid, 20.0, 78).y);
  }
  SUBCASE("noise statistics and per-block seeds") {
    auto phi = generate_matrix(272, 1089, 5);
    Plane img{33 * 4, 33 * 4, std::vector<double>(33 * 33 * 16, 0.5)};
    auto grid = split_blocks(img);
    auto clean = sense(phi, grid, 0.0, 0);
    auto noisy = sense(phi, grid, 25.5, 9);
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < grid.blocks.size(); ++i)
      for (std::size_t k = 0; k < phi.m; ++k) {
        const double e = noisy.y[i][k] - clean.y[i][k];
        sum += e;
        sq += e * e;
        ++count;
      }
    const double sd = std::sqrt(sq / count);
    CHECK(sd == doctest::Approx(0.1).epsilon(0.05));
    CHECK(std::abs(sum / count) < 4 * 0.1 / std::sqrt(static_cast<double>(count)));
    // Block i uses seed ^ i, so block 1 with seed 9 equals block 0 with seed 8.
    grid.blocks.resize(2);
    grid.padded_width = 66;
    grid.padded_height = 33;
    auto a = sense(phi, grid, 25.5, 9);
    auto b = sense(phi, grid, 25.5, 8);
    std::vector<double> ea(phi.m), eb(phi.m);
    for (std::size_t k = 0; k < phi.m; ++k) {
      ea[k] = a.y[1][k] - clean.y[1][k];
      eb[k] = b.y[0][k] - clean.y[0][k];
    }
    CHECK(oracle::relative_error(ea, eb) < 1e-9);
  }
}

TEST_CASE("row-major vectorization is shared by sensing, fc init and baseline") {
  auto phi = generate_matrix(1089, 1089, 11);
  Rng rng(6);
  Plane img{33, 33, std::vector<double>(kBlockDim)};
  oracle::fill_uniform<double>(img.data, rng);
  // A block with one bright pixel at (r, c) measures as column r * 33 + c of phi.
  Plane spike{33, 33, std::vector<double>(kBlockDim, 0.0)};
  spike.at(4, 9) = 1.0;
  auto set = sense(phi, split_blocks(spike), 0.0, 0);
  for (std::size_t i = 0; i < phi.m; ++i) CHECK(set.y[0][i] == doctest::Approx(phi.entries[i * 1089 + 4 * 33 + 9]));
  auto model = build_model(1089, InitMode::Deterministic, &phi, 0);
  std::vector<float> y(set.y[0].begin(), set.y[0].end());
  auto fc = fc_forward<float>(y, model.net.fc);
  CHECK(fc.at(4, 9, 0) == doctest::Approx(1.0).epsilon(1e-4));
  auto bp = backproject(phi, set.y[0]);
  CHECK(bp[4 * 33 + 9] == doctest::Approx(1.0));
}

TEST_CASE("PHIM round trip and errors") {
  auto phi = generate_matrix(10, 1089, 123);
  auto bytes = encode_matrix(phi);
  CHECK(bytes.size() == 4 + 4 + 4 + 4 + 8 + 1 + 10 * 1089 * 8);
  CHECK(decode_matrix(bytes) == phi);
  CHECK(encode_matrix(decode_matrix(bytes)) == bytes);
  auto q = quantize_matrix_8bit(phi);
  CHECK(decode_matrix(encode_matrix(q)) == q);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_matrix(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(decode_matrix(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_matrix(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_matrix(bad), FormatError);
  oracle::TempDir dir("phim");
  save_matrix(phi, dir / "a.phim");
  CHECK(load_matrix(dir / "a.phim") == phi);
  CHECK(oracle::read_bytes(dir / "a.phim") == bytes);
  CHECK_THROWS_AS(load_matrix(dir / "missing.phim"), IoError);
}
