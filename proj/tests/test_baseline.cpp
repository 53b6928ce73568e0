#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "reconnet/baseline.hpp"
#include "reconnet/error.hpp"

using namespace reconnet;

namespace {

// x = Psi^T s with s supported on `sparsity` random DCT coefficients.
std::vector<double> planted_signal(std::size_t sparsity, Rng& rng) {
  std::vector<std::size_t> idx(kBlockDim);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  shuffle(std::span<std::size_t>(idx), rng);
  std::vector<double> coef(kBlockDim, 0.0);
  for (std::size_t k = 0; k < sparsity; ++k) coef[idx[k]] = rng.normal();
  return oracle::idct2(coef, kBlockSide);
}

double recovery_error(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  auto phi = generate_matrix(m, kBlockDim, seed);
  auto x = planted_signal(10, rng);
  auto y = oracle::phi_times(phi, x);
  auto r = ista_recover(phi, y);
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = r.x[i] - x[i];
  return oracle::norm(d) / oracle::norm(x);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
}

}  // namespace

TEST_CASE("dct basis") {
  DctBasis basis;
  Rng rng(1);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> x(kBlockDim);
    oracle::fill_normal<double>(x, rng);
    auto c = basis.forward(x);
    CHECK(oracle::relative_error(c, oracle::dct2(x, kBlockSide)) < 1e-12);
    auto back = basis.inverse(c);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
    CHECK(worst < 1e-8);
    CHECK(std::abs(oracle::norm(c) - oracle::norm(x)) < 1e-8);
  }
  CHECK_THROWS_AS(basis.forward(std::vector<double>(10)), ArgumentError);
}

TEST_CASE("backprojection") {
  Rng rng(2);
  std::vector<double> x(kBlockDim);
  oracle::fill_uniform<double>(x, rng);
  auto square = generate_matrix(1089, 1089, 3);
  auto bp = backproject(square, oracle::phi_times(square, x));
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(bp[i] - x[i]));
  CHECK(worst < 1e-5);

  auto phi = generate_matrix(109, 1089, 4);
  for (double v : backproject(phi, std::vector<double>(109, 0.0))) CHECK(v == 0.0);
  std::vector<double> y(109);
  oracle::fill_normal<double>(y, rng);
  auto again = oracle::phi_times(phi, backproject(phi, y));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(again[i] - y[i]) < 1e-6);
}

TEST_CASE("soft threshold") {
  std::vector<double> v{3.0, -0.5, 0.25, -4.0};
  CHECK(soft_threshold(v, 0.0) == v);
  CHECK(soft_threshold(v, 1.0) == std::vector<double>{2.0, 0.0, 0.0, -3.0});
  for (double r : soft_threshold(v, 5.0)) CHECK(r == 0.0);
  CHECK_THROWS_AS(soft_threshold(v, -1.0), ArgumentError);
}

TEST_CASE("ista basics") {
  auto phi = generate_matrix(272, 1089, 5);
  SUBCASE("zero measurements give zero") {
    auto r = ista_recover(phi, std::vector<double>(272, 0.0));
    for (double v : r.x) CHECK(v == 0.0);
  }
  SUBCASE("lambda 0 at full rate recovers exactly") {
    auto square = generate_matrix(1089, 1089, 6);
    Rng rng(7);
    std::vector<double> x(kBlockDim);
    oracle::fill_uniform<double>(x, rng);
    IstaConfig cfg;
    cfg.lambda = 0.0;
    cfg.continuation = false;
    auto r = ista_recover(square, oracle::phi_times(square, x), cfg);
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = r.x[i] - x[i];
    CHECK(oracle::norm(d) / oracle::norm(x) < 1e-6);
  }
  SUBCASE("planted sparse signals") {
    int good = 0;
    for (std::uint64_t s = 0; s < 5; ++s) good += recovery_error(272, 100 + s) < 1e-3;
    CHECK(good >= 4);
  }
  SUBCASE("config and input validation") {
    IstaConfig cfg;
    cfg.step = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = {};
    cfg.tolerance = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    CHECK_THROWS_AS(ista_recover(phi, std::vector<double>(271, 0.0)), ArgumentError);
  }
}

TEST_CASE("plain ista objective is non-increasing") {
  auto phi = generate_matrix(109, 1089, 8);
  DctBasis basis;
  Rng rng(9);
  std::vector<double> x(kBlockDim);
  oracle::fill_uniform<double>(x, rng);
  auto y = oracle::phi_times(phi, x);
  IstaConfig cfg;
  cfg.accelerated = false;
  cfg.continuation = false;
  cfg.lambda = 1e-3;
  cfg.tolerance = 1e-300;
  double previous = ista_objective(phi, basis, y, backproject(phi, y), cfg.lambda);
  for (std::size_t k = 1; k <= 40; ++k) {
    cfg.max_iters = k;
    const double obj = ista_objective(phi, basis, y, ista_recover(phi, basis, y, cfg).x, cfg.lambda);
    CHECK(obj <= previous + 1e-10);
    previous = obj;
  }
}

TEST_CASE("ista and fista reach the same objective") {
  DctBasis basis;
  for (std::uint64_t seed : {10, 11, 12}) {
    auto phi = generate_matrix(272, 1089, seed);
    Rng rng(seed);
    std::vector<double> x(kBlockDim);
    oracle::fill_uniform<double>(x, rng);
    auto y = oracle::phi_times(phi, x);
    IstaConfig cfg;
    cfg.continuation = false;
    cfg.lambda = 1e-2;
    cfg.tolerance = 1e-14;
    cfg.max_iters = 20000;
    cfg.accelerated = true;
    const double fista = ista_objective(phi, basis, y, ista_recover(phi, basis, y, cfg).x, cfg.lambda);
    cfg.accelerated = false;
    const double ista = ista_objective(phi, basis, y, ista_recover(phi, basis, y, cfg).x, cfg.lambda);
    CHECK(std::abs(fista - ista) < 1e-6);
  }
}

TEST_CASE("recovery error grows as measurements drop") {
  std::vector<double> e272, e109, e43;
  for (std::uint64_t s = 0; s < 20; ++s) {
    e272.push_back(recovery_error(272, 200 + s));
    e109.push_back(recovery_error(109, 200 + s));
    e43.push_back(recovery_error(43, 200 + s));
  }
  CHECK(median(e272) < median(e109));
  CHECK(median(e109) < median(e43));
}

TEST_CASE("continuation floor and iteration count") {
  auto phi = generate_matrix(272, 1089, 13);
  Rng rng(14);
  auto x = planted_signal(10, rng);
  auto r = ista_recover(phi, oracle::phi_times(phi, x));
  CHECK(r.final_lambda == doctest::Approx(1e-4));
  CHECK(r.iterations <= 2000);
  CHECK(r.iterations > 50);
}
