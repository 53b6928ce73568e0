#include "reconnet/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "numerics/eigen_maps.hpp"
#include "reconnet/error.hpp"

namespace reconnet {

using detail::ConstMatrixMap;
using detail::MatrixMap;

DctBasis::DctBasis(std::size_t side) : side_(side), basis_(side * side) {
  if (side == 0) throw ArgumentError("DCT side must be positive");
  const double n = static_cast<double>(side);
  for (std::size_t k = 0; k < side; ++k) {
    const double alpha = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < side; ++i)
      basis_[k * side + i] = alpha * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                                              static_cast<double>(k) / (2.0 * n));
  }
}

std::vector<double> DctBasis::forward(std::span<const double> block) const {
  if (block.size() != side_ * side_) throw ArgumentError("DCT input has wrong length");
  const auto s = static_cast<Eigen::Index>(side_);
  ConstMatrixMap<double> c(basis_.data(), s, s);
  ConstMatrixMap<double> x(block.data(), s, s);
  std::vector<double> out(block.size());
  MatrixMap<double>(out.data(), s, s).noalias() = c * x * c.transpose();
  return out;
}

std::vector<double> DctBasis::inverse(std::span<const double> coefficients) const {
  if (coefficients.size() != side_ * side_) throw ArgumentError("DCT input has wrong length");
  const auto s = static_cast<Eigen::Index>(side_);
  ConstMatrixMap<double> c(basis_.data(), s, s);
  ConstMatrixMap<double> x(coefficients.data(), s, s);
  std::vector<double> out(coefficients.size());
  MatrixMap<double>(out.data(), s, s).noalias() = c.transpose() * x * c;
  return out;
}

void IstaConfig::validate() const {
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be non-negative");
  if (!(step > 0.0 && step <= 1.0)) throw ArgumentError("step must lie in (0, 1]");
  if (!(tolerance > 0.0)) throw ArgumentError("tolerance must be positive");
  if (max_iters == 0) throw ArgumentError("max_iters must be positive");
  if (continuation && !(continuation_factor > 0.0 && continuation_factor < 1.0))
    throw ArgumentError("continuation factor must lie in (0, 1)");
  if (continuation && continuation_interval == 0) throw ArgumentError("continuation interval must be positive");
}

std::vector<double> backproject(const MeasurementMatrix& phi, std::span<const double> y) {
  return apply_transpose(phi, y);
}

std::vector<double> soft_threshold(std::span<const double> v, double t) {
  if (t < 0.0) throw ArgumentError("threshold must be non-negative");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]) - t;
    out[i] = mag > 0.0 ? std::copysign(mag, v[i]) : 0.0;
  }
  return out;
}

double ista_objective(const MeasurementMatrix& phi, const DctBasis& basis, std::span<const double> y,
                      std::span<const double> x, double lambda) {
  const auto px = reconnet::apply(phi, x);
  double fit = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) fit += (y[i] - px[i]) * (y[i] - px[i]);
  double l1 = 0.0;
  for (double c : basis.forward(x)) l1 += std::abs(c);
  return 0.5 * fit + lambda * l1;
}

IstaResult ista_recover(const MeasurementMatrix& phi, std::span<const double> y, const IstaConfig& config) {
  static const DctBasis basis(kBlockSide);
  return ista_recover(phi, basis, y, config);
}

IstaResult ista_recover(const MeasurementMatrix& phi, const DctBasis& basis, std::span<const double> y,
                        const IstaConfig& config) {
  config.validate();
  if (y.size() != phi.m) throw ArgumentError("measurement length " + std::to_string(y.size()) + " != m " +
                                             std::to_string(phi.m));
  if (phi.n != basis.side() * basis.side()) throw ArgumentError("basis size does not match the matrix");
  const std::size_t n = phi.n;

  std::vector<double> x = backproject(phi, y);
  std::vector<double> z = x;
  double t = 1.0;

  double lambda = config.lambda;
  if (config.continuation) {
    double peak = 0.0;
    for (double c : basis.forward(x)) peak = std::max(peak, std::abs(c));
    lambda = std::max(config.continuation_start * peak, config.lambda);
  }

  IstaResult result;
  std::vector<double> u(n);
  std::size_t iter = 0;
  while (iter < config.max_iters) {
    ++iter;
    const std::vector<double>& point = config.accelerated ? z : x;
    auto residual = reconnet::apply(phi, point);
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] = y[i] - residual[i];
    const auto correction = apply_transpose(phi, residual);
    for (std::size_t i = 0; i < n; ++i) u[i] = point[i] + config.step * correction[i];
    auto next = basis.inverse(soft_threshold(basis.forward(u), config.step * lambda));

    double change = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(next[i])) throw SolverError("ISTA iterate became non-finite at iteration " + std::to_string(iter));
      change += (next[i] - x[i]) * (next[i] - x[i]);
      norm += x[i] * x[i];
    }
    const double relative = norm > 0.0 ? std::sqrt(change / norm) : std::sqrt(change);

    if (config.accelerated) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double beta = (t - 1.0) / t_next;
      for (std::size_t i = 0; i < n; ++i) z[i] = next[i] + beta * (next[i] - x[i]);
      t = t_next;
    }
    x = std::move(next);

    const bool at_floor = lambda <= config.lambda;
    if (at_floor && relative < config.tolerance) break;
    if (config.continuation && !at_floor && iter % config.continuation_interval == 0)
      lambda = std::max(lambda * config.continuation_factor, config.lambda);
  }
  result.x = std::move(x);
  result.iterations = iter;
  result.final_lambda = lambda;
  return result;
}

}  // namespace reconnet
