#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reconnet/sensing.hpp"

namespace reconnet {

// Orthonormal 2D DCT-II over a side x side block (row-major vectorization).
class DctBasis {
 public:
  explicit DctBasis(std::size_t side = kBlockSide);

  std::size_t side() const { return side_; }
  std::vector<double> forward(std::span<const double> block) const;
  std::vector<double> inverse(std::span<const double> coefficients) const;

 private:
  std::size_t side_;
  std::vector<double> basis_;  // basis_[k * side + i] = alpha_k cos(pi (2i + 1) k / (2 side))
};

struct IstaConfig {
  double lambda = 1e-4;  // final sparsity weight (continuation floor)
  std::size_t max_iters = 2000;
  double tolerance = 1e-6;  // stop on relative change once lambda reached its floor
  bool accelerated = true;  // FISTA momentum
  double step = 1.0;        // valid up to 1 for orthonormal-row Phi
  bool continuation = true;
  double continuation_start = 0.1;  // lambda_0 = start * max|Psi Phi^T y|
  double continuation_factor = 0.5;
  std::size_t continuation_interval = 50;

  void validate() const;
};

struct IstaResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  double final_lambda = 0.0;
};

// Least-norm estimate Phi^T y.
std::vector<double> backproject(const MeasurementMatrix& phi, std::span<const double> y);

// sign(v) max(|v| - t, 0) elementwise.
std::vector<double> soft_threshold(std::span<const double> v, double t);

// Proximal gradient on 1/2 |y - Phi x|^2 + lambda |Psi x|_1 with Psi the 2D
// DCT, started from the backprojection. Throws SolverError on a non-finite
// iterate.
IstaResult ista_recover(const MeasurementMatrix& phi, std::span<const double> y, const IstaConfig& config = {});
IstaResult ista_recover(const MeasurementMatrix& phi, const DctBasis& basis, std::span<const double> y,
                        const IstaConfig& config);

double ista_objective(const MeasurementMatrix& phi, const DctBasis& basis, std::span<const double> y,
                      std::span<const double> x, double lambda);

}  // namespace reconnet
