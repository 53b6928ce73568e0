#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reconnet/baseline.hpp"
#include "reconnet/denoise.hpp"
#include "reconnet/model.hpp"
#include "reconnet/plane.hpp"
#include "reconnet/sensing.hpp"

namespace reconnet {

inline constexpr double kPsnrCap = 100.0;

// PSNR in dB on 8-bit requantized planes (round(clamp(v, 0, 1) * 255)), peak
// 255. Identical quantized planes give kPsnrCap.
double psnr(const Plane& reference, const Plane& candidate);
// Mean of the per-plane PSNRs.
double psnr(std::span<const Plane> reference, std::span<const Plane> candidate);

// Median over blocks of sqrt(|y_i - Phi x_i|^2 / m), scaled to 8-bit units.
double estimate_sigma(const MeasurementSet& measurements, std::span<const std::vector<double>> blocks,
                      const MeasurementMatrix& phi);

enum class MethodKind { ReconNet, Ista, Backproject };

struct Method {
  MethodKind kind = MethodKind::Backproject;
  const ReconNetModel* model = nullptr;  // ReconNet only, not owned
  IstaConfig ista;

  std::string name() const;
};

Method reconnet_method(const ReconNetModel& model);
Method ista_method(const IstaConfig& config = {});
Method backproject_method();

// Per-block recovery, parallel over blocks. Throws ArgumentError when the
// method cannot run with phi (model m or matrix seed differs from phi).
std::vector<std::vector<double>> recover_blocks(const MeasurementMatrix& phi, const MeasurementSet& measurements,
                                                const Method& method);

struct PlaneReconstruction {
  Plane intermediate;
  Plane denoised;
  double sigma_estimate = 0.0;
  double recovery_seconds = 0.0;  // block recovery + assembly, denoiser excluded
};

// split -> sense -> recover -> assemble (clamped) -> denoise(estimate_sigma).
PlaneReconstruction reconstruct_plane(const Plane& image, const MeasurementMatrix& phi, const Method& method,
                                      double noise_sigma, std::uint64_t noise_seed, const Denoiser& denoiser);

struct ImageReconstruction {
  std::vector<Plane> intermediate;
  std::vector<Plane> denoised;
  std::vector<double> sigma_estimates;
  double recovery_seconds = 0.0;
};

// Each plane (R, G, B or a single gray plane) runs through the same
// pipeline; plane c uses noise seed noise_seed + c.
ImageReconstruction reconstruct_image(std::span<const Plane> planes, const MeasurementMatrix& phi,
                                      const Method& method, double noise_sigma, std::uint64_t noise_seed,
                                      const Denoiser& denoiser);

struct BenchImage {
  std::string id;
  std::vector<Plane> planes;
};

struct RateSetup {
  MeasurementMatrix phi;
  std::optional<ReconNetModel> model;
};

struct BenchmarkConfig {
  std::vector<double> mrs{0.25, 0.10, 0.04, 0.01};
  std::vector<std::string> methods{"reconnet", "ista", "backproject"};
  std::vector<double> noise_sigmas{0.0, 10.0, 20.0, 30.0};
  std::size_t repeats = 1;
  std::uint64_t noise_seed = 0;
  IstaConfig ista;
  Denoiser denoiser = identity_denoiser();
};

struct ReportRow {
  std::string image;
  double mr = 0.0;
  std::string method;
  double noise_sigma = 0.0;
  double psnr_intermediate_db = 0.0;
  double psnr_denoised_db = 0.0;
  double time_s = 0.0;
  int threads = 1;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
};

// Full factorial sweep over images x mrs x methods x sigmas (in that nesting
// order). time_s is the median over repeats of the intermediate
// reconstruction. Throws ConfigError listing every rate whose matrix or
// model is missing.
ExperimentReport run_benchmark(std::span<const BenchImage> images, const std::map<double, RateSetup>& setups,
                               const BenchmarkConfig& config);

inline constexpr const char* kReportHeader =
    "image,mr,method,noise_sigma,psnr_intermediate_db,psnr_denoised_db,time_s,threads";

void write_report_csv(std::ostream& out, const ExperimentReport& report);
void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report);
ExperimentReport read_report_csv(const std::filesystem::path& path);

struct SummaryRow {
  std::string method;
  double mr = 0.0;
  double noise_sigma = 0.0;
  double mean_psnr_intermediate_db = 0.0;
  double mean_psnr_denoised_db = 0.0;
  double mean_time_s = 0.0;
  std::size_t count = 0;
};

// Means per (method, mr, sigma), ordered by method, then mr descending, then sigma.
std::vector<SummaryRow> summarize(const ExperimentReport& report);
std::string format_summary(std::span<const SummaryRow> rows);

}  // namespace reconnet
