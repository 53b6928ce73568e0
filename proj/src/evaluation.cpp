#include "reconnet/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <tuple>

#include "reconnet/error.hpp"
#include "reconnet/parallel.hpp"

namespace reconnet {

namespace {

long quantize(double v) { return std::lround(std::clamp(v, 0.0, 1.0) * 255.0); }

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

void check_method(const MeasurementMatrix& phi, const Method& method) {
  if (method.kind != MethodKind::ReconNet) return;
  if (!method.model) throw ArgumentError("reconnet method has no model");
  if (method.model->m() != phi.m)
    throw ArgumentError("model expects m = " + std::to_string(method.model->m()) + " but the matrix has m = " +
                        std::to_string(phi.m));
  if (method.model->matrix_seed != phi.seed)
    throw ArgumentError("model was trained for matrix seed " + std::to_string(method.model->matrix_seed) +
                        ", matrix has seed " + std::to_string(phi.seed));
}

}  // namespace

double psnr(const Plane& reference, const Plane& candidate) {
  if (reference.height != candidate.height || reference.width != candidate.width ||
      reference.data.size() != candidate.data.size())
    throw ArgumentError("psnr: image dimensions differ");
  if (reference.data.empty()) throw ArgumentError("psnr: empty image");
  double sq = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    const auto d = static_cast<double>(quantize(reference.data[i]) - quantize(candidate.data[i]));
    sq += d * d;
  }
  if (sq == 0.0) return kPsnrCap;
  const double mse = sq / static_cast<double>(reference.data.size());
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double psnr(std::span<const Plane> reference, std::span<const Plane> candidate) {
  if (reference.size() != candidate.size() || reference.empty()) throw ArgumentError("psnr: plane counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) total += psnr(reference[i], candidate[i]);
  return total / static_cast<double>(reference.size());
}

double estimate_sigma(const MeasurementSet& measurements, std::span<const std::vector<double>> blocks,
                      const MeasurementMatrix& phi) {
  if (blocks.size() != measurements.y.size())
    throw ArgumentError("sigma estimate: " + std::to_string(blocks.size()) + " blocks for " +
                        std::to_string(measurements.y.size()) + " measurement vectors");
  std::vector<double> per_block;
  per_block.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto predicted = reconnet::apply(phi, blocks[i]);
    const auto& y = measurements.y[i];
    double sq = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) sq += (y[k] - predicted[k]) * (y[k] - predicted[k]);
    per_block.push_back(std::sqrt(sq / static_cast<double>(phi.m)));
  }
  return 255.0 * median(std::move(per_block));
}

std::string Method::name() const {
  switch (kind) {
    case MethodKind::ReconNet:
      return "reconnet";
    case MethodKind::Ista:
      return ista.accelerated ? "ista" : "ista-plain";
    case MethodKind::Backproject:
      return "backproject";
  }
  return "unknown";
}

Method reconnet_method(const ReconNetModel& model) { return {MethodKind::ReconNet, &model, {}}; }
Method ista_method(const IstaConfig& config) { return {MethodKind::Ista, nullptr, config}; }
Method backproject_method() { return {MethodKind::Backproject, nullptr, {}}; }

std::vector<std::vector<double>> recover_blocks(const MeasurementMatrix& phi, const MeasurementSet& measurements,
                                                const Method& method) {
  check_method(phi, method);
  if (method.kind == MethodKind::Ista) method.ista.validate();
  for (const auto& y : measurements.y)
    if (y.size() != phi.m) throw ArgumentError("measurement vector length does not match the matrix");
  static const DctBasis basis(kBlockSide);

  std::vector<std::vector<double>> blocks(measurements.y.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<long>(blocks.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    const auto& y = measurements.y[static_cast<std::size_t>(i)];
    try {
      switch (method.kind) {
        case MethodKind::ReconNet:
          blocks[static_cast<std::size_t>(i)] = infer_block(*method.model, y);
          break;
        case MethodKind::Ista:
          blocks[static_cast<std::size_t>(i)] = ista_recover(phi, basis, y, method.ista).x;
          break;
        case MethodKind::Backproject:
          blocks[static_cast<std::size_t>(i)] = backproject(phi, y);
          break;
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return blocks;
}

PlaneReconstruction reconstruct_plane(const Plane& image, const MeasurementMatrix& phi, const Method& method,
                                      double noise_sigma, std::uint64_t noise_seed, const Denoiser& denoiser) {
  check_method(phi, method);
  BlockGrid grid = split_blocks(image);
  const MeasurementSet measurements = sense(phi, grid, noise_sigma, noise_seed);

  const auto start = std::chrono::steady_clock::now();
  grid.blocks = recover_blocks(phi, measurements, method);
  PlaneReconstruction out;
  out.intermediate = assemble_blocks(grid);
  out.recovery_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  out.sigma_estimate = estimate_sigma(measurements, grid.blocks, phi);
  out.denoised = denoiser(out.intermediate, out.sigma_estimate);
  if (out.denoised.height != image.height || out.denoised.width != image.width)
    throw ConfigError("denoiser '" + denoiser.name + "' changed the image size");
  return out;
}

ImageReconstruction reconstruct_image(std::span<const Plane> planes, const MeasurementMatrix& phi,
                                      const Method& method, double noise_sigma, std::uint64_t noise_seed,
                                      const Denoiser& denoiser) {
  if (planes.empty()) throw ArgumentError("reconstruct_image needs at least one plane");
  ImageReconstruction out;
  for (std::size_t c = 0; c < planes.size(); ++c) {
    auto rec = reconstruct_plane(planes[c], phi, method, noise_sigma, noise_seed + c, denoiser);
    out.intermediate.push_back(std::move(rec.intermediate));
    out.denoised.push_back(std::move(rec.denoised));
    out.sigma_estimates.push_back(rec.sigma_estimate);
    out.recovery_seconds += rec.recovery_seconds;
  }
  return out;
}

ExperimentReport run_benchmark(std::span<const BenchImage> images, const std::map<double, RateSetup>& setups,
                               const BenchmarkConfig& config) {
  if (config.repeats < 1) throw ArgumentError("repeats must be at least 1");
  const bool wants_reconnet = std::find(config.methods.begin(), config.methods.end(), "reconnet") != config.methods.end();
  for (const auto& m : config.methods)
    if (m != "reconnet" && m != "ista" && m != "backproject") throw ArgumentError("unknown method '" + m + "'");

  std::vector<std::string> missing;
  for (double mr : config.mrs) {
    auto it = setups.find(mr);
    std::ostringstream label;
    label << mr;
    if (it == setups.end())
      missing.push_back("mr " + label.str() + ": measurement matrix");
    else if (wants_reconnet && !it->second.model)
      missing.push_back("mr " + label.str() + ": reconnet model");
  }
  if (!missing.empty()) {
    std::string msg = "benchmark is missing artifacts:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ConfigError(msg);
  }

  ExperimentReport report;
  const int threads = max_threads();
  for (const auto& image : images)
    for (double mr : config.mrs) {
      const RateSetup& setup = setups.at(mr);
      for (const auto& method_name : config.methods) {
        Method method = method_name == "reconnet" ? reconnet_method(*setup.model)
                        : method_name == "ista"   ? ista_method(config.ista)
                                                  : backproject_method();
        for (double sigma : config.noise_sigmas) {
          std::vector<double> times;
          ImageReconstruction first;
          for (std::size_t r = 0; r < config.repeats; ++r) {
            auto rec = reconstruct_image(image.planes, setup.phi, method, sigma, config.noise_seed, config.denoiser);
            times.push_back(rec.recovery_seconds);
            if (r == 0) first = std::move(rec);
          }
          report.rows.push_back({image.id, mr, method_name, sigma, psnr(image.planes, first.intermediate),
                                 psnr(image.planes, first.denoised), median(times), threads});
        }
      }
    }
  return report;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << kReportHeader << '\n';
  out << std::setprecision(10);
  for (const auto& r : report.rows)
    out << r.image << ',' << r.mr << ',' << r.method << ',' << r.noise_sigma << ',' << r.psnr_intermediate_db << ','
        << r.psnr_denoised_db << ',' << r.time_s << ',' << r.threads << '\n';
}

void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_report_csv(out, report);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ExperimentReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) throw FormatError(path.string() + ": unexpected report header");
  ExperimentReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[8];
    for (auto& field : f) std::getline(ss, field, ',');
    report.rows.push_back({f[0], std::stod(f[1]), f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                           std::stod(f[6]), std::stoi(f[7])});
  }
  return report;
}

std::vector<SummaryRow> summarize(const ExperimentReport& report) {
  std::map<std::tuple<std::string, double, double>, SummaryRow> groups;
  for (const auto& r : report.rows) {
    auto& g = groups[{r.method, -r.mr, r.noise_sigma}];
    g.method = r.method;
    g.mr = r.mr;
    g.noise_sigma = r.noise_sigma;
    g.mean_psnr_intermediate_db += r.psnr_intermediate_db;
    g.mean_psnr_denoised_db += r.psnr_denoised_db;
    g.mean_time_s += r.time_s;
    ++g.count;
  }
  std::vector<SummaryRow> rows;
  for (auto& [key, g] : groups) {
    const auto n = static_cast<double>(g.count);
    g.mean_psnr_intermediate_db /= n;
    g.mean_psnr_denoised_db /= n;
    g.mean_time_s /= n;
    rows.push_back(g);
  }
  return rows;
}

std::string format_summary(std::span<const SummaryRow> rows) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "method" << std::right << std::setw(6) << "mr" << std::setw(7) << "sigma"
      << std::setw(10) << "psnr_int" << std::setw(10) << "psnr_den" << std::setw(11) << "time_s" << std::setw(7)
      << "n" << '\n';
  out << std::fixed;
  for (const auto& r : rows)
    out << std::left << std::setw(12) << r.method << std::right << std::setprecision(2) << std::setw(6) << r.mr
        << std::setprecision(0) << std::setw(7) << r.noise_sigma << std::setprecision(2) << std::setw(10)
        << r.mean_psnr_intermediate_db << std::setw(10) << r.mean_psnr_denoised_db << std::setprecision(4)
        << std::setw(11) << r.mean_time_s << std::setw(7) << r.count << '\n';
  return out.str();
}

}  // namespace reconnet
