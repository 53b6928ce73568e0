#include <fnmatch.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reconnet/baseline.hpp"
#include "reconnet/dataset.hpp"
#include "reconnet/denoise.hpp"
#include "reconnet/error.hpp"
#include "reconnet/evaluation.hpp"
#include "reconnet/image_io.hpp"
#include "reconnet/model.hpp"
#include "reconnet/parallel.hpp"
#include "reconnet/rng.hpp"
#include "reconnet/sensing.hpp"
#include "reconnet/training.hpp"

namespace fs = std::filesystem;
using namespace reconnet;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  bool verbose = false;
};

struct GenphiArgs {
  double mr = 0.25;
  bool quantize8 = false;
  std::string out;
};

struct TrainArgs {
  std::string manifest;
  std::string phi;
  std::size_t epochs = 200;
  double lr = 1e-4;
  bool lr_search = false;
  std::size_t probe_epochs = 20;
  double val_frac = 0.1;
  std::string out;
  std::string log;
  std::size_t batch_size = 128;
  double conv_std = 0.01;
  double fc_std = 0.01;
  bool fan_in_init = false;
  std::string output_bias = "0";
  std::string probe_init = "deterministic";
  std::size_t max_patches = 0;
  std::size_t stride = 14;
  std::size_t checkpoint_every = 0;
};

struct ReconstructArgs {
  std::string input;
  std::string phi;
  std::string model;
  std::string method = "reconnet";
  double noise_sigma = 0.0;
  std::string denoiser = "identity";
  std::string out;
  std::string intermediate_out;
  std::string reference;
};

struct BenchArgs {
  std::string images;
  std::string artifacts;
  std::vector<double> mrs{0.25, 0.10, 0.04, 0.01};
  std::vector<std::string> methods{"reconnet", "ista", "backproject"};
  std::vector<double> sigmas{0.0, 10.0, 20.0, 30.0};
  std::size_t repeats = 1;
  std::string denoiser = "identity";
  std::string out;
  std::string summary;
};

class Printer {
 public:
  explicit Printer(std::string command) { std::cout << "config " << command << '\n'; }
  template <typename V>
  Printer& operator()(const std::string& key, const V& value) {
    std::cout << "  " << key << " = " << value << '\n';
    return *this;
  }
};

template <typename V>
std::string join(const std::vector<V>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

std::string rate_label(double mr) {
  std::ostringstream out;
  out << mr;
  return out.str();
}

fs::path with_suffix(const fs::path& path, const std::string& tag) {
  fs::path out = path;
  out.replace_filename(path.stem().string() + tag + path.extension().string());
  return out;
}

// Shell-style pattern in the final path component, a manifest, or a plain file.
std::vector<fs::path> expand_images(const std::string& spec) {
  if (spec.empty()) return {};
  const fs::path p(spec);
  if (fs::is_regular_file(p)) {
    if (p.extension() == ".manifest" || p.extension() == ".txt") return read_manifest(p);
    return {p};
  }
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  const std::string pattern = p.filename().string();
  std::vector<fs::path> out;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && fnmatch(pattern.c_str(), entry.path().filename().c_str(), 0) == 0)
        out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

void print_record(const EpochRecord& r) {
  std::cerr << std::setw(10) << r.init_mode << " epoch " << std::setw(4) << r.epoch << "  lr " << r.learning_rate
            << "  train " << r.train_loss << "  val " << r.val_loss << '\n';
}

int cmd_genphi(const Globals& g, const GenphiArgs& a) {
  if (a.out.empty()) throw ConfigError("--out is required");
  const std::size_t m = measurements_for_rate(kBlockDim, a.mr);
  Printer("genphi")("mr", a.mr)("m", m)("n", kBlockDim)("seed", g.seed)("quantize8", a.quantize8)("out", a.out)(
      "threads", g.threads);
  MeasurementMatrix phi = generate_matrix(m, kBlockDim, g.seed);
  const double residual = orthonormality_residual(phi);
  if (a.quantize8) phi = quantize_matrix_8bit(phi);
  save_matrix(phi, a.out);
  std::cout << "m " << phi.m << "\nn " << phi.n << "\northonormality_residual " << std::scientific
            << std::setprecision(3) << residual << '\n';
  if (a.quantize8)
    std::cout << "quantized_residual " << orthonormality_residual(phi) << '\n';
  return 0;
}

double parse_double(const std::string& text, const std::string& flag) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(v))
    throw ArgumentError(flag + " expects a number, got '" + text + "'");
  return v;
}

int cmd_train(const Globals& g, const TrainArgs& a) {
  require_file(a.manifest, "manifest");
  require_file(a.phi, "measurement matrix");
  if (a.out.empty()) throw ConfigError("--out is required");
  const std::string log = a.log.empty() ? with_suffix(a.out, ".log").replace_extension(".csv").string() : a.log;

  TrainConfig config;
  config.batch_size = a.batch_size;
  config.learning_rate = a.lr;
  config.epochs = a.epochs;
  config.seed = g.seed;
  config.checkpoint_every = a.checkpoint_every;
  config.checkpoint_prefix = fs::path(a.out).replace_extension();
  config.init.conv_std = a.conv_std;
  config.init.fc_std = a.fc_std;
  config.init.fan_in_scaled = a.fan_in_init;
  config.validate();

  Printer("train")("manifest", a.manifest)("phi", a.phi)("epochs", a.epochs)(
      "lr", a.lr_search ? std::string("search {" + join(std::vector<double>(std::begin(kDefaultLrGrid),
                                                                             std::end(kDefaultLrGrid))) +
                                      "}")
                        : rate_label(a.lr))("probe_epochs", a.probe_epochs)("probe_init", a.probe_init)("val_frac", a.val_frac)(
      "batch_size", a.batch_size)("momentum", config.momentum)("conv_std", a.conv_std)("fc_std", a.fc_std)("fan_in_init", a.fan_in_init)("output_bias", a.output_bias)(
      "max_patches", a.max_patches)("stride", a.stride)("checkpoint_every", a.checkpoint_every)("seed", g.seed)(
      "threads", g.threads)("out", a.out)("log", log);

  const auto paths = read_manifest(a.manifest);
  if (paths.empty()) throw ConfigError("manifest lists no images: " + a.manifest);
  const MeasurementMatrix phi = load_matrix(a.phi);
  const auto planes = load_luminance_planes(paths);
  auto extraction = extract_patches(planes, kBlockSide, a.stride);
  for (auto i : extraction.skipped) std::cerr << "warning: " << paths[i].string() << " is smaller than a block\n";
  const auto patches = sample_patches(std::move(extraction.patches), a.max_patches, g.seed);
  if (patches.empty()) throw ConfigError("no training patches could be extracted");
  const DatasetSplit split = build_dataset(patches, phi, a.val_frac, g.seed);
  std::cout << "patches " << patches.size() << " (train " << split.train.size() << ", validation "
            << split.validation.size() << ")\n";
  if (a.output_bias == "mean") {
    config.init.output_bias = mean_pixel(split.train);
    std::cout << "output_bias " << config.init.output_bias << '\n';
  } else {
    config.init.output_bias = parse_double(a.output_bias, "--output-bias");
  }

  EpochCallback cb;
  if (g.verbose) cb = print_record;
  std::vector<EpochRecord> history;
  if (a.lr_search) {
    const bool det_probe = parse_init_mode(a.probe_init) == InitMode::Deterministic;
    auto search = lr_search(split.train, split.validation, det_probe ? &phi : nullptr, kDefaultLrGrid, a.probe_epochs, config, cb);
    for (std::size_t i = 0; i < search.candidates.size(); ++i)
      std::cout << "probe lr " << search.candidates[i] << " val_loss " << search.val_losses[i] << '\n';
    std::cout << "selected lr " << search.best << '\n';
    config.learning_rate = search.best;
    history = std::move(search.history);
  }
  TrainResult result = train(split.train, split.validation, phi, config, cb);
  history.insert(history.end(), result.history.begin(), result.history.end());
  write_training_log(log, history);
  save_model(result.model, a.out);
  std::cout << "random final_val_loss " << result.random_val_loss << "\ndeterministic final_val_loss "
            << result.deterministic_val_loss << "\nselected init " << to_string(result.selected) << '\n';
  return 0;
}

int cmd_reconstruct(const Globals& g, const ReconstructArgs& a) {
  require_file(a.input, "input image");
  require_file(a.phi, "measurement matrix");
  const bool use_model = a.method == "reconnet";
  if (use_model) require_file(a.model, "model");
  else if (a.method != "ista" && a.method != "backproject")
    throw ConfigError("unknown method '" + a.method + "' (reconnet, ista or backproject)");
  if (!a.reference.empty()) require_file(a.reference, "reference image");
  if (a.out.empty()) throw ConfigError("--out is required");
  const fs::path intermediate_path = a.intermediate_out.empty() ? with_suffix(a.out, ".intermediate") : fs::path(a.intermediate_out);
  const Denoiser denoiser = make_denoiser(a.denoiser);

  Printer("reconstruct")("input", a.input)("phi", a.phi)("method", a.method)("model", use_model ? a.model : "-")(
      "noise_sigma", a.noise_sigma)("denoiser", denoiser.name)("seed", g.seed)("threads", g.threads)("out", a.out)(
      "intermediate_out", intermediate_path.string())("reference", a.reference.empty() ? "-" : a.reference);

  const MeasurementMatrix phi = load_matrix(a.phi);
  std::optional<ReconNetModel> model;
  Method method = backproject_method();
  if (use_model) {
    model = load_model(a.model);
    method = reconnet_method(*model);
  } else if (a.method == "ista") {
    method = ista_method();
  }
  const ImageFile input = load_image(a.input);
  const auto planes = planes_from_image(input);
  const auto rec = reconstruct_image(planes, phi, method, a.noise_sigma, g.seed, denoiser);
  save_image(image_from_planes(rec.intermediate), intermediate_path);
  save_image(image_from_planes(rec.denoised), a.out);

  std::cout << "recovery_seconds " << rec.recovery_seconds << "\nsigma_estimate " << join(rec.sigma_estimates)
            << '\n';
  if (!a.reference.empty()) {
    const auto ref = planes_from_image(load_image(a.reference));
    if (ref.size() != planes.size()) throw ConfigError("reference and input have different channel counts");
    std::cout << std::fixed << std::setprecision(2) << "psnr_intermediate_db " << psnr(ref, rec.intermediate)
              << "\npsnr_denoised_db " << psnr(ref, rec.denoised) << '\n';
  }
  return 0;
}

int cmd_bench(const Globals& g, const BenchArgs& a) {
  if (a.out.empty()) throw ConfigError("--out is required");
  const std::string summary_path = a.summary.empty() ? fs::path(a.out).replace_extension(".summary.txt").string() : a.summary;
  for (const auto& m : a.methods)
    if (m != "reconnet" && m != "ista" && m != "backproject") throw ConfigError("unknown method '" + m + "'");
  const bool wants_model = std::find(a.methods.begin(), a.methods.end(), "reconnet") != a.methods.end();
  if (wants_model && a.artifacts.empty()) throw ConfigError("--artifacts is required for the reconnet method");

  BenchmarkConfig config;
  config.mrs = a.mrs;
  config.methods = a.methods;
  config.noise_sigmas = a.sigmas;
  config.repeats = a.repeats;
  config.noise_seed = g.seed;
  config.denoiser = make_denoiser(a.denoiser);

  Printer("bench")("images", a.images)("artifacts", a.artifacts.empty() ? "-" : a.artifacts)("mrs", join(a.mrs))(
      "methods", join(a.methods))("sigmas", join(a.sigmas))("repeats", a.repeats)("denoiser", config.denoiser.name)(
      "seed", g.seed)("threads", g.threads)("out", a.out)("summary", summary_path);

  std::vector<std::string> missing;
  std::map<double, RateSetup> setups;
  for (double mr : a.mrs) {
    const std::string label = rate_label(mr);
    RateSetup setup;
    if (a.artifacts.empty()) {
      setup.phi = generate_matrix(measurements_for_rate(kBlockDim, mr), kBlockDim, g.seed);
    } else {
      const fs::path phi_path = fs::path(a.artifacts) / ("phi_mr" + label + ".phim");
      if (!fs::is_regular_file(phi_path)) {
        missing.push_back(phi_path.string());
        continue;
      }
      setup.phi = load_matrix(phi_path);
      if (wants_model) {
        const fs::path model_path = fs::path(a.artifacts) / ("reconnet_mr" + label + ".rnet");
        if (!fs::is_regular_file(model_path)) {
          missing.push_back(model_path.string());
          continue;
        }
        setup.model = load_model(model_path);
      }
    }
    setups.emplace(mr, std::move(setup));
  }
  if (!missing.empty()) {
    std::string msg = "missing artifacts:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ConfigError(msg);
  }

  const auto paths = expand_images(a.images);
  if (paths.empty()) std::cerr << "warning: no images matched '" << a.images << "'\n";
  std::vector<BenchImage> images;
  for (const auto& p : paths) images.push_back({p.stem().string(), planes_from_image(load_image(p))});
  const ExperimentReport report = run_benchmark(images, setups, config);
  write_report_csv(fs::path(a.out), report);
  const auto rows = summarize(report);
  const std::string table = format_summary(rows);
  std::ofstream(summary_path, std::ios::trunc) << table;
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block compressive sensing reconstruction with ReconNet"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for per-block work")->capture_default_str()->check(
      CLI::PositiveNumber);
  app.add_flag("--verbose", g.verbose, "Progress output on stderr");

  GenphiArgs genphi;
  auto* gp = app.add_subcommand("genphi", "Generate a measurement matrix");
  gp->add_option("--mr", genphi.mr, "Measurement rate in (0, 1]")->capture_default_str();
  gp->add_flag("--quantize8", genphi.quantize8, "Store 8-bit quantized entries");
  gp->add_option("--out", genphi.out, "PHIM output path")->required();

  TrainArgs tr;
  auto* tp = app.add_subcommand("train", "Train a ReconNet model");
  tp->add_option("--manifest", tr.manifest, "Image list")->required();
  tp->add_option("--phi", tr.phi, "PHIM measurement matrix")->required();
  tp->add_option("--epochs", tr.epochs)->capture_default_str();
  auto* lr_opt = tp->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
  tp->add_flag("--lr-search", tr.lr_search, "Pick the rate from the decade grid")->excludes(lr_opt);
  tp->add_option("--probe-epochs", tr.probe_epochs, "Epochs per lr candidate")->capture_default_str();
  tp->add_option("--probe-init", tr.probe_init, "Init scheme of the lr probes")
      ->capture_default_str()
      ->check(CLI::IsMember({"random", "deterministic"}));
  tp->add_option("--val-frac", tr.val_frac)->capture_default_str();
  tp->add_option("--out", tr.out, "RNET output path")->required();
  tp->add_option("--log", tr.log, "Training log CSV (default <out>.log.csv)");
  tp->add_option("--batch-size", tr.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  tp->add_option("--conv-std", tr.conv_std)->capture_default_str();
  tp->add_option("--fc-std", tr.fc_std)->capture_default_str();
  tp->add_flag("--fan-in-init", tr.fan_in_init, "Conv std sqrt(2/fan_in) per layer, overrides --conv-std");
  tp->add_option("--output-bias", tr.output_bias, "Initial bias of the last layer, a number or 'mean'")
      ->capture_default_str();
  tp->add_option("--max-patches", tr.max_patches, "Random subset size, 0 keeps all")->capture_default_str();
  tp->add_option("--stride", tr.stride, "Patch extraction stride")->capture_default_str()->check(CLI::PositiveNumber);
  tp->add_option("--checkpoint-every", tr.checkpoint_every)->capture_default_str();

  ReconstructArgs rc;
  auto* rp = app.add_subcommand("reconstruct", "Sense and reconstruct one image");
  rp->add_option("--input", rc.input)->required();
  rp->add_option("--phi", rc.phi)->required();
  auto* model_opt = rp->add_option("--model", rc.model, "RNET model");
  rp->add_option("--method", rc.method, "reconnet, ista or backproject")->capture_default_str();
  rp->add_option("--noise-sigma", rc.noise_sigma, "Measurement noise in 8-bit units")->capture_default_str();
  rp->add_option("--denoiser", rc.denoiser, "identity, gaussian, nlmeans or external:<cmd>")->capture_default_str();
  rp->add_option("--out", rc.out, "Denoised output")->required();
  rp->add_option("--intermediate-out", rc.intermediate_out, "Intermediate output (default <out>.intermediate)");
  rp->add_option("--reference", rc.reference, "Ground truth for PSNR");

  BenchArgs bn;
  auto* bp = app.add_subcommand("bench", "Benchmark methods across rates and noise levels");
  bp->add_option("--images", bn.images, "Glob, manifest or single image")->required();
  bp->add_option("--artifacts", bn.artifacts, "Directory with phi_mr<mr>.phim and reconnet_mr<mr>.rnet");
  bp->add_option("--mrs", bn.mrs)->delimiter(',')->capture_default_str();
  bp->add_option("--methods", bn.methods)->delimiter(',')->capture_default_str();
  bp->add_option("--sigmas", bn.sigmas)->delimiter(',')->capture_default_str();
  bp->add_option("--repeats", bn.repeats)->capture_default_str()->check(CLI::PositiveNumber);
  bp->add_option("--denoiser", bn.denoiser)->capture_default_str();
  bp->add_option("--out", bn.out, "Report CSV")->required();
  bp->add_option("--summary", bn.summary, "Summary table (default <out>.summary.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*model_opt && rc.method != "reconnet") {
    std::cerr << "error: --model and --method " << rc.method << " are exclusive\n";
    return 2;
  }

  set_threads(g.threads);
  try {
    if (*gp) return cmd_genphi(g, genphi);
    if (*tp) return cmd_train(g, tr);
    if (*rp) return cmd_reconstruct(g, rc);
    if (*bp) return cmd_bench(g, bn);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
