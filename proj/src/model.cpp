#include "reconnet/model.hpp"

#include <cmath>
#include <string>

#include "reconnet/binary_io.hpp"
#include "reconnet/error.hpp"
#include "reconnet/rng.hpp"

namespace reconnet {

namespace {
constexpr std::uint32_t kRnetVersion = 1;
}

std::string to_string(InitMode mode) { return mode == InitMode::Random ? "random" : "deterministic"; }

InitMode parse_init_mode(const std::string& text) {
  if (text == "random") return InitMode::Random;
  if (text == "deterministic") return InitMode::Deterministic;
  throw ArgumentError("unknown init mode '" + text + "'");
}

void ReconNetModel::validate() const {
  net.validate();
  if (net.side != kBlockSide) throw ConfigError("model map side must be 33");
  if (net.convs.size() != kReconNetConvs.size()) throw ConfigError("model must have exactly six conv layers");
  for (std::size_t i = 0; i < kReconNetConvs.size(); ++i) {
    const auto& conv = net.convs[i];
    const auto& spec = kReconNetConvs[i];
    if (conv.kernel_size != spec.kernel || conv.out_channels != spec.out_channels || conv.apply_relu != spec.relu)
      throw ConfigError("conv" + std::to_string(i + 1) + " does not match the ReconNet layer pattern");
  }
}

ReconNetModel build_model(std::size_t m, InitMode init, const MeasurementMatrix* phi, std::uint64_t seed,
                          const InitOptions& options) {
  if (m < 1 || m > kBlockDim) throw ArgumentError("measurement count must lie in [1, 1089]");
  if (init == InitMode::Deterministic) {
    if (!phi) throw ArgumentError("deterministic initialization requires a measurement matrix");
    if (phi->m != m || phi->n != kBlockDim)
      throw ArgumentError("measurement matrix is " + std::to_string(phi->m) + "x" + std::to_string(phi->n) +
                          ", model needs " + std::to_string(m) + "x1089");
  }
  ReconNetModel model;
  model.net = make_network<float>(kBlockSide, m, kReconNetConvs);
  model.init = init;
  model.matrix_seed = phi ? phi->seed : 0;

  Rng rng(seed);
  for (auto& conv : model.net.convs) {
    const double fan_in = static_cast<double>(conv.in_channels * conv.kernel_size * conv.kernel_size);
    const double sd = options.fan_in_scaled ? std::sqrt(2.0 / fan_in) : options.conv_std;
    for (auto& w : conv.weights) w = static_cast<float>(sd * rng.normal());
  }
  std::fill(model.net.convs.back().biases.begin(), model.net.convs.back().biases.end(),
            static_cast<float>(options.output_bias));

  auto& fc = model.net.fc;
  if (init == InitMode::Random) {
    for (auto& w : fc.weights) w = static_cast<float>(options.fc_std * rng.normal());
  } else {
    for (std::size_t i = 0; i < kBlockDim; ++i)
      for (std::size_t j = 0; j < m; ++j) fc.weights[i * m + j] = static_cast<float>(phi->entries[j * kBlockDim + i]);
  }
  return model;
}

std::vector<double> infer_block(const ReconNetModel& model, std::span<const double> y) {
  if (y.size() != model.m())
    throw ArgumentError("model expects " + std::to_string(model.m()) + " measurements, got " +
                        std::to_string(y.size()));
  std::vector<float> input(y.begin(), y.end());
  const auto out = forward(model.net, std::span<const float>(input));
  return {out.data.begin(), out.data.end()};
}

std::size_t parameter_count(std::size_t m) {
  std::size_t convs = 0, channels = 1;
  for (const auto& spec : kReconNetConvs) {
    convs += spec.out_channels * channels * spec.kernel * spec.kernel + spec.out_channels;
    channels = spec.out_channels;
  }
  return m * kBlockDim + kBlockDim + convs;
}

std::vector<std::uint8_t> encode_model(const ReconNetModel& model) {
  model.validate();
  ByteWriter w;
  w.bytes("RNET");
  w.u32(kRnetVersion);
  w.u32(static_cast<std::uint32_t>(model.m()));
  w.u64(model.matrix_seed);
  w.u8(static_cast<std::uint8_t>(model.init));
  w.u64(model.steps);
  const auto params = parameters(model.net);
  for (std::size_t b = 0; b < params.size(); b += 2) {
    w.u32(static_cast<std::uint32_t>(params[b].values.size()));
    for (float v : params[b].values) w.f32(v);
    w.u32(static_cast<std::uint32_t>(params[b + 1].values.size()));
    for (float v : params[b + 1].values) w.f32(v);
  }
  return w.take();
}

ReconNetModel decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "RNET");
  r.expect_magic("RNET");
  if (r.u32("version") != kRnetVersion) r.fail("version", "unsupported version");
  const std::uint32_t m = r.u32("m");
  if (m < 1 || m > kBlockDim) r.fail("m", "measurement count out of range");
  ReconNetModel model;
  model.net = make_network<float>(kBlockSide, m, kReconNetConvs);
  model.matrix_seed = r.u64("matrix_seed");
  const std::uint8_t init = r.u8("init_mode");
  if (init > 1) r.fail("init_mode", "unknown init mode");
  model.init = static_cast<InitMode>(init);
  model.steps = r.u64("steps");
  for (auto& view : parameters(model.net)) {
    const std::string count_field = view.name + ".count";
    if (r.u32(count_field) != view.values.size()) r.fail(count_field, "count does not match the architecture");
    for (auto& v : view.values) v = r.f32(view.name);
  }
  r.expect_end();
  return model;
}

void save_model(const ReconNetModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

ReconNetModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace reconnet
