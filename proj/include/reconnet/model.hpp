#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reconnet/numerics/network.hpp"
#include "reconnet/sensing.hpp"

namespace reconnet {

enum class InitMode : std::uint8_t { Random = 0, Deterministic = 1 };

std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& text);

struct InitOptions {
  double conv_std = 0.01;
  double fc_std = 0.01;  // random mode only
  // Per-layer std sqrt(2 / fan_in) instead of conv_std.
  bool fan_in_scaled = false;
  // Initial bias of the last convolution (e.g. the mean training pixel).
  double output_bias = 0.0;
};

// Fully connected layer (m -> 33 x 33) followed by the six-layer conv chain.
struct ReconNetModel {
  Network<float> net;
  std::uint64_t matrix_seed = 0;
  InitMode init = InitMode::Random;
  std::uint64_t steps = 0;

  std::size_t m() const { return net.fc.in_dim; }
  // Throws ConfigError unless the layer stack matches the fixed architecture.
  void validate() const;
};

// Conv weights ~ N(0, conv_std^2) drawn first from Rng(seed), so both init
// modes share them. Random mode then draws FC weights ~ N(0, fc_std^2);
// deterministic mode sets FC weight[i][j] = Phi[j][i]. All biases start at 0.
ReconNetModel build_model(std::size_t m, InitMode init, const MeasurementMatrix* phi, std::uint64_t seed,
                          const InitOptions& options = {});

// Forward pass for one block's measurements; output is the raw 33 x 33 map
// in row-major order (no clamping).
std::vector<double> infer_block(const ReconNetModel& model, std::span<const double> y);

std::size_t parameter_count(std::size_t m);

// RNET container: "RNET", u32 version, u32 m, u64 matrix seed, u8 init mode,
// u64 steps, then for fc, conv1..conv6: u32 weight count, float32 weights,
// u32 bias count, float32 biases. Little-endian.
std::vector<std::uint8_t> encode_model(const ReconNetModel& model);
ReconNetModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const ReconNetModel& model, const std::filesystem::path& path);
ReconNetModel load_model(const std::filesystem::path& path);

}  // namespace reconnet
