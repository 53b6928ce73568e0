#include "oracles.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <unistd.h>

#include "reconnet/training.hpp"

namespace oracle {

std::vector<bool> relu_pattern(const Network<double>& net, std::span<const double> y) {
  auto act = reconnet::fc_forward<double>(y, net.fc);
  std::vector<bool> pattern;
  for (const auto& layer : net.convs) {
    auto linear = layer;
    linear.apply_relu = false;
    auto z = reconnet::conv2d_forward(act, linear);
    if (layer.apply_relu)
      for (auto& v : z.data) {
        pattern.push_back(v > 0.0);
        v = std::max(v, 0.0);
      }
    act = std::move(z);
  }
  return pattern;
}

GradCheck check_gradient(Network<double> net, const std::vector<std::vector<double>>& ys,
                         const std::vector<std::vector<double>>& xs, double step, double floor) {
  std::vector<reconnet::Example<double>> batch;
  for (std::size_t i = 0; i < ys.size(); ++i) batch.push_back({ys[i], xs[i]});
  auto grad = reconnet::NetworkGrad<double>::zeros_like(net);
  reconnet::loss_and_gradient<double>(net, batch, grad);

  auto patterns = [&] {
    std::vector<bool> all;
    for (const auto& y : ys) {
      auto p = relu_pattern(net, y);
      all.insert(all.end(), p.begin(), p.end());
    }
    return all;
  };
  const auto base = patterns();
  auto params = reconnet::parameters(net);
  const auto grads = reconnet::parameters(static_cast<const Network<double>&>(grad.params));

  GradCheck out;
  for (std::size_t b = 0; b < params.size(); ++b)
    for (std::size_t i = 0; i < params[b].values.size(); ++i) {
      double& theta = params[b].values[i];
      const double original = theta;
      auto probe = [&](double h, double& loss_value) {
        theta = original + h;
        loss_value = reconnet::loss<double>(net, batch);
        const bool same = patterns() == base;
        theta = original;
        return same;
      };
      double fd = 0.0;
      double lp = 0.0, lm = 0.0;
      bool plus = probe(step, lp), minus = probe(-step, lm);
      if (plus && minus) {
        fd = (lp - lm) / (2 * step);
      } else {
        ++out.refined;
        const double h = step * 1e-2;
        double l0 = reconnet::loss<double>(net, batch);
        plus = probe(h, lp);
        minus = probe(-h, lm);
        if (plus && minus) fd = (lp - lm) / (2 * h);
        else if (plus) fd = (lp - l0) / h;
        else if (minus) fd = (l0 - lm) / h;
        else {
          ++out.unresolved;
          continue;
        }
      }
      const double a = grads[b].values[i];
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = params[b].name + "[" + std::to_string(i) + "]";
      }
    }
  return out;
}

Network<double> random_network(std::size_t side, std::size_t input_dim, std::span<const reconnet::ConvSpec> specs,
                               Rng& rng, double weight_std) {
  auto net = reconnet::make_network<double>(side, input_dim, specs);
  fill_normal<double>(net.fc.weights, rng, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  fill_normal<double>(net.fc.biases, rng, 0.1);
  for (auto& layer : net.convs) {
    const double fan_in = static_cast<double>(layer.in_channels * layer.kernel_size * layer.kernel_size);
    fill_normal<double>(layer.weights, rng, weight_std > 0 ? weight_std : std::sqrt(2.0 / fan_in));
    fill_normal<double>(layer.biases, rng, 0.1);
  }
  return net;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("reconnet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace oracle
