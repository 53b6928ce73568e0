#include "reconnet/denoise.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "reconnet/binary_io.hpp"
#include "reconnet/error.hpp"
#include "reconnet/image_io.hpp"

namespace reconnet {

namespace {

Plane clamped(Plane plane) {
  for (double& v : plane.data) v = std::clamp(v, 0.0, 1.0);
  return plane;
}

Plane gaussian_blur(const Plane& in, double sigma_px) {
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma_px));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma_px * sigma_px));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const auto H = static_cast<long>(in.height), W = static_cast<long>(in.width);
  Plane tmp(in.height, in.width), out(in.height, in.width);
  for (long r = 0; r < H; ++r)
    for (long c = 0; c < W; ++c) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        const long cc = std::clamp(c + k, 0L, W - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * in.data[static_cast<std::size_t>(r * W + cc)];
      }
      tmp.data[static_cast<std::size_t>(r * W + c)] = acc;
    }
  for (long r = 0; r < H; ++r)
    for (long c = 0; c < W; ++c) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        const long rr = std::clamp(r + k, 0L, H - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.data[static_cast<std::size_t>(rr * W + c)];
      }
      out.data[static_cast<std::size_t>(r * W + c)] = acc;
    }
  return clamped(std::move(out));
}

Plane nl_means(const Plane& in, double sigma) {
  constexpr long kPatch = 2;   // 5x5 patches
  constexpr long kSearch = 5;  // 11x11 window
  const double h = 0.4 * sigma;
  const auto H = static_cast<long>(in.height), W = static_cast<long>(in.width);
  auto px = [&](long r, long c) {
    return in.data[static_cast<std::size_t>(std::clamp(r, 0L, H - 1) * W + std::clamp(c, 0L, W - 1))];
  };
  Plane out(in.height, in.width);
  const double patch_area = static_cast<double>((2 * kPatch + 1) * (2 * kPatch + 1));
#pragma omp parallel for schedule(static)
  for (long r = 0; r < H; ++r)
    for (long c = 0; c < W; ++c) {
      double weight_sum = 0.0, acc = 0.0;
      for (long dr = -kSearch; dr <= kSearch; ++dr)
        for (long dc = -kSearch; dc <= kSearch; ++dc) {
          double dist = 0.0;
          for (long pr = -kPatch; pr <= kPatch; ++pr)
            for (long pc = -kPatch; pc <= kPatch; ++pc) {
              const double d = px(r + pr, c + pc) - px(r + dr + pr, c + dc + pc);
              dist += d * d;
            }
          dist /= patch_area;
          const double w = std::exp(-std::max(dist - 2.0 * sigma * sigma, 0.0) / (h * h));
          weight_sum += w;
          acc += w * px(r + dr, c + dc);
        }
      out.data[static_cast<std::size_t>(r * W + c)] = acc / weight_sum;
    }
  return clamped(std::move(out));
}

std::filesystem::path scratch_path() {
  static std::atomic<unsigned> counter{0};
  return std::filesystem::temp_directory_path() /
         ("reconnet_denoise_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".pgm");
}

}  // namespace

Denoiser identity_denoiser() {
  return {"identity", [](const Plane& p, double) { return clamped(p); }};
}

Denoiser gaussian_denoiser() {
  return {"gaussian", [](const Plane& p, double sigma) {
            const double sigma_px = sigma / 20.0;
            if (!(sigma_px >= 0.1)) return clamped(p);
            return gaussian_blur(p, sigma_px);
          }};
}

Denoiser nlmeans_denoiser() {
  return {"nlmeans", [](const Plane& p, double sigma) {
            if (!(sigma > 0.0)) return clamped(p);
            return nl_means(p, sigma / 255.0);
          }};
}

Denoiser external_denoiser(const std::string& command) {
  return {"external:" + command, [command](const Plane& p, double sigma) {
            const Plane planes[] = {p};
            const auto input = scratch_path();
            save_image(image_from_planes(planes), input);
            const std::string cmd = command + " " + std::to_string(sigma) + " < '" + input.string() + "'";
            FILE* pipe = ::popen(cmd.c_str(), "r");
            if (!pipe) {
              std::filesystem::remove(input);
              throw IoError("cannot start denoiser '" + command + "'");
            }
            std::vector<std::uint8_t> bytes;
            char buf[65536];
            std::size_t got;
            while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) bytes.insert(bytes.end(), buf, buf + got);
            const int status = ::pclose(pipe);
            std::filesystem::remove(input);
            if (status != 0) throw IoError("denoiser '" + command + "' exited with status " + std::to_string(status));
            const ImageFile img = decode_netpbm(bytes);
            if (img.channels != 1 || img.width != p.width || img.height != p.height)
              throw FormatError("denoiser '" + command + "' returned an image of the wrong size");
            return planes_from_image(img).front();
          }};
}

Denoiser make_denoiser(const std::string& spec) {
  if (spec == "identity" || spec == "none") return identity_denoiser();
  if (spec == "gaussian") return gaussian_denoiser();
  if (spec == "nlmeans") return nlmeans_denoiser();
  if (spec.rfind("external:", 0) == 0 && spec.size() > 9) return external_denoiser(spec.substr(9));
  throw ArgumentError("unknown denoiser '" + spec + "' (expected identity, gaussian, nlmeans or external:<cmd>)");
}

}  // namespace reconnet
