#pragma once

#include <functional>
#include <string>

#include "reconnet/plane.hpp"

namespace reconnet {

// Post-reconstruction denoiser. sigma is the noise estimate in 8-bit units;
// implementations keep the plane size and return values in [0, 1].
struct Denoiser {
  std::string name;
  std::function<Plane(const Plane&, double)> apply;

  Plane operator()(const Plane& plane, double sigma) const { return apply(plane, sigma); }
};

Denoiser identity_denoiser();
// Separable Gaussian blur with standard deviation sigma / 10 pixels.
Denoiser gaussian_denoiser();
// Non-local means (5x5 patches, 11x11 search window) with h = 0.4 sigma.
Denoiser nlmeans_denoiser();
// Runs `command <sigma>` with the plane as a PGM on stdin and reads a PGM of
// the same size from stdout.
Denoiser external_denoiser(const std::string& command);

// "identity", "gaussian", "nlmeans" or "external:<command>".
Denoiser make_denoiser(const std::string& spec);

}  // namespace reconnet
