#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace reconnet {

// Single-channel image with samples nominally in [0, 1], row-major.
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), data(h * w, fill) {}
  Plane(std::size_t h, std::size_t w, std::vector<double> samples) : height(h), width(w), data(std::move(samples)) {}

  double& at(std::size_t r, std::size_t c) { return data[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * width + c]; }
  friend bool operator==(const Plane&, const Plane&) = default;
};

}  // namespace reconnet
