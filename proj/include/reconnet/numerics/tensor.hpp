#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace reconnet {

// Dense height x width x channels array stored row-major with the channel
// index fastest: element (r, c, ch) lives at (r * width + c) * channels + ch.
template <typename T>
struct Tensor3 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(std::size_t h, std::size_t w, std::size_t c, T fill = T{0})
      : height(h), width(w), channels(c), data(h * w * c, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t pixels() const { return height * width; }

  std::size_t index(std::size_t r, std::size_t c, std::size_t ch) const {
    return (r * width + c) * channels + ch;
  }
  T& at(std::size_t r, std::size_t c, std::size_t ch) { return data[index(r, c, ch)]; }
  const T& at(std::size_t r, std::size_t c, std::size_t ch) const { return data[index(r, c, ch)]; }

  std::span<T> values() { return data; }
  std::span<const T> values() const { return data; }

  bool same_shape(const Tensor3& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
};

// True when every element is finite.
template <typename T>
bool all_finite(std::span<const T> values);

}  // namespace reconnet
