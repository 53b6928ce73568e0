#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reconnet/numerics/tensor.hpp"

namespace reconnet {

// Convolution with odd square kernels and "same" zero padding.
//
// Weights are laid out [out_channels][in_channels][kernel][kernel].
template <typename T>
struct ConvLayer {
  std::size_t kernel_size = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::vector<T> weights;
  std::vector<T> biases;
  bool apply_relu = false;

  ConvLayer() = default;
  ConvLayer(std::size_t kernel, std::size_t in, std::size_t out, bool relu);

  std::size_t padding() const { return (kernel_size - 1) / 2; }
  std::size_t weight_index(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return ((o * in_channels + i) * kernel_size + ky) * kernel_size + kx;
  }

  // Throws ConfigError when the kernel is even or the buffers are mis-sized.
  void validate() const;
};

// Fully connected layer whose output is reshaped to a square single-channel
// map. Weights are [out_dim][in_dim] row-major.
template <typename T>
struct FcLayer {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::vector<T> weights;
  std::vector<T> biases;

  FcLayer() = default;
  FcLayer(std::size_t in, std::size_t out);

  // Side of the square output map. Throws ConfigError if out_dim is not square.
  std::size_t output_side() const;
  void validate() const;
};

enum class ConvAlgo {
  Direct,  // six nested loops, kept as the serial reference
  Im2col,  // patch matrix + GEMM fast path
};

template <typename T>
Tensor3<T> conv2d_forward(const Tensor3<T>& input, const ConvLayer<T>& layer,
                          ConvAlgo algo = ConvAlgo::Im2col);

template <typename T>
Tensor3<T> fc_forward(std::span<const T> input, const FcLayer<T>& layer);

template <typename T>
Tensor3<T> relu(const Tensor3<T>& input);

// Parameter gradients of one convolution. `output` is the layer's forward
// result (post-activation); the ReLU mask is taken as output > 0, so the
// subgradient at exactly zero is zero. When input_grad is non-null it
// receives dL/d(input), overwriting its contents.
template <typename T>
void conv2d_backward(const Tensor3<T>& input, const Tensor3<T>& output, const Tensor3<T>& output_grad,
                     const ConvLayer<T>& layer, std::span<T> weight_grad, std::span<T> bias_grad,
                     Tensor3<T>* input_grad, ConvAlgo algo = ConvAlgo::Im2col);

// Accumulates dL/dW = g x input^T and dL/db = g. input_grad (optional)
// receives W^T g.
template <typename T>
void fc_backward(std::span<const T> input, const Tensor3<T>& output_grad, const FcLayer<T>& layer,
                 std::span<T> weight_grad, std::span<T> bias_grad, std::span<T> input_grad);

}  // namespace reconnet
