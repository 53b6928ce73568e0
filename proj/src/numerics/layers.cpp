#include "reconnet/numerics/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "numerics/eigen_maps.hpp"
#include "reconnet/error.hpp"

namespace reconnet {

using detail::ConstMatrixMap;
using detail::ConstVectorMap;
using detail::MatrixMap;
using detail::VectorMap;

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
ConvLayer<T>::ConvLayer(std::size_t kernel, std::size_t in, std::size_t out, bool relu)
    : kernel_size(kernel),
      in_channels(in),
      out_channels(out),
      weights(out * in * kernel * kernel, T{0}),
      biases(out, T{0}),
      apply_relu(relu) {
  validate();
}

template <typename T>
void ConvLayer<T>::validate() const {
  if (kernel_size == 0 || kernel_size % 2 == 0)
    throw ConfigError("conv kernel size must be odd, got " + std::to_string(kernel_size));
  if (in_channels == 0 || out_channels == 0) throw ConfigError("conv channel counts must be positive");
  if (weights.size() != out_channels * in_channels * kernel_size * kernel_size)
    throw ConfigError("conv weight buffer has " + std::to_string(weights.size()) + " entries");
  if (biases.size() != out_channels)
    throw ConfigError("conv bias buffer has " + std::to_string(biases.size()) + " entries");
}

template <typename T>
FcLayer<T>::FcLayer(std::size_t in, std::size_t out)
    : in_dim(in), out_dim(out), weights(in * out, T{0}), biases(out, T{0}) {
  validate();
}

template <typename T>
std::size_t FcLayer<T>::output_side() const {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(out_dim))));
  if (side * side != out_dim) throw ConfigError("fc output size " + std::to_string(out_dim) + " is not square");
  return side;
}

template <typename T>
void FcLayer<T>::validate() const {
  if (in_dim == 0 || out_dim == 0) throw ConfigError("fc dimensions must be positive");
  if (weights.size() != in_dim * out_dim)
    throw ConfigError("fc weight buffer has " + std::to_string(weights.size()) + " entries");
  if (biases.size() != out_dim) throw ConfigError("fc bias buffer has " + std::to_string(biases.size()) + " entries");
  (void)output_side();
}

namespace {

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[4];
  return buffers[slot];
}

template <typename T>
void check_input(const Tensor3<T>& input, const ConvLayer<T>& layer) {
  if (input.channels != layer.in_channels)
    throw ConfigError("conv expects " + std::to_string(layer.in_channels) + " input channels, got " +
                      std::to_string(input.channels));
  if (input.size() != input.height * input.width * input.channels)
    throw ConfigError("tensor data length does not match its shape");
}

// Copies input into a zero-bordered (H + 2p) x (W + 2p) x C buffer.
template <typename T>
void pad_into(const Tensor3<T>& input, std::size_t pad, std::vector<T>& padded) {
  const std::size_t C = input.channels;
  const std::size_t Wp = input.width + 2 * pad;
  const std::size_t Hp = input.height + 2 * pad;
  padded.assign(Hp * Wp * C, T{0});
  const std::size_t row = input.width * C;
  for (std::size_t r = 0; r < input.height; ++r)
    std::memcpy(&padded[((r + pad) * Wp + pad) * C], &input.data[r * row], row * sizeof(T));
}

// Weights reordered to [out][ky][kx][in] so one kernel row over all channels
// is contiguous, matching a row segment of the padded HWC input.
template <typename T>
void reorder_weights(const ConvLayer<T>& layer, std::vector<T>& out) {
  const std::size_t K = layer.kernel_size, C = layer.in_channels, O = layer.out_channels;
  out.resize(O * K * K * C);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < C; ++i)
      for (std::size_t ky = 0; ky < K; ++ky)
        for (std::size_t kx = 0; kx < K; ++kx)
          out[((o * K + ky) * K + kx) * C + i] = layer.weights[layer.weight_index(o, i, ky, kx)];
}

template <typename T>
void unorder_add_weights(const ConvLayer<T>& layer, const T* reordered, std::span<T> weight_grad) {
  const std::size_t K = layer.kernel_size, C = layer.in_channels, O = layer.out_channels;
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < C; ++i)
      for (std::size_t ky = 0; ky < K; ++ky)
        for (std::size_t kx = 0; kx < K; ++kx)
          weight_grad[layer.weight_index(o, i, ky, kx)] += reordered[((o * K + ky) * K + kx) * C + i];
}

template <typename T>
void build_columns(const std::vector<T>& padded, std::size_t H, std::size_t W, std::size_t C, std::size_t K,
                   std::vector<T>& col) {
  const std::size_t Wp = W + K - 1;
  const std::size_t seg = K * C;
  const std::size_t kd = K * seg;
  col.resize(H * W * kd);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      T* dst = &col[(r * W + c) * kd];
      for (std::size_t ky = 0; ky < K; ++ky)
        std::memcpy(dst + ky * seg, &padded[((r + ky) * Wp + c) * C], seg * sizeof(T));
    }
}

// Fixed-order blocked dot product: the lane assignment depends only on n,
// so results do not change with buffer alignment.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  T lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) lanes[j] += a[i + j] * b[i + j];
  T acc{0};
  for (; i < n; ++i) acc += a[i] * b[i];
  for (std::size_t j = 0; j < kLanes; ++j) acc += lanes[j];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void finish(Tensor3<T>& out, const ConvLayer<T>& layer, bool bias_included) {
  const std::size_t O = layer.out_channels;
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    T* px = &out.data[p * O];
    for (std::size_t o = 0; o < O; ++o) {
      T v = bias_included ? px[o] : px[o] + layer.biases[o];
      if (layer.apply_relu && !(v > T{0})) v = T{0};
      px[o] = v;
    }
  }
}

template <typename T>
Tensor3<T> conv_direct(const Tensor3<T>& input, const ConvLayer<T>& layer) {
  const std::size_t H = input.height, W = input.width, C = layer.in_channels, O = layer.out_channels;
  const std::size_t K = layer.kernel_size;
  const auto pad = static_cast<long>(layer.padding());
  Tensor3<T> out(H, W, O);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      for (std::size_t o = 0; o < O; ++o) {
        T acc = layer.biases[o];
        for (std::size_t i = 0; i < C; ++i)
          for (std::size_t ky = 0; ky < K; ++ky) {
            const long rr = static_cast<long>(r + ky) - pad;
            if (rr < 0 || rr >= static_cast<long>(H)) continue;
            for (std::size_t kx = 0; kx < K; ++kx) {
              const long cc = static_cast<long>(c + kx) - pad;
              if (cc < 0 || cc >= static_cast<long>(W)) continue;
              acc += layer.weights[layer.weight_index(o, i, ky, kx)] *
                     input.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), i);
            }
          }
        out.at(r, c, o) = acc;
      }
  finish(out, layer, true);
  return out;
}

template <typename T>
Tensor3<T> conv_im2col(const Tensor3<T>& input, const ConvLayer<T>& layer) {
  const std::size_t H = input.height, W = input.width, C = layer.in_channels, O = layer.out_channels;
  const std::size_t K = layer.kernel_size, P = H * W;
  Tensor3<T> out(H, W, O);
  MatrixMap<T> result(out.data.data(), P, O);

  if (K == 1) {
    ConstMatrixMap<T> x(input.data.data(), P, C);
    ConstMatrixMap<T> w(layer.weights.data(), O, C);
    result.noalias() = x * w.transpose();
    finish(out, layer, false);
    return out;
  }

  auto& padded = scratch<T>(0);
  auto& wr = scratch<T>(1);
  pad_into(input, layer.padding(), padded);
  reorder_weights(layer, wr);
  const std::size_t seg = K * C, kd = K * seg, Wp = W + K - 1;

  if (O == 1) {
    // Single output map: slide contiguous kernel rows over the padded input
    // instead of materializing a patch matrix that would not fit in cache.
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t c = 0; c < W; ++c) {
        T acc{0};
        for (std::size_t ky = 0; ky < K; ++ky)
          acc += dot(&padded[((r + ky) * Wp + c) * C], &wr[ky * seg], seg);
        out.data[r * W + c] = acc;
      }
    finish(out, layer, false);
    return out;
  }

  auto& col = scratch<T>(2);
  build_columns(padded, H, W, C, K, col);
  ConstMatrixMap<T> cols(col.data(), P, kd);
  ConstMatrixMap<T> w(wr.data(), O, kd);
  result.noalias() = cols * w.transpose();
  finish(out, layer, false);
  return out;
}

template <typename T>
void check_backward_shapes(const Tensor3<T>& input, const Tensor3<T>& output, const Tensor3<T>& output_grad,
                           const ConvLayer<T>& layer, std::span<T> weight_grad, std::span<T> bias_grad) {
  check_input(input, layer);
  if (output.height != input.height || output.width != input.width || output.channels != layer.out_channels ||
      !output.same_shape(output_grad))
    throw ConfigError("conv backward: output/gradient shape mismatch");
  if (weight_grad.size() != layer.weights.size() || bias_grad.size() != layer.biases.size())
    throw ConfigError("conv backward: gradient buffer size mismatch");
}

// Gradient with respect to the pre-activation.
template <typename T>
void masked_grad(const Tensor3<T>& output, const Tensor3<T>& output_grad, bool relu, std::vector<T>& dz) {
  dz.assign(output_grad.data.begin(), output_grad.data.end());
  if (!relu) return;
  for (std::size_t i = 0; i < dz.size(); ++i)
    if (!(output.data[i] > T{0})) dz[i] = T{0};
}

template <typename T>
void conv_backward_direct(const Tensor3<T>& input, const std::vector<T>& dz, const ConvLayer<T>& layer,
                          std::span<T> weight_grad, std::span<T> bias_grad, Tensor3<T>* input_grad) {
  const std::size_t H = input.height, W = input.width, C = layer.in_channels, O = layer.out_channels;
  const std::size_t K = layer.kernel_size;
  const auto pad = static_cast<long>(layer.padding());
  if (input_grad) *input_grad = Tensor3<T>(H, W, C);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      for (std::size_t o = 0; o < O; ++o) {
        const T g = dz[(r * W + c) * O + o];
        bias_grad[o] += g;
        for (std::size_t i = 0; i < C; ++i)
          for (std::size_t ky = 0; ky < K; ++ky) {
            const long rr = static_cast<long>(r + ky) - pad;
            if (rr < 0 || rr >= static_cast<long>(H)) continue;
            for (std::size_t kx = 0; kx < K; ++kx) {
              const long cc = static_cast<long>(c + kx) - pad;
              if (cc < 0 || cc >= static_cast<long>(W)) continue;
              const auto ur = static_cast<std::size_t>(rr), uc = static_cast<std::size_t>(cc);
              const std::size_t wi = layer.weight_index(o, i, ky, kx);
              weight_grad[wi] += g * input.at(ur, uc, i);
              if (input_grad) input_grad->at(ur, uc, i) += g * layer.weights[wi];
            }
          }
      }
}

template <typename T>
void crop_into(const std::vector<T>& padded, std::size_t H, std::size_t W, std::size_t C, std::size_t pad,
               Tensor3<T>& out) {
  out = Tensor3<T>(H, W, C);
  const std::size_t Wp = W + 2 * pad;
  const std::size_t row = W * C;
  for (std::size_t r = 0; r < H; ++r)
    std::memcpy(&out.data[r * row], &padded[((r + pad) * Wp + pad) * C], row * sizeof(T));
}

template <typename T>
void conv_backward_im2col(const Tensor3<T>& input, const std::vector<T>& dz, const ConvLayer<T>& layer,
                          std::span<T> weight_grad, std::span<T> bias_grad, Tensor3<T>* input_grad) {
  const std::size_t H = input.height, W = input.width, C = layer.in_channels, O = layer.out_channels;
  const std::size_t K = layer.kernel_size, P = H * W;
  ConstMatrixMap<T> dZ(dz.data(), P, O);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t o = 0; o < O; ++o) bias_grad[o] += dz[p * O + o];

  if (K == 1) {
    ConstMatrixMap<T> x(input.data.data(), P, C);
    ConstMatrixMap<T> w(layer.weights.data(), O, C);
    MatrixMap<T>(weight_grad.data(), O, C).noalias() += dZ.transpose() * x;
    if (input_grad) {
      *input_grad = Tensor3<T>(H, W, C);
      MatrixMap<T>(input_grad->data.data(), P, C).noalias() = dZ * w;
    }
    return;
  }

  auto& padded = scratch<T>(0);
  auto& wr = scratch<T>(1);
  auto& padded_grad = scratch<T>(3);
  pad_into(input, layer.padding(), padded);
  reorder_weights(layer, wr);
  const std::size_t seg = K * C, kd = K * seg, Wp = W + K - 1;
  if (input_grad) padded_grad.assign(padded.size(), T{0});

  if (O == 1) {
    std::vector<T> dwr(kd, T{0});
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t c = 0; c < W; ++c) {
        const T g = dz[r * W + c];
        if (g == T{0}) continue;
        for (std::size_t ky = 0; ky < K; ++ky) {
          const std::size_t off = ((r + ky) * Wp + c) * C;
          axpy(g, &padded[off], &dwr[ky * seg], seg);
          if (input_grad) axpy(g, &wr[ky * seg], &padded_grad[off], seg);
        }
      }
    unorder_add_weights(layer, dwr.data(), weight_grad);
  } else {
    auto& col = scratch<T>(2);
    build_columns(padded, H, W, C, K, col);
    ConstMatrixMap<T> cols(col.data(), P, kd);
    ConstMatrixMap<T> w(wr.data(), O, kd);
    detail::RowMatrix<T> dwr = dZ.transpose() * cols;
    unorder_add_weights(layer, dwr.data(), weight_grad);
    if (input_grad) {
      // Reuse the column buffer for dL/d(columns), then scatter back.
      MatrixMap<T> dcol(col.data(), P, kd);
      dcol.noalias() = dZ * w;
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
          const T* src = &col[(r * W + c) * kd];
          for (std::size_t ky = 0; ky < K; ++ky) {
            T* dst = &padded_grad[((r + ky) * Wp + c) * C];
            for (std::size_t j = 0; j < seg; ++j) dst[j] += src[ky * seg + j];
          }
        }
    }
  }
  if (input_grad) crop_into(padded_grad, H, W, C, layer.padding(), *input_grad);
}

}  // namespace

template <typename T>
Tensor3<T> conv2d_forward(const Tensor3<T>& input, const ConvLayer<T>& layer, ConvAlgo algo) {
  check_input(input, layer);
  return algo == ConvAlgo::Direct ? conv_direct(input, layer) : conv_im2col(input, layer);
}

template <typename T>
void conv2d_backward(const Tensor3<T>& input, const Tensor3<T>& output, const Tensor3<T>& output_grad,
                     const ConvLayer<T>& layer, std::span<T> weight_grad, std::span<T> bias_grad,
                     Tensor3<T>* input_grad, ConvAlgo algo) {
  check_backward_shapes(input, output, output_grad, layer, weight_grad, bias_grad);
  std::vector<T> dz;
  masked_grad(output, output_grad, layer.apply_relu, dz);
  if (algo == ConvAlgo::Direct)
    conv_backward_direct(input, dz, layer, weight_grad, bias_grad, input_grad);
  else
    conv_backward_im2col(input, dz, layer, weight_grad, bias_grad, input_grad);
}

template <typename T>
Tensor3<T> fc_forward(std::span<const T> input, const FcLayer<T>& layer) {
  if (input.size() != layer.in_dim)
    throw ConfigError("fc expects input length " + std::to_string(layer.in_dim) + ", got " +
                      std::to_string(input.size()));
  const std::size_t side = layer.output_side();
  Tensor3<T> out(side, side, 1);
  ConstMatrixMap<T> w(layer.weights.data(), layer.out_dim, layer.in_dim);
  ConstVectorMap<T> x(input.data(), static_cast<Eigen::Index>(input.size()));
  ConstVectorMap<T> b(layer.biases.data(), static_cast<Eigen::Index>(layer.out_dim));
  VectorMap<T>(out.data.data(), static_cast<Eigen::Index>(layer.out_dim)).noalias() = w * x + b;
  return out;
}

template <typename T>
void fc_backward(std::span<const T> input, const Tensor3<T>& output_grad, const FcLayer<T>& layer,
                 std::span<T> weight_grad, std::span<T> bias_grad, std::span<T> input_grad) {
  if (input.size() != layer.in_dim || output_grad.size() != layer.out_dim ||
      weight_grad.size() != layer.weights.size() || bias_grad.size() != layer.out_dim)
    throw ConfigError("fc backward: buffer size mismatch");
  const auto in = static_cast<Eigen::Index>(layer.in_dim), out = static_cast<Eigen::Index>(layer.out_dim);
  ConstVectorMap<T> g(output_grad.data.data(), out);
  ConstVectorMap<T> x(input.data(), in);
  MatrixMap<T>(weight_grad.data(), out, in).noalias() += g * x.transpose();
  VectorMap<T>(bias_grad.data(), out) += g;
  if (!input_grad.empty()) {
    if (input_grad.size() != layer.in_dim) throw ConfigError("fc backward: input gradient size mismatch");
    ConstMatrixMap<T> w(layer.weights.data(), out, in);
    VectorMap<T>(input_grad.data(), in).noalias() = w.transpose() * g;
  }
}

template <typename T>
Tensor3<T> relu(const Tensor3<T>& input) {
  Tensor3<T> out = input;
  for (auto& v : out.data)
    if (!(v > T{0})) v = T{0};
  return out;
}

#define RECONNET_INSTANTIATE_LAYERS(T)                                                                      \
  template bool all_finite<T>(std::span<const T>);                                                          \
  template struct ConvLayer<T>;                                                                             \
  template struct FcLayer<T>;                                                                               \
  template Tensor3<T> conv2d_forward<T>(const Tensor3<T>&, const ConvLayer<T>&, ConvAlgo);                \
  template void conv2d_backward<T>(const Tensor3<T>&, const Tensor3<T>&, const Tensor3<T>&,                 \
                                   const ConvLayer<T>&, std::span<T>, std::span<T>, Tensor3<T>*, ConvAlgo); \
  template Tensor3<T> fc_forward<T>(std::span<const T>, const FcLayer<T>&);                                 \
  template void fc_backward<T>(std::span<const T>, const Tensor3<T>&, const FcLayer<T>&, std::span<T>,      \
                               std::span<T>, std::span<T>);                                                 \
  template Tensor3<T> relu<T>(const Tensor3<T>&);

RECONNET_INSTANTIATE_LAYERS(float)
RECONNET_INSTANTIATE_LAYERS(double)

}  // namespace reconnet
