#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "reconnet/numerics/layers.hpp"
#include "reconnet/numerics/tensor.hpp"

namespace reconnet {

struct ConvSpec {
  std::size_t kernel;
  std::size_t out_channels;
  bool relu;
};

// The six convolutions that follow the fully connected layer:
// 11x11/64, 1x1/32, 7x7/1, repeated, with no ReLU on the last one.
constexpr std::array<ConvSpec, 6> kReconNetConvs{{
    {11, 64, true},
    {1, 32, true},
    {7, 1, true},
    {11, 64, true},
    {1, 32, true},
    {7, 1, false},
}};

// One fully connected layer to a side x side map followed by a chain of
// convolutions, all at side x side resolution.
template <typename T>
struct Network {
  std::size_t side = 0;
  FcLayer<T> fc;
  std::vector<ConvLayer<T>> convs;

  std::size_t input_dim() const { return fc.in_dim; }
  std::size_t parameter_count() const;
  // Throws ConfigError on broken channel chaining or wrong map size.
  void validate() const;
};

// Zero-initialized network with the given conv chain (single input channel).
template <typename T>
Network<T> make_network(std::size_t side, std::size_t input_dim, std::span<const ConvSpec> convs);

// Named view of one parameter buffer; used by optimizers and gradient checks.
template <typename T>
struct ParamView {
  std::string name;
  std::span<T> values;
};

// Buffers in fixed order: fc.weights, fc.biases, conv1.weights, conv1.biases, ...
template <typename T>
std::vector<ParamView<T>> parameters(Network<T>& net);
template <typename T>
std::vector<ParamView<const T>> parameters(const Network<T>& net);

// Gradients congruent with a Network, plus dL/d(input).
template <typename T>
struct NetworkGrad {
  Network<T> params;
  std::vector<T> input;

  static NetworkGrad zeros_like(const Network<T>& net);
  void set_zero();
  // this += other
  void accumulate(const NetworkGrad& other);
  void scale(T factor);
  bool all_finite() const;
};

template <typename T>
class GradientTape;

// Runs the network on one measurement vector. When tape is non-null the
// activations are recorded for a later backward pass.
template <typename T>
Tensor3<T> forward(const Network<T>& net, std::span<const T> input, GradientTape<T>* tape = nullptr,
                   ConvAlgo algo = ConvAlgo::Im2col);

// Exact gradients of a scalar loss whose gradient w.r.t. the network output
// is loss_grad. Throws StateError when the tape holds no unconsumed forward.
template <typename T>
NetworkGrad<T> backward(const Network<T>& net, const Tensor3<T>& loss_grad, GradientTape<T>& tape,
                        ConvAlgo algo = ConvAlgo::Im2col);

// As backward, but adds into an existing gradient (input gradient is overwritten).
template <typename T>
void backward_accumulate(const Network<T>& net, const Tensor3<T>& loss_grad, GradientTape<T>& tape,
                         NetworkGrad<T>& grad, ConvAlgo algo = ConvAlgo::Im2col);

// Activations recorded by a forward pass, consumed by exactly one backward.
template <typename T>
class GradientTape {
 public:
  bool recorded() const { return state_ == State::Recorded; }

 private:
  enum class State { Empty, Recorded, Consumed };

  template <typename U>
  friend Tensor3<U> forward(const Network<U>&, std::span<const U>, GradientTape<U>*, ConvAlgo);
  template <typename U>
  friend void backward_accumulate(const Network<U>&, const Tensor3<U>&, GradientTape<U>&, NetworkGrad<U>&,
                                  ConvAlgo);

  State state_ = State::Empty;
  std::vector<T> input_;
  // activations_[0] is the fc output; activations_[i + 1] the output of conv i.
  std::vector<Tensor3<T>> activations_;
};

}  // namespace reconnet
