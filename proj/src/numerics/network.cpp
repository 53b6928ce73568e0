#include "reconnet/numerics/network.hpp"

#include <string>

#include "reconnet/error.hpp"

namespace reconnet {

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t count = fc.weights.size() + fc.biases.size();
  for (const auto& conv : convs) count += conv.weights.size() + conv.biases.size();
  return count;
}

template <typename T>
void Network<T>::validate() const {
  fc.validate();
  if (fc.output_side() != side)
    throw ConfigError("fc output side " + std::to_string(fc.output_side()) + " does not match network side " +
                      std::to_string(side));
  std::size_t channels = 1;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    convs[i].validate();
    if (convs[i].in_channels != channels)
      throw ConfigError("conv" + std::to_string(i + 1) + " expects " + std::to_string(convs[i].in_channels) +
                        " channels but receives " + std::to_string(channels));
    channels = convs[i].out_channels;
  }
  if (channels != 1) throw ConfigError("network must end in a single-channel map");
}

template <typename T>
Network<T> make_network(std::size_t side, std::size_t input_dim, std::span<const ConvSpec> convs) {
  if (side == 0 || input_dim == 0) throw ArgumentError("network side and input dimension must be positive");
  Network<T> net;
  net.side = side;
  net.fc = FcLayer<T>(input_dim, side * side);
  std::size_t channels = 1;
  for (const auto& spec : convs) {
    net.convs.emplace_back(spec.kernel, channels, spec.out_channels, spec.relu);
    channels = spec.out_channels;
  }
  net.validate();
  return net;
}

namespace {

template <typename Net, typename V>
std::vector<ParamView<V>> collect(Net& net) {
  std::vector<ParamView<V>> views;
  views.push_back({"fc.weights", std::span<V>(net.fc.weights)});
  views.push_back({"fc.biases", std::span<V>(net.fc.biases)});
  for (std::size_t i = 0; i < net.convs.size(); ++i) {
    const std::string prefix = "conv" + std::to_string(i + 1);
    views.push_back({prefix + ".weights", std::span<V>(net.convs[i].weights)});
    views.push_back({prefix + ".biases", std::span<V>(net.convs[i].biases)});
  }
  return views;
}

}  // namespace

template <typename T>
std::vector<ParamView<T>> parameters(Network<T>& net) {
  return collect<Network<T>, T>(net);
}

template <typename T>
std::vector<ParamView<const T>> parameters(const Network<T>& net) {
  return collect<const Network<T>, const T>(net);
}

template <typename T>
NetworkGrad<T> NetworkGrad<T>::zeros_like(const Network<T>& net) {
  NetworkGrad grad{net, std::vector<T>(net.fc.in_dim, T{0})};
  grad.set_zero();
  return grad;
}

template <typename T>
void NetworkGrad<T>::set_zero() {
  for (auto& view : parameters(params)) std::fill(view.values.begin(), view.values.end(), T{0});
  std::fill(input.begin(), input.end(), T{0});
}

template <typename T>
void NetworkGrad<T>::accumulate(const NetworkGrad& other) {
  auto mine = parameters(params);
  auto theirs = parameters(other.params);
  for (std::size_t b = 0; b < mine.size(); ++b) {
    auto dst = mine[b].values;
    auto src = theirs[b].values;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  for (std::size_t i = 0; i < input.size() && i < other.input.size(); ++i) input[i] += other.input[i];
}

template <typename T>
void NetworkGrad<T>::scale(T factor) {
  for (auto& view : parameters(params))
    for (auto& v : view.values) v *= factor;
  for (auto& v : input) v *= factor;
}

template <typename T>
bool NetworkGrad<T>::all_finite() const {
  for (const auto& view : parameters(params))
    if (!reconnet::all_finite<T>(view.values)) return false;
  return reconnet::all_finite<T>(input);
}

template <typename T>
Tensor3<T> forward(const Network<T>& net, std::span<const T> input, GradientTape<T>* tape, ConvAlgo algo) {
  if (input.size() != net.fc.in_dim)
    throw ArgumentError("network expects " + std::to_string(net.fc.in_dim) + " measurements, got " +
                        std::to_string(input.size()));
  if (!tape) {
    Tensor3<T> map = fc_forward(input, net.fc);
    for (const auto& conv : net.convs) map = conv2d_forward(map, conv, algo);
    return map;
  }
  tape->input_.assign(input.begin(), input.end());
  tape->activations_.clear();
  tape->activations_.reserve(net.convs.size() + 1);
  tape->activations_.push_back(fc_forward(input, net.fc));
  for (const auto& conv : net.convs) tape->activations_.push_back(conv2d_forward(tape->activations_.back(), conv, algo));
  tape->state_ = GradientTape<T>::State::Recorded;
  return tape->activations_.back();
}

template <typename T>
void backward_accumulate(const Network<T>& net, const Tensor3<T>& loss_grad, GradientTape<T>& tape,
                         NetworkGrad<T>& grad, ConvAlgo algo) {
  using State = typename GradientTape<T>::State;
  if (tape.state_ == State::Empty) throw StateError("backward called before any forward pass was recorded");
  if (tape.state_ == State::Consumed) throw StateError("gradient tape already consumed by a previous backward");
  if (tape.activations_.size() != net.convs.size() + 1) throw StateError("tape was recorded on a different network");
  if (!loss_grad.same_shape(tape.activations_.back())) throw ConfigError("loss gradient shape mismatch");
  if (grad.params.convs.size() != net.convs.size()) throw ConfigError("gradient buffer does not match network");

  Tensor3<T> upstream = loss_grad;
  Tensor3<T> downstream;
  for (std::size_t i = net.convs.size(); i-- > 0;) {
    conv2d_backward(tape.activations_[i], tape.activations_[i + 1], upstream, net.convs[i],
                    std::span<T>(grad.params.convs[i].weights), std::span<T>(grad.params.convs[i].biases),
                    &downstream, algo);
    std::swap(upstream, downstream);
  }
  grad.input.resize(net.fc.in_dim);
  fc_backward(std::span<const T>(tape.input_), upstream, net.fc, std::span<T>(grad.params.fc.weights),
              std::span<T>(grad.params.fc.biases), std::span<T>(grad.input));

  tape.state_ = State::Consumed;
  tape.activations_.clear();
  tape.input_.clear();
}

template <typename T>
NetworkGrad<T> backward(const Network<T>& net, const Tensor3<T>& loss_grad, GradientTape<T>& tape, ConvAlgo algo) {
  auto grad = NetworkGrad<T>::zeros_like(net);
  backward_accumulate(net, loss_grad, tape, grad, algo);
  return grad;
}

#define RECONNET_INSTANTIATE_NETWORK(T)                                                                      \
  template struct Network<T>;                                                                                \
  template struct NetworkGrad<T>;                                                                            \
  template class GradientTape<T>;                                                                            \
  template Network<T> make_network<T>(std::size_t, std::size_t, std::span<const ConvSpec>);                  \
  template std::vector<ParamView<T>> parameters<T>(Network<T>&);                                             \
  template std::vector<ParamView<const T>> parameters<T>(const Network<T>&);                                 \
  template Tensor3<T> forward<T>(const Network<T>&, std::span<const T>, GradientTape<T>*, ConvAlgo);         \
  template void backward_accumulate<T>(const Network<T>&, const Tensor3<T>&, GradientTape<T>&, NetworkGrad<T>&, \
                                       ConvAlgo);                                                            \
  template NetworkGrad<T> backward<T>(const Network<T>&, const Tensor3<T>&, GradientTape<T>&, ConvAlgo);

RECONNET_INSTANTIATE_NETWORK(float)
RECONNET_INSTANTIATE_NETWORK(double)

}  // namespace reconnet
