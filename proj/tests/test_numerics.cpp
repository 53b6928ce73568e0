#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "reconnet/error.hpp"
#include "reconnet/numerics/layers.hpp"
#include "reconnet/numerics/network.hpp"
#include "reconnet/training.hpp"

using namespace reconnet;

namespace {

template <typename T>
Tensor3<T> random_tensor(std::size_t h, std::size_t w, std::size_t c, Rng& rng) {
  Tensor3<T> t(h, w, c);
  oracle::fill_normal<T>(t.data, rng);
  return t;
}

template <typename T>
ConvLayer<T> random_conv(std::size_t k, std::size_t in, std::size_t out, bool relu, Rng& rng) {
  ConvLayer<T> layer(k, in, out, relu);
  oracle::fill_normal<T>(layer.weights, rng, 0.5);
  oracle::fill_normal<T>(layer.biases, rng, 0.5);
  return layer;
}

}  // namespace

TEST_CASE("identity kernel passes input through") {
  Rng rng(1);
  auto in = random_tensor<float>(6, 5, 1, rng);
  ConvLayer<float> layer(1, 1, 1, false);
  layer.weights = {1.0f};
  layer.biases = {0.0f};
  for (auto algo : {ConvAlgo::Direct, ConvAlgo::Im2col}) CHECK(conv2d_forward(in, layer, algo).data == in.data);
}

TEST_CASE("zero weights with relu give zeros") {
  Rng rng(2);
  auto in = random_tensor<float>(7, 7, 3, rng);
  ConvLayer<float> layer(3, 3, 4, true);
  for (auto algo : {ConvAlgo::Direct, ConvAlgo::Im2col}) {
    auto out = conv2d_forward(in, layer, algo);
    CHECK(out.channels == 4);
    for (float v : out.data) CHECK(v == 0.0f);
  }
}

TEST_CASE("conv matches six-loop oracle on 5x5x2") {
  Rng rng(3);
  auto in = random_tensor<double>(5, 5, 2, rng);
  for (bool relu : {false, true}) {
    auto layer = random_conv<double>(3, 2, 3, relu, rng);
    const auto want = oracle::conv(in, layer, relu);
    for (auto algo : {ConvAlgo::Direct, ConvAlgo::Im2col})
      CHECK(oracle::relative_error(conv2d_forward(in, layer, algo).data, want.data) < 1e-6);
  }
}

TEST_CASE("conv shape preserved and channel mismatch rejected") {
  Rng rng(4);
  for (std::size_t k : {1, 3, 5, 7, 11}) {
    auto in = random_tensor<float>(4 + k % 3, 9, 2, rng);
    auto layer = random_conv<float>(k, 2, 3, true, rng);
    auto out = conv2d_forward(in, layer);
    CHECK(out.height == in.height);
    CHECK(out.width == in.width);
    CHECK(out.channels == 3);
    CHECK(all_finite<float>(out.data));
  }
  auto bad = random_tensor<float>(5, 5, 1, rng);
  auto layer = random_conv<float>(3, 2, 1, false, rng);
  CHECK_THROWS_AS(conv2d_forward(bad, layer), ConfigError);
  CHECK_THROWS_AS(ConvLayer<float>(2, 1, 1, false), ConfigError);
}

TEST_CASE("fc forward cases") {
  SUBCASE("identity weights reshape the input") {
    FcLayer<float> fc(1089, 1089);
    for (std::size_t i = 0; i < 1089; ++i) fc.weights[i * 1089 + i] = 1.0f;
    Rng rng(5);
    std::vector<float> x(1089);
    oracle::fill_uniform<float>(x, rng);
    auto out = fc_forward<float>(x, fc);
    CHECK(out.height == 33);
    CHECK(out.width == 33);
    CHECK(out.data == x);
  }
  SUBCASE("zero input gives the biases") {
    FcLayer<float> fc(10, 16);
    Rng rng(6);
    oracle::fill_normal<float>(fc.weights, rng);
    oracle::fill_normal<float>(fc.biases, rng);
    std::vector<float> x(10, 0.0f);
    CHECK(fc_forward<float>(x, fc).data == fc.biases);
  }
  SUBCASE("random case vs matvec oracle") {
    FcLayer<double> fc(37, 81);
    Rng rng(7);
    oracle::fill_normal<double>(fc.weights, rng);
    oracle::fill_normal<double>(fc.biases, rng);
    std::vector<double> x(37);
    oracle::fill_normal<double>(x, rng);
    auto want = oracle::matvec<double>(fc.weights, 81, 37, x);
    for (std::size_t i = 0; i < 81; ++i) want[i] += fc.biases[i];
    CHECK(oracle::relative_error(fc_forward<double>(x, fc).data, want) < 1e-6);
  }
  SUBCASE("length mismatch and non-square output rejected") {
    FcLayer<float> fc(10, 16);
    std::vector<float> x(9);
    CHECK_THROWS_AS(fc_forward<float>(x, fc), ConfigError);
    CHECK_THROWS_AS(FcLayer<float>(4, 15), ConfigError);
  }
}

TEST_CASE("relu examples") {
  Tensor3<float> t(1, 3, 1);
  t.data = {-1.0f, 0.0f, 2.0f};
  CHECK(relu(t).data == std::vector<float>{0.0f, 0.0f, 2.0f});
  t.data = {-1.0f, -2.0f, -0.5f};
  CHECK(relu(t).data == std::vector<float>{0.0f, 0.0f, 0.0f});
  t.data = {0.0f, 1.0f, 3.0f};
  CHECK(relu(t).data == t.data);
}

TEST_CASE("linearity of conv and fc") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto layer = random_conv<double>(5, 2, 3, false, rng);
    std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    auto x = random_tensor<double>(8, 6, 2, rng);
    auto y = random_tensor<double>(8, 6, 2, rng);
    const double a = rng.normal(), b = rng.normal();
    Tensor3<double> mix(8, 6, 2);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
    auto fx = conv2d_forward(x, layer), fy = conv2d_forward(y, layer), fm = conv2d_forward(mix, layer);
    std::vector<double> want(fm.size());
    for (std::size_t i = 0; i < want.size(); ++i) want[i] = a * fx.data[i] + b * fy.data[i];
    CHECK(oracle::relative_error(fm.data, want) < 1e-6);

    FcLayer<double> fc(12, 25);
    oracle::fill_normal<double>(fc.weights, rng);
    std::vector<double> u(12), v(12), w(12);
    oracle::fill_normal<double>(u, rng);
    oracle::fill_normal<double>(v, rng);
    for (std::size_t i = 0; i < 12; ++i) w[i] = a * u[i] + b * v[i];
    auto gu = fc_forward<double>(u, fc), gv = fc_forward<double>(v, fc), gw = fc_forward<double>(w, fc);
    std::vector<double> lin(25);
    for (std::size_t i = 0; i < 25; ++i) lin[i] = a * gu.data[i] + b * gv.data[i];
    CHECK(oracle::relative_error(gw.data, lin) < 1e-6);
  }
}

TEST_CASE("fast and direct conv agree forward and backward") {
  Rng rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t k = 1 + 2 * rng.uniform_index(5);
    const std::size_t in_c = 1 + rng.uniform_index(4), out_c = 1 + rng.uniform_index(4);
    const std::size_t h = 1 + rng.uniform_index(12), w = 1 + rng.uniform_index(12);
    auto layer = random_conv<float>(k, in_c, out_c, rng.uniform() < 0.5, rng);
    auto in = random_tensor<float>(h, w, in_c, rng);
    auto a = conv2d_forward(in, layer, ConvAlgo::Direct);
    auto b = conv2d_forward(in, layer, ConvAlgo::Im2col);
    CHECK(oracle::relative_error(b.data, a.data) < 1e-5);

    auto g = random_tensor<float>(h, w, out_c, rng);
    std::vector<float> wd(layer.weights.size()), wi(layer.weights.size());
    std::vector<float> bd(out_c), bi(out_c);
    Tensor3<float> gd, gi;
    conv2d_backward(in, a, g, layer, std::span<float>(wd), std::span<float>(bd), &gd, ConvAlgo::Direct);
    conv2d_backward(in, a, g, layer, std::span<float>(wi), std::span<float>(bi), &gi, ConvAlgo::Im2col);
    CHECK(oracle::relative_error(wi, wd) < 1e-5);
    CHECK(oracle::relative_error(bi, bd) < 1e-5);
    CHECK(oracle::relative_error(gi.data, gd.data) < 1e-5);
  }
}

TEST_CASE("single-thread conv is bitwise deterministic") {
  Rng rng(10);
  auto layer = random_conv<float>(11, 1, 64, true, rng);
  auto in = random_tensor<float>(33, 33, 1, rng);
  CHECK(conv2d_forward(in, layer).data == conv2d_forward(in, layer).data);
}

TEST_CASE("fc gradient identities") {
  FcLayer<double> fc(5, 1);
  Rng rng(11);
  oracle::fill_normal<double>(fc.weights, rng);
  std::vector<double> x(5);
  oracle::fill_normal<double>(x, rng);
  Tensor3<double> g(1, 1, 1, 2.5);
  std::vector<double> wg(5, 0.0), bg(1, 0.0), ig(5, 0.0);
  fc_backward<double>(x, g, fc, wg, bg, ig);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(wg[j] == doctest::Approx(x[j] * 2.5));
    CHECK(ig[j] == doctest::Approx(fc.weights[j] * 2.5));
  }
  CHECK(bg[0] == doctest::Approx(2.5));
}

TEST_CASE("tape lifecycle") {
  Rng rng(12);
  auto net = oracle::random_network(5, 4, kReconNetConvs, rng, 0.0);
  std::vector<double> y(4);
  oracle::fill_normal<double>(y, rng);
  GradientTape<double> tape;
  Tensor3<double> g(5, 5, 1, 1.0);
  CHECK_THROWS_AS(backward(net, g, tape), StateError);
  auto out = forward<double>(net, y, &tape);
  CHECK(tape.recorded());
  CHECK(oracle::relative_error(out.data, oracle::network<double>(net, y)) < 1e-10);

  SUBCASE("zero loss gradient gives zero gradients") {
    Tensor3<double> zero(5, 5, 1, 0.0);
    auto grad = backward(net, zero, tape);
    for (const auto& p : parameters(static_cast<const Network<double>&>(grad.params)))
      for (double v : p.values) CHECK(v == 0.0);
  }
  SUBCASE("second backward needs a new forward") {
    backward(net, g, tape);
    CHECK_FALSE(tape.recorded());
    CHECK_THROWS_AS(backward(net, g, tape), StateError);
  }
}

TEST_CASE("finite differences on small random networks") {
  const std::array<ConvSpec, 3> specs{{{3, 4, true}, {3, 3, true}, {3, 1, false}}};
  Rng rng(13);
  for (int trial = 0; trial < 3; ++trial) {
    auto net = oracle::random_network(8, 6, specs, rng, 0.0);
    std::vector<std::vector<double>> ys(2, std::vector<double>(6)), xs(2, std::vector<double>(64));
    for (auto& y : ys) oracle::fill_normal<double>(y, rng);
    for (auto& x : xs) oracle::fill_uniform<double>(x, rng);
    const auto check = oracle::check_gradient(net, ys, xs);
    INFO("worst ", check.worst, " refined ", check.refined);
    CHECK(check.unresolved == 0);
    CHECK(check.checked == net.parameter_count());
    CHECK(check.max_rel_error < 1e-4);
  }
}

TEST_CASE("parameter views cover the network in order") {
  auto net = make_network<float>(33, 10, kReconNetConvs);
  auto views = parameters(net);
  REQUIRE(views.size() == 14);
  CHECK(views[0].name == "fc.weights");
  CHECK(views[1].name == "fc.biases");
  CHECK(views[2].name == "conv1.weights");
  CHECK(views[13].name == "conv6.biases");
  std::size_t total = 0;
  for (const auto& v : views) total += v.values.size();
  CHECK(total == net.parameter_count());
  CHECK(net.parameter_count() == 10 * 1089 + 1089 + 22914);
}
