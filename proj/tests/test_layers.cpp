#include <doctest.h>

#include "helpers.hpp"
#include "vreid/nn/layers.hpp"

using namespace vreid;
using namespace vreid::nn;
using testutil::finite_diff;
using testutil::max_rel_error;
using testutil::random_tensor;

namespace {

// Scalar probe: L = sum(w .* layer(x)) with a fixed random weighting, so both
// input and parameter gradients are exercised by one backward call.
Scalar probe_loss(const Tensor& y, const Tensor& w) {
  Scalar acc = 0.0;
  for (std::int64_t i = 0; i < y.size(); ++i) acc += y.data()[i] * w.data()[i];
  return acc;
}

void check_layer_gradients(Layer& layer, const Tensor& x0, Scalar tol = 5e-6) {
  RandomSource rng(99);
  Tensor y0 = layer.forward(x0, true);
  Tensor w = random_tensor(y0.shape(), rng);

  // Analytic gradients.
  Tensor dx = layer.backward(w);
  NamedParams params;
  layer.collect_params("p", params);

  // Input gradient vs finite differences.
  auto f_input = [&](const Tensor& x) { return probe_loss(layer.forward(x, true), w); };
  Tensor fd_x = finite_diff(f_input, x0);
  layer.forward(x0, true);  // restore caches consumed by finite_diff
  layer.backward(w);
  CHECK(max_rel_error(dx, fd_x) < tol);

  // Parameter gradients vs finite differences.
  for (auto& [name, p] : params) {
    Tensor analytic = p->grad;
    Tensor fd(p->value.shape());
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      const Scalar keep = p->value.data()[i];
      const Scalar h = 1e-5;
      p->value.data()[i] = keep + h;
      const Scalar up = probe_loss(layer.forward(x0, true), w);
      p->value.data()[i] = keep - h;
      const Scalar down = probe_loss(layer.forward(x0, true), w);
      p->value.data()[i] = keep;
      fd.data()[i] = (up - down) / (2.0 * h);
    }
    INFO("param ", name);
    CHECK(max_rel_error(analytic, fd) < tol);
  }
}

}  // namespace

TEST_CASE("conv2d matches finite differences") {
  RandomSource rng(1);
  Conv2d conv(2, 3, 3, 1, 1, true, rng);
  check_layer_gradients(conv, random_tensor({2, 2, 5, 4}, rng));
}

TEST_CASE("conv2d strided no-pad matches finite differences") {
  RandomSource rng(2);
  Conv2d conv(3, 4, 3, 2, 0, false, rng);
  check_layer_gradients(conv, random_tensor({2, 3, 7, 5}, rng));
}

TEST_CASE("conv2d validates input channels") {
  RandomSource rng(3);
  Conv2d conv(3, 4, 3, 1, 1, false, rng);
  Tensor bad({1, 2, 5, 5});
  CHECK_THROWS_AS(conv.forward(bad, false), ValidationError);
}

TEST_CASE("batchnorm 4d train mode matches finite differences") {
  RandomSource rng(4);
  BatchNorm bn(3);
  check_layer_gradients(bn, random_tensor({3, 3, 4, 2}, rng), 1e-5);
}

TEST_CASE("batchnorm 2d train mode matches finite differences") {
  RandomSource rng(5);
  BatchNorm bn(6);
  check_layer_gradients(bn, random_tensor({5, 6}, rng), 1e-5);
}

TEST_CASE("batchnorm eval uses running stats") {
  RandomSource rng(6);
  BatchNorm bn(2);
  // Default running stats: mean 0, var 1 -> affine-only transform.
  bn.gamma.value(0) = 2.0;
  bn.gamma.value(1) = 0.5;
  bn.beta.value(0) = 1.0;
  Tensor x = random_tensor({4, 2}, rng);
  Tensor y = bn.forward(x, false);
  const Scalar eps = 1e-5;
  for (int i = 0; i < 4; ++i) {
    CHECK(y(i, 0) == doctest::Approx(2.0 * x(i, 0) / std::sqrt(1.0 + eps) + 1.0).epsilon(1e-10));
    CHECK(y(i, 1) == doctest::Approx(0.5 * x(i, 1) / std::sqrt(1.0 + eps)).epsilon(1e-10));
  }
}

TEST_CASE("batchnorm running stats update toward batch statistics") {
  RandomSource rng(7);
  BatchNorm bn(1, 1e-5, 1.0);  // momentum 1: running stats equal batch stats
  Tensor x({4, 1});
  x(0, 0) = 1.0;
  x(1, 0) = 3.0;
  x(2, 0) = 5.0;
  x(3, 0) = 7.0;
  bn.forward(x, true);
  CHECK(bn.running_mean(0) == doctest::Approx(4.0));
  CHECK(bn.running_var(0) == doctest::Approx(5.0 * 4.0 / 3.0));  // unbiased
}

TEST_CASE("batchnorm refuses train-mode groups of one value") {
  RandomSource rng(20);
  BatchNorm bn(3);
  Tensor single({1, 3});  // one value per channel
  CHECK_THROWS_AS(bn.forward(single, true), ValidationError);
  CHECK_NOTHROW(bn.forward(single, false));  // eval uses running stats
}

TEST_CASE("instance norm matches finite differences") {
  RandomSource rng(8);
  InstanceNorm2d in(3);
  check_layer_gradients(in, random_tensor({2, 3, 3, 4}, rng), 1e-5);
}

TEST_CASE("ibn norm matches finite differences and splits channels") {
  RandomSource rng(9);
  IbnNorm ibn(4);
  check_layer_gradients(ibn, random_tensor({3, 4, 3, 3}, rng), 1e-5);
}

TEST_CASE("relu matches finite differences") {
  RandomSource rng(10);
  ReLU relu;
  // Keep values away from the kink at 0.
  Tensor x = random_tensor({3, 4}, rng);
  for (std::int64_t i = 0; i < x.size(); ++i)
    if (std::abs(x.data()[i]) < 0.05) x.data()[i] = 0.1;
  check_layer_gradients(relu, x);
}

TEST_CASE("maxpool matches finite differences") {
  RandomSource rng(11);
  MaxPool2d pool(2, 2);
  check_layer_gradients(pool, random_tensor({2, 3, 6, 4}, rng));
}

TEST_CASE("maxpool stem variant with padding") {
  RandomSource rng(12);
  MaxPool2d pool(3, 2, 1);
  Tensor x = random_tensor({1, 2, 7, 7}, rng);
  Tensor y = pool.forward(x, false);
  CHECK(y.shape() == std::vector<int>{1, 2, 4, 4});
}

TEST_CASE("global average pool matches finite differences") {
  RandomSource rng(13);
  GlobalAvgPool gap;
  check_layer_gradients(gap, random_tensor({2, 3, 4, 5}, rng));
}

TEST_CASE("linear matches finite differences") {
  RandomSource rng(14);
  Linear lin(5, 3, true, rng);
  check_layer_gradients(lin, random_tensor({4, 5}, rng));
}

TEST_CASE("bias-free linear has no bias parameter") {
  RandomSource rng(15);
  Linear lin(5, 3, false, rng);
  NamedParams params;
  lin.collect_params("fc", params);
  CHECK(params.size() == 1);
  CHECK(params[0].first == "fc.weight");
}

TEST_CASE("conv1d matches finite differences") {
  RandomSource rng(16);
  Conv1d conv(4, 2, 3, 1, true, rng);
  check_layer_gradients(conv, random_tensor({3, 4, 6}, rng));
}

TEST_CASE("softmax rows sum to one and backward matches") {
  RandomSource rng(17);
  Tensor x = random_tensor({4, 6}, rng);
  Tensor y = softmax_rows(x);
  for (int i = 0; i < 4; ++i) {
    Scalar sum = 0.0;
    for (int j = 0; j < 6; ++j) sum += y(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  Tensor w = random_tensor({4, 6}, rng);
  Tensor dx = softmax_rows_backward(w, y);
  auto f = [&](const Tensor& in) {
    Tensor out = softmax_rows(in);
    Scalar acc = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i) acc += out.data()[i] * w.data()[i];
    return acc;
  };
  CHECK(max_rel_error(dx, finite_diff(f, x)) < 1e-6);
}

TEST_CASE("sequential composes forward and backward") {
  RandomSource rng(18);
  Sequential seq;
  seq.add("conv", std::make_unique<Conv2d>(2, 3, 3, 1, 1, false, rng));
  seq.add("bn", std::make_unique<BatchNorm>(3));
  seq.add("relu", std::make_unique<ReLU>());
  check_layer_gradients(seq, random_tensor({2, 2, 4, 4}, rng), 1e-5);

  NamedParams params;
  seq.collect_params("net", params);
  CHECK(params.size() == 3);  // conv weight + bn gamma/beta
  NamedBuffers buffers;
  seq.collect_buffers("net", buffers);
  CHECK(buffers.size() == 2);
}
