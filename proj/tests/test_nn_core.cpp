// Copyright 2026 The nacasr Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "grad_check.hpp"
#include "nacasr/checkpoint.hpp"
#include "nacasr/kernels.hpp"
#include "nacasr/layers.hpp"
#include "nacasr/ops.hpp"
#include "nacasr/optim.hpp"

using namespace nac;
using nac::testing::grad_check;
using nac::testing::random_tensor;

TEST_CASE("conv1d: identity kernel returns the input") {
  std::mt19937_64 rng(1);
  nn::Var x(random_tensor({3, 17}, rng));
  nn::Tensor w({3, 3, 1}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) w[(c * 3 + c)] = 1.0;
  auto y = nn::conv1d(x, nn::constant(w), {}, {});
  CHECK(y.value() == x.value());
}

TEST_CASE("conv1d: output length follows the floor formula") {
  nn::Var x(nn::Tensor({1, 200}, 0.5));
  nn::Var w(nn::Tensor({4, 1, 3}, 0.1));
  auto y = nn::conv1d(x, w, {}, {.stride = 2, .dilation = 1, .pad_left = 1, .pad_right = 1});
  CHECK(y.shape() == nn::Shape{4, 100});
}

TEST_CASE("conv1d: zero input gives bias everywhere") {
  std::mt19937_64 rng(2);
  nn::Var x(nn::Tensor({2, 9}, 0.0));
  nn::Var w(random_tensor({3, 2, 3}, rng));
  nn::Var b(nn::Tensor({3}, std::vector<double>{0.5, -1.0, 2.0}));
  auto y = nn::conv1d(x, w, b, nn::Conv1d::same(3));
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t t = 0; t < 9; ++t) CHECK(y.value()[o * 9 + t] == b.value()[o]);
}

TEST_CASE("conv1d: mismatched channels name the dimension") {
  nn::Var x(nn::Tensor({2, 10}));
  nn::Var w(nn::Tensor({1, 3, 3}));
  CHECK_THROWS_WITH_AS(nn::conv1d(x, w, {}, {}),
                       doctest::Contains("input channels 2 do not match weight in_channels 3"),
                       nn::ShapeError);
  nn::Var tiny(nn::Tensor({3, 2}));
  CHECK_THROWS_AS(nn::conv1d(tiny, w, {}, {}), nn::ShapeError);
}

TEST_CASE("conv_transpose1d: length formula") {
  nn::Var x(nn::Tensor({1, 1}, 1.0));
  nn::Var w(nn::Tensor({1, 1, 5}, 1.0));
  CHECK(nn::conv_transpose1d(x, w, {}, 5, 0, 0).shape() == nn::Shape{1, 5});

  std::mt19937_64 rng(3);
  nn::Var seq(random_tensor({2, 13}, rng));
  nn::Tensor id({2, 2, 1}, 0.0);
  id[0] = 1.0;
  id[3] = 1.0;
  CHECK(nn::conv_transpose1d(seq, nn::constant(id), {}, 1, 0, 0).value() == seq.value());
}

TEST_CASE("conv_transpose1d: decoder stride cascade maps 80 frames to 16000 samples") {
  std::size_t length = 80;
  nn::Var h(nn::Tensor({1, length}, 0.1));
  for (std::size_t stride : {5, 5, 4, 2}) {
    nn::Var w(nn::Tensor({1, 1, 2 * stride}, 0.1));
    h = nn::conv_transpose1d(h, w, {}, stride, stride / 2, stride - stride / 2);
  }
  CHECK(h.dim(1) == 16000);
}

TEST_CASE("shape algebra: encoder strides {2,4,5,5} then decoder {5,5,4,2} is length-preserving") {
  for (std::size_t length = 200; length <= 2000; length += 200) {
    nn::Var h(nn::Tensor({1, length}, 0.0));
    for (std::size_t s : {2, 4, 5, 5}) {
      nn::Var w(nn::Tensor({1, 1, 2 * s}, 0.0));
      h = nn::conv1d(h, w, {}, {.stride = s, .dilation = 1, .pad_left = s - s / 2, .pad_right = s / 2});
    }
    CHECK(h.dim(1) == length / 200);
    for (std::size_t s : {5, 5, 4, 2}) {
      nn::Var w(nn::Tensor({1, 1, 2 * s}, 0.0));
      h = nn::conv_transpose1d(h, w, {}, s, s / 2, s - s / 2);
    }
    CHECK(h.dim(1) == length);
  }
}

TEST_CASE("lstm: single step equals the gated feedforward of a zero state") {
  std::mt19937_64 rng(4);
  const std::size_t d = 3, hdim = 2;
  auto x = random_tensor({1, d}, rng);
  auto wih = random_tensor({4 * hdim, d}, rng);
  auto whh = random_tensor({4 * hdim, hdim}, rng);
  auto b = random_tensor({4 * hdim}, rng);
  auto y = nn::lstm(nn::constant(x), nn::constant(wih), nn::constant(whh), nn::constant(b));
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t j = 0; j < hdim; ++j) {
    double a[4];
    for (std::size_t g = 0; g < 4; ++g) {
      a[g] = b[g * hdim + j];
      for (std::size_t k = 0; k < d; ++k) a[g] += wih[(g * hdim + j) * d + k] * x[k];
    }
    const double c = sig(a[0]) * std::tanh(a[2]);
    CHECK(y.value()[j] == doctest::Approx(sig(a[3]) * std::tanh(c)).epsilon(1e-14));
  }
}

TEST_CASE("lstm: zero weights give a bias-determined constant over time") {
  nn::Rng rng(5);
  const std::size_t hdim = 4;
  auto b = random_tensor({4 * hdim}, rng);
  auto y = nn::lstm(nn::constant(random_tensor({6, 3}, rng)), nn::constant(nn::Tensor({16, 3})),
                    nn::constant(nn::Tensor({16, 4})), nn::constant(b));
  // The cell state integrates i*g over time, so the output is only constant
  // once the forget gate is closed.
  auto b2 = b;
  for (std::size_t j = 0; j < hdim; ++j) b2[hdim + j] = -1e3;
  auto y2 = nn::lstm(nn::constant(random_tensor({6, 3}, rng)), nn::constant(nn::Tensor({16, 3})),
                     nn::constant(nn::Tensor({16, 4})), nn::constant(b2));
  for (std::size_t t = 1; t < 6; ++t)
    for (std::size_t j = 0; j < hdim; ++j) CHECK(y2.value()[t * hdim + j] == y2.value()[j]);
  // Input has no influence when the input weights are zero.
  auto y3 = nn::lstm(nn::constant(random_tensor({6, 3}, rng)), nn::constant(nn::Tensor({16, 3})),
                     nn::constant(nn::Tensor({16, 4})), nn::constant(b));
  CHECK(y3.value() == y.value());
}

TEST_CASE("backward: sum gives ones, squared norm gives 2p") {
  std::mt19937_64 rng(6);
  nn::Parameter p("p", random_tensor({4, 5}, rng));
  nn::backward(nn::sum(p.var()));
  for (double g : p.grad().data()) CHECK(g == 1.0);
  p.zero_grad();
  nn::backward(nn::sum(nn::square(p.var())));
  for (std::size_t i = 0; i < p.value().numel(); ++i) CHECK(p.grad()[i] == 2.0 * p.value()[i]);
}

TEST_CASE("backward: non-scalar loss is rejected") {
  nn::Var v(nn::Tensor({2, 2}, 1.0), true);
  CHECK_THROWS_AS(nn::backward(v), nn::ShapeError);
  nn::Var bad(nn::Tensor({1}, std::nan("")), true);
  CHECK_THROWS_AS(nn::backward(nn::sum(bad)), nn::NumericError);
}

TEST_CASE("gradient check: conv -> tanh -> mean composite") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    nn::Var x(random_tensor({3, 32}, rng), true);
    nn::Var w(random_tensor({4, 3, 3}, rng), true);
    nn::Var b(random_tensor({4}, rng), true);
    auto r = grad_check(
        [&] { return nn::mean(nn::tanh(nn::conv1d(x, w, b, {.stride = 2, .dilation = 2, .pad_left = 2, .pad_right = 1}))); },
        {x, w, b});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradient check: every layer type on small random shapes") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    // Random projection so the loss is not a plain sum.
    auto probe = [&](const nn::Var& y) {
      std::mt19937_64 prng(seed);
      return nn::sum(nn::mul(y, nn::constant(random_tensor(y.shape(), prng))));
    };
    SUBCASE("conv_transpose1d") {
      nn::Var x(random_tensor({3, 8}, rng), true);
      nn::Var w(random_tensor({3, 2, 6}, rng), true);
      nn::Var b(random_tensor({2}, rng), true);
      auto r = grad_check([&] { return probe(nn::conv_transpose1d(x, w, b, 3, 1, 2)); }, {x, w, b});
      CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("lstm") {
      nn::Var x(random_tensor({8, 5}, rng), true);
      nn::Var wih(random_tensor({12, 5}, rng), true);
      nn::Var whh(random_tensor({12, 3}, rng), true);
      nn::Var b(random_tensor({12}, rng), true);
      auto r = grad_check([&] { return probe(nn::lstm(x, wih, whh, b)); }, {x, wih, whh, b});
      CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("linear and activations") {
      nn::Var x(random_tensor({6, 8}, rng), true);
      nn::Var w(random_tensor({5, 8}, rng), true);
      nn::Var b(random_tensor({5}, rng), true);
      auto r = grad_check(
          [&] {
            auto h = nn::linear(x, w, b);
            return probe(nn::add(nn::elu(h), nn::mul(nn::sigmoid(h), nn::leaky_relu(h))));
          },
          {x, w, b});
      CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("reshaping ops") {
      nn::Var x(random_tensor({4, 6}, rng), true);
      nn::Var y(random_tensor({2, 6}, rng), true);
      auto r = grad_check(
          [&] {
            auto cat = nn::concat_rows({x, y});
            auto t = nn::transpose(nn::slice_rows(cat, 1, 5));
            auto m = nn::mean_axis1(nn::reshape(nn::slice_cols(t, 0, 4), {3, 2, 4}));
            return probe(nn::log(nn::square(m), 0.1));
          },
          {x, y});
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("determinism: identical seeds give bit-identical outputs and gradients") {
  auto run = [](std::uint64_t seed) {
    nn::Rng rng(seed);
    nn::Conv1d conv(2, 4, 3, rng, nn::Conv1d::same(3));
    nn::Lstm lstm(4, 4, 1, rng);
    nn::Var x(random_tensor({2, 20}, rng));
    auto y = lstm.forward(nn::transpose(conv.forward(x)));
    nn::backward(nn::mean(nn::square(y)));
    std::vector<double> flat(y.value().data().begin(), y.value().data().end());
    for (auto* p : conv.parameters()) flat.insert(flat.end(), p->grad().data().begin(), p->grad().data().end());
    for (auto* p : lstm.parameters()) flat.insert(flat.end(), p->grad().data().begin(), p->grad().data().end());
    return flat;
  };
  CHECK(run(11) == run(11));
  CHECK(run(11) != run(12));
}

TEST_CASE("kernels: OpenMP kernels agree with the serial reference bit-for-bit") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    kernels::ConvGeometry g;
    g.in_channels = 1 + rng() % 4;
    g.out_channels = 1 + rng() % 5;
    g.kernel = 1 + rng() % 7;
    g.stride = 1 + rng() % 5;
    g.dilation = 1 + rng() % 3;
    g.pad_left = rng() % 4;
    g.pad_right = rng() % 4;
    g.in_length = g.dilation * (g.kernel - 1) + 1 + rng() % 40;
    const std::size_t out_len = g.out_length();
    auto x = random_tensor({g.in_channels * g.in_length}, rng);
    auto w = random_tensor({g.out_channels * g.in_channels * g.kernel}, rng);
    auto b = random_tensor({g.out_channels}, rng);
    auto gy = random_tensor({g.out_channels * out_len}, rng);

    std::vector<double> y1(g.out_channels * out_len), y2(y1.size());
    kernels::serial::conv1d_forward(g, x.data(), w.data(), b.data(), y1);
    kernels::conv1d_forward(g, x.data(), w.data(), b.data(), y2);
    CHECK(y1 == y2);

    std::vector<double> gx1(x.numel(), 0.5), gx2(x.numel(), 0.5);
    kernels::serial::conv1d_backward_input(g, gy.data(), w.data(), gx1);
    kernels::conv1d_backward_input(g, gy.data(), w.data(), gx2);
    CHECK(gx1 == gx2);

    std::vector<double> gw1(w.numel()), gw2(w.numel()), gb1(b.numel()), gb2(b.numel());
    kernels::serial::conv1d_backward_weight(g, gy.data(), x.data(), gw1, gb1);
    kernels::conv1d_backward_weight(g, gy.data(), x.data(), gw2, gb2);
    CHECK(gw1 == gw2);
    CHECK(gb1 == gb2);

    const std::size_t m = 1 + rng() % 9, k = 1 + rng() % 9, n = 1 + rng() % 9;
    auto a = random_tensor({m * k}, rng);
    auto bt = random_tensor({n * k}, rng);
    std::vector<double> c1(m * n), c2(m * n);
    kernels::serial::matmul_nt(m, k, n, a.data(), bt.data(), c1);
    kernels::matmul_nt(m, k, n, a.data(), bt.data(), c2);
    CHECK(c1 == c2);
    auto bn = random_tensor({k * n}, rng);
    kernels::serial::matmul_nn(m, k, n, a.data(), bn.data(), c1);
    kernels::matmul_nn(m, k, n, a.data(), bn.data(), c2);
    CHECK(c1 == c2);
    auto at = random_tensor({k * m}, rng);
    kernels::serial::matmul_tn(m, k, n, at.data(), bn.data(), c1);
    kernels::matmul_tn(m, k, n, at.data(), bn.data(), c2);
    CHECK(c1 == c2);

    auto q = random_tensor({10 * k}, rng);
    auto book = random_tensor({7 * k}, rng);
    std::vector<std::int32_t> i1(10), i2(10);
    kernels::serial::nearest_rows(10, k, q.data(), 7, book.data(), i1);
    kernels::nearest_rows(10, k, q.data(), 7, book.data(), i2);
    CHECK(i1 == i2);
  }
}

TEST_CASE("checkpoint: round trip through f32 and shape validation on load") {
  nn::Rng rng(13);
  nn::Conv1d a(2, 3, 5, rng);
  nn::Conv1d b(2, 3, 5, rng);
  const auto path = std::filesystem::temp_directory_path() / "nacasr_test_ckpt.nacp";
  nn::write_checkpoint(path, nn::module_records(a, "m."));
  auto records = nn::read_checkpoint(path);
  REQUIRE(records.size() == 2);
  CHECK(records[0].name == "m.weight");
  nn::load_module(b, records, "m.");
  for (std::size_t i = 0; i < a.parameters()[0]->value().numel(); ++i) {
    CHECK(b.parameters()[0]->value()[i] ==
          static_cast<double>(static_cast<float>(a.parameters()[0]->value()[i])));
  }
  nn::Conv1d wrong(2, 4, 5, rng);
  CHECK_THROWS_AS(nn::load_module(wrong, records, "m."), nn::CheckpointError);

  auto bytes = nn::encode_checkpoint(records);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NACP");
  CHECK(bytes[4] == 1);
  bytes.pop_back();
  CHECK_THROWS_AS(nn::decode_checkpoint(bytes), nn::CheckpointError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(nn::decode_checkpoint(bytes), nn::CheckpointError);
  std::filesystem::remove(path);
}

TEST_CASE("adamw: one step moves parameters against the gradient") {
  nn::Parameter p("p", nn::Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
  nn::AdamW opt({&p}, {.beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.0});
  nn::backward(nn::sum(nn::square(p.var())));
  opt.step(0.1);
  // First Adam step has magnitude lr in the gradient's sign direction.
  CHECK(p.value()[0] == doctest::Approx(0.9));
  CHECK(p.value()[1] == doctest::Approx(-1.9));
  CHECK(p.value()[2] == doctest::Approx(0.4));
}
