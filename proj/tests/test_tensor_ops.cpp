#include <catch2/catch_amalgamated.hpp>

#include "rgi/ops.hpp"
#include "test_util.hpp"

using namespace rgi;
using rgitest::grad_check;
using rgitest::randn_d;

TEST_CASE("rng is deterministic and fork gives independent streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(42);
  auto c1 = c.fork(1);
  Rng d(42);
  auto d1 = d.fork(1);
  REQUIRE(c1.next_u64() == d1.next_u64());
  Rng e(42);
  auto e2 = e.fork(2);
  REQUIRE(c1.next_u64() != e2.next_u64());
}

TEST_CASE("rng normal moments are sane") {
  Rng rng(7);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  REQUIRE(std::abs(s / n) < 0.03);
  REQUIRE(std::abs(s2 / n - 1.0) < 0.05);
}

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(1);
  auto a = randn_d({3, 4}, rng);
  auto b = randn_d({3, 4}, rng);
  REQUIRE(grad_check({a, b}, [&] { return sum_all(mul(add(a, b), sub(a, b))); }) < 1e-6);
  REQUIRE(grad_check({a, b}, [&] {
            return sum_all(div(a, add_scalar(square(b), 2.0)));
          }) < 1e-6);
  REQUIRE(grad_check({a}, [&] {
            return mean_all(sqrt_t(add_scalar(square(a), 1.0)));
          }) < 1e-6);
  REQUIRE(grad_check({a}, [&] { return sum_all(leaky_relu(a, 0.2)); }) < 1e-5);
  REQUIRE(grad_check({a}, [&] { return sum_all(sigmoid_t(a)); }) < 1e-6);
  REQUIRE(grad_check({a, b}, [&] { return sum_all(add_scaled(a, b, 0.37)); }) < 1e-6);
  REQUIRE(grad_check({a}, [&] { return mul_scalar(sum_all(a), -1.5); }) < 1e-6);
}

TEST_CASE("where_mask selects and routes gradients per branch") {
  Rng rng(2);
  auto a = randn_d({2, 2, 3}, rng);
  auto b = randn_d({2, 2, 3}, rng);
  std::vector<uint8_t> m = {1, 0, 1, 1, 0, 0};
  auto out = where_mask(m, a, b);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 6; ++i)
      REQUIRE(out.data()[c * 6 + i] == (m[i] ? a.data()[c * 6 + i] : b.data()[c * 6 + i]));
  REQUIRE(grad_check({a, b}, [&] { return sum_all(square(where_mask(m, a, b))); }) < 1e-6);
}

TEST_CASE("matmul, linear, transpose, softmax, gather match finite differences") {
  Rng rng(3);
  auto a = randn_d({3, 5}, rng);
  auto b = randn_d({5, 4}, rng);
  REQUIRE(grad_check({a, b}, [&] { return sum_all(square(matmul(a, b))); }) < 1e-6);

  auto x = randn_d({5}, rng);
  auto w = randn_d({4, 5}, rng);
  auto bias = randn_d({4}, rng);
  REQUIRE(grad_check({x, w, bias}, [&] { return sum_all(square(linear(x, w, bias))); }) <
          1e-6);

  REQUIRE(grad_check({a}, [&] { return sum_all(square(transpose2d(a))); }) < 1e-6);

  auto s = randn_d({3, 6}, rng);
  auto weights = randn_d({3, 6}, rng);
  REQUIRE(grad_check({s}, [&] { return sum_all(mul(softmax_rows(s), weights)); }) < 1e-5);

  std::vector<int> idx = {2, 0, 2};
  REQUIRE(grad_check({a}, [&] { return sum_all(square(gather_rows(a, idx))); }) < 1e-6);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(4);
  auto s = randn_d({7, 9}, rng, 3.0);
  auto y = softmax_rows(s);
  for (int i = 0; i < 7; ++i) {
    double sum = 0;
    for (int j = 0; j < 9; ++j) sum += y.data()[i * 9 + j];
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("conv2d matches a direct convolution oracle") {
  Rng rng(5);
  auto x = randn_d({2, 5, 5}, rng);
  auto w = randn_d({3, 2, 3, 3}, rng);
  auto b = randn_d({3}, rng);
  auto y = conv2d(x, w, b, 1, 1);
  REQUIRE(y.shape() == Shape{3, 5, 5});
  // direct nested-loop oracle
  for (int o = 0; o < 3; ++o)
    for (int yy = 0; yy < 5; ++yy)
      for (int xx = 0; xx < 5; ++xx) {
        double acc = b.data()[o];
        for (int c = 0; c < 2; ++c)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int iy = yy + dy, ix = xx + dx;
              if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
              acc += x.data()[(c * 5 + iy) * 5 + ix] *
                     w.data()[((o * 2 + c) * 3 + dy + 1) * 3 + dx + 1];
            }
        REQUIRE(y.data()[(o * 5 + yy) * 5 + xx] == Catch::Approx(acc).margin(1e-12));
      }
}

TEST_CASE("conv2d gradients (stride 1 and 2)") {
  Rng rng(6);
  auto x = randn_d({2, 6, 6}, rng);
  auto w = randn_d({3, 2, 3, 3}, rng);
  auto b = randn_d({3}, rng);
  REQUIRE(grad_check({x, w, b}, [&] { return mean_all(square(conv2d(x, w, b, 1, 1))); }) <
          1e-5);
  REQUIRE(grad_check({x, w, b}, [&] { return mean_all(square(conv2d(x, w, b, 2, 1))); }) <
          1e-5);
}

TEST_CASE("masked_conv2d equals conv-then-mask oracle and keeps regions local") {
  Rng rng(7);
  const int h = 4, w = 4;
  auto x = randn_d({2, h, w}, rng);
  auto k0 = randn_d({3, 2, 3, 3}, rng);
  auto k1 = randn_d({3, 2, 3, 3}, rng);
  auto bias = randn_d({3}, rng);
  std::vector<int> labels = {0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1};

  auto y = masked_conv2d(x, {k0, k1}, {0, 1}, labels, bias);

  // oracle: run both full-frame convolutions, then composite by label
  auto y0 = conv2d(x, k0, bias, 1, 1);
  auto y1 = conv2d(x, k1, bias, 1, 1);
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < h * w; ++p) {
      const double want = labels[p] == 0 ? y0.data()[c * h * w + p] : y1.data()[c * h * w + p];
      REQUIRE(y.data()[c * h * w + p] == Catch::Approx(want).margin(1e-12));
    }

  // locality: perturbing kernel 1 must not change region-0 pixels
  k1.values()[5] += 0.5;
  auto y2 = masked_conv2d(x, {k0, k1}, {0, 1}, labels, bias);
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < h * w; ++p)
      if (labels[p] == 0)
        REQUIRE(y2.data()[c * h * w + p] == y.data()[c * h * w + p]);

  REQUIRE(grad_check({x, k0, k1, bias}, [&] {
            return mean_all(square(masked_conv2d(x, {k0, k1}, {0, 1}, labels, bias)));
          }) < 1e-5);
}

TEST_CASE("modulate scales channels and demodulates filters to unit norm") {
  Rng rng(8);
  auto w = randn_d({4, 3, 3, 3}, rng);
  auto s = randn_d({3}, rng, 0.5);
  for (auto& v : s.values()) v += 1.0;

  auto wm = modulate(w, s, true);
  for (int o = 0; o < 4; ++o) {
    double norm2 = 0;
    for (int i = 0; i < 27; ++i) {
      const double v = wm.data()[o * 27 + i];
      norm2 += v * v;
    }
    REQUIRE(std::sqrt(norm2) == Catch::Approx(1.0).margin(1e-3));
  }

  // without demodulation this is a plain per-input-channel scale
  auto wn = modulate(w, s, false);
  for (int o = 0; o < 4; ++o)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 9; ++k)
        REQUIRE(wn.data()[(o * 3 + c) * 9 + k] ==
                Catch::Approx(w.data()[(o * 3 + c) * 9 + k] * s.data()[c]).margin(1e-12));

  REQUIRE(grad_check({w, s}, [&] {
            Rng r2(99);
            auto probe = randn_d({4, 3, 3, 3}, r2);
            return sum_all(mul(modulate(w, s, true), probe));
          }) < 1e-5);
  REQUIRE(grad_check({w, s}, [&] {
            Rng r2(99);
            auto probe = randn_d({4, 3, 3, 3}, r2);
            return sum_all(mul(modulate(w, s, false), probe));
          }) < 1e-6);
}

TEST_CASE("scale invariance of demodulated weights") {
  // scaling the post-affine style by c > 0 leaves the demodulated kernel
  // unchanged in the eps -> 0 limit
  Rng rng(9);
  auto w = randn_d({2, 2, 3, 3}, rng);
  auto s = randn_d({2}, rng);
  auto s2 = mul_scalar(s, 3.0);
  auto a = modulate(w, s, true, 1e-16);
  auto b = modulate(w, s2, true, 1e-16);
  for (int i = 0; i < a.numel(); ++i)
    REQUIRE(a.data()[i] == Catch::Approx(b.data()[i]).margin(1e-9));
}

TEST_CASE("modulate hand arithmetic: 1x1x1x1 kernel") {
  auto w = Tensor<double>::from({1, 1, 1, 1}, {2.0});
  auto s = Tensor<double>::from({1}, {3.0});
  auto y = modulate(w, s, true, 0.0);
  REQUIRE(y.data()[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("resampling ops match finite differences") {
  Rng rng(10);
  auto x = randn_d({2, 4, 4}, rng);
  REQUIRE(grad_check({x}, [&] { return mean_all(square(upsample_bilinear2x(x))); }) <
          1e-5);
  REQUIRE(grad_check({x}, [&] { return mean_all(square(avgpool2x(x))); }) < 1e-6);
  REQUIRE(grad_check({x}, [&] { return sum_all(square(global_avg_pool(x))); }) < 1e-6);

  // constant field maps to constant field under bilinear upsampling
  auto c = Tensor<double>::full({1, 3, 3}, 0.7);
  auto up = upsample_bilinear2x(c);
  for (int i = 0; i < up.numel(); ++i) REQUIRE(up.data()[i] == Catch::Approx(0.7));
}

TEST_CASE("region_mean averages the subset and ignores empty regions") {
  Rng rng(11);
  auto x = randn_d({3, 2, 2}, rng);
  std::vector<int> pix = {0, 3};
  auto m = region_mean(x, pix);
  for (int c = 0; c < 3; ++c)
    REQUIRE(m.data()[c] ==
            Catch::Approx(0.5 * (x.data()[c * 4 + 0] + x.data()[c * 4 + 3])));
  auto z = region_mean(x, {});
  for (int c = 0; c < 3; ++c) REQUIRE(z.data()[c] == 0.0);
  REQUIRE(grad_check({x}, [&] { return sum_all(square(region_mean(x, pix))); }) < 1e-6);
}

TEST_CASE("bias, noise, slicing, concat gradients") {
  Rng rng(12);
  auto x = randn_d({3, 2, 2}, rng);
  auto b = randn_d({3}, rng);
  REQUIRE(grad_check({x, b}, [&] { return sum_all(square(add_channel_bias(x, b))); }) <
          1e-6);

  std::vector<double> noise(4);
  for (auto& v : noise) v = rng.normal();
  auto gain = randn_d({1}, rng);
  REQUIRE(grad_check({x, gain}, [&] { return sum_all(square(add_noise(x, noise, gain))); }) <
          1e-6);

  auto a = randn_d({6}, rng);
  REQUIRE(grad_check({a}, [&] { return sum_all(square(slice_flat(a, 2, 3))); }) < 1e-6);
  auto c = randn_d({4}, rng);
  REQUIRE(grad_check({a, c}, [&] {
            return sum_all(square(concat_flat<double>({a, c})));
          }) < 1e-6);
  auto i1 = randn_d({2, 3, 3}, rng);
  auto i2 = randn_d({1, 3, 3}, rng);
  REQUIRE(grad_check({i1, i2}, [&] {
            return sum_all(square(concat_channels<double>({i1, i2})));
          }) < 1e-6);
}

TEST_CASE("cosine similarity and softplus") {
  Rng rng(13);
  auto a = randn_d({8}, rng);
  auto b = randn_d({8}, rng);
  REQUIRE(cosine_similarity(a, a).item() == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(grad_check({a, b}, [&] { return cosine_similarity(a, b); }) < 1e-5);
  REQUIRE(grad_check({a}, [&] { return softplus_mean(a); }) < 1e-6);
  auto zero = Tensor<double>::zeros({4});
  REQUIRE(softplus_mean(zero).item() == Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("backward accumulates across reuse of a node") {
  auto x = Tensor<double>::from({1}, {3.0}).set_requires_grad(true);
  auto y = mul(x, x);  // x^2, dy/dx = 6
  auto z = add(y, x);  // x^2 + x, dz/dx = 7
  z.backward();
  REQUIRE(x.grad()[0] == Catch::Approx(7.0));
}

TEST_CASE("detach cuts the graph") {
  auto x = Tensor<double>::from({1}, {2.0}).set_requires_grad(true);
  auto y = mul(x, x);
  auto d = y.detach();
  REQUIRE_FALSE(d.requires_grad());
  auto z = mul(d, x);
  z.backward();
  REQUIRE(x.grad()[0] == Catch::Approx(4.0));  // only the direct factor
}
