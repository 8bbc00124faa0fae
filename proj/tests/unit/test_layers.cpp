#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "../support.hpp"
#include "mfpu/errors.hpp"
#include "mfpu/layers.hpp"

using namespace mfpu;
using testing::random_tensor;

namespace {

Tensor64 no_bias() { return Tensor64{}; }

// Weighted sum so that every output coordinate gets a distinct upstream gradient.
Tensor64 probe(const Tensor64& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto weights = random_tensor(y.shape(), rng);
  return sum(mul(y, weights));
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  std::mt19937_64 rng(0);
  auto x = random_tensor({1, 5, 4}, rng);
  Tensor64 w({1, 1, 1, 1}, 1.0);
  Tensor64 b({1}, 0.0);
  auto y = conv2d(x, w, b, ConvSpec{1, 1, 1, 1, 1, 0});
  REQUIRE(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d: 2x2 diagonal kernel on [[1,2],[3,4]]") {
  Tensor64 x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor64 w({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 1});
  auto y = conv2d(x, w, no_bias(), ConvSpec{1, 1, 2, 1, 1, 0});
  REQUIRE(y.shape() == Shape{1, 1, 1});
  CHECK(y[0] == 5.0);
}

TEST_CASE("conv2d: dilated 3x3 on 5x5 ones hits nine ones") {
  Tensor64 x({1, 5, 5}, 1.0);
  Tensor64 w({1, 1, 3, 3}, 1.0);
  auto y = conv2d(x, w, no_bias(), ConvSpec{1, 1, 3, 1, 2, 0});
  REQUIRE(y.shape() == Shape{1, 1, 1});
  CHECK(y[0] == 9.0);
}

TEST_CASE("conv2d: output extent formula and contract errors") {
  ConvSpec spec{2, 3, 3, 2, 2, 1};
  CHECK(spec.output_extent(9) == (9 + 2 - 2 * 2 - 1) / 2 + 1);
  CHECK(ConvSpec::same(4, 4, 3, 2).output_extent(8) == 8);
  CHECK_THROWS_AS(ConvSpec({1, 1, 3, 1, 3, 0}).output_extent(6), ContractViolation);
  Tensor64 x({2, 6, 6}, 1.0);
  Tensor64 w({1, 3, 3, 3}, 1.0);
  CHECK_THROWS_AS(conv2d(x, w, no_bias(), ConvSpec{3, 1, 3, 1, 1, 0}), ContractViolation);
}

TEST_CASE("conv2d matches direct summation for random geometry") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t cin = 1 + rng() % 3, cout = 1 + rng() % 3, m = 1 + rng() % 3;
    const std::size_t stride = 1 + rng() % 2, dil = 1 + rng() % 2, pad = rng() % 3;
    auto x = random_tensor({cin, 7, 6}, rng);
    auto w = random_tensor({cout, cin, m, m}, rng);
    auto y = conv2d(x, w, no_bias(), ConvSpec{cin, cout, m, stride, dil, pad});
    std::size_t ho = 0, wo = 0;
    auto expect = testing::brute_conv2d({x.data().begin(), x.data().end()}, cin, 7, 6,
                                        {w.data().begin(), w.data().end()}, cout, m, stride, dil, pad, ho, wo);
    REQUIRE(y.shape() == Shape{cout, ho, wo});
    CHECK(testing::max_abs_diff(y.data(), expect) < 1e-12);
  }
}

TEST_CASE("dilated conv equals plain conv with a zero-inflated kernel") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2, m = 3, inflated = d * (m - 1) + 1;
    auto x = random_tensor({2, 8, 8}, rng);
    auto w = random_tensor({3, 2, m, m}, rng);
    std::vector<double> wz(3 * 2 * inflated * inflated, 0.0);
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t b = 0; b < m; ++b)
            wz[((o * 2 + c) * inflated + a * d) * inflated + b * d] = w[((o * 2 + c) * m + a) * m + b];
    Tensor64 wzt({3, 2, inflated, inflated}, wz);
    auto dilated = conv2d(x, w, no_bias(), ConvSpec::same(2, 3, m, d));
    auto plain = conv2d(x, wzt, no_bias(), ConvSpec::same(2, 3, inflated, 1));
    REQUIRE(dilated.shape() == plain.shape());
    CHECK(testing::max_abs_diff(dilated.data(), plain.data()) < 1e-12);
  }
}

TEST_CASE("relu values and subgradient") {
  auto x = Tensor64::parameter({3}, {-1.0, 3.0, 0.0});
  auto y = relu(x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 3.0);
  CHECK(y[2] == 0.0);
  auto g = Tensor64::parameter({2}, {-2.0, 5.0});
  backward(sum(relu(g)));
  CHECK(g.grad()[0] == 0.0);
  CHECK(g.grad()[1] == 1.0);
}

TEST_CASE("max_pool2d examples") {
  Tensor64 x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(max_pool2d(x)[0] == 4.0);

  auto tie = Tensor64::parameter({1, 2, 2}, {5, 5, 5, 5});
  auto pooled = max_pool2d(tie);
  CHECK(pooled[0] == 5.0);
  backward(sum(pooled));
  CHECK(tie.grad()[0] == 1.0);
  CHECK(tie.grad()[1] == 0.0);
  CHECK(tie.grad()[2] == 0.0);
  CHECK(tie.grad()[3] == 0.0);

  std::vector<double> ramp(16);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  auto r = max_pool2d(Tensor64({1, 4, 4}, ramp));
  REQUIRE(r.shape() == Shape{1, 2, 2});
  CHECK(r[0] == 5.0);
  CHECK(r[1] == 7.0);
  CHECK(r[2] == 13.0);
  CHECK(r[3] == 15.0);

  CHECK_THROWS_AS(max_pool2d(Tensor64({1, 3, 4}, 0.0)), ContractViolation);
}

TEST_CASE("max_pool2d gradient has exactly one nonzero per block") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = testing::random_parameter({3, 6, 8}, rng);
    backward(probe(max_pool2d(x), 1000 + trial));
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          int nonzero = 0;
          for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) nonzero += x.grad()[(c * 6 + 2 * i + a) * 8 + 2 * j + b] != 0.0;
          CHECK(nonzero == 1);
        }
  }
}

TEST_CASE("transposed_conv2d examples") {
  Tensor64 v({1, 1, 1}, 3.0);
  Tensor64 k({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const ConvSpec up{1, 1, 2, 2, 1, 0};
  auto y = transposed_conv2d(v, k, no_bias(), up);
  REQUIRE(y.shape() == Shape{1, 2, 2});
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 6.0);
  CHECK(y[2] == 9.0);
  CHECK(y[3] == 12.0);

  auto ones = transposed_conv2d(Tensor64({1, 2, 2}, 1.0), Tensor64({1, 1, 2, 2}, 1.0), no_bias(), up);
  REQUIRE(ones.shape() == Shape{1, 4, 4});
  for (double e : ones.data()) CHECK(e == 1.0);

  CHECK_THROWS_AS(transposed_conv2d(Tensor64({2, 2, 2}, 1.0), k, no_bias(), up), ContractViolation);
}

TEST_CASE("transposed_conv2d is the adjoint of the strided conv2d") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t cx = 1 + rng() % 3, cy = 1 + rng() % 3;
    auto x = random_tensor({cx, 6, 6}, rng);
    auto y = random_tensor({cy, 3, 3}, rng);
    auto w = random_tensor({cy, cx, 2, 2}, rng);
    auto cx_y = conv2d(x, w, no_bias(), ConvSpec{cx, cy, 2, 2, 1, 0});
    auto ct_y = transposed_conv2d(y, w, no_bias(), ConvSpec{cy, cx, 2, 2, 1, 0});
    REQUIRE(cx_y.shape() == y.shape());
    REQUIRE(ct_y.shape() == x.shape());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) lhs += cx_y[i] * y[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += x[i] * ct_y[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("upsample_nearest examples") {
  std::mt19937_64 rng(2);
  auto x = random_tensor({2, 3, 2}, rng);
  auto same = upsample_nearest(x, 1);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(same[i] == x[i]);

  auto up = upsample_nearest(Tensor64({1, 1, 2}, std::vector<double>{1, 2}), 2);
  REQUIRE(up.shape() == Shape{1, 2, 4});
  const double expect[] = {1, 1, 2, 2, 1, 1, 2, 2};
  for (std::size_t i = 0; i < 8; ++i) CHECK(up[i] == expect[i]);

  auto big = upsample_nearest(x, 3);
  double s_in = 0, s_out = 0;
  for (double v : x.data()) s_in += v;
  for (double v : big.data()) s_out += v;
  CHECK(s_out == doctest::Approx(9.0 * s_in).epsilon(1e-12));
  CHECK_THROWS_AS(upsample_nearest(x, 0), ContractViolation);
}

TEST_CASE("concat_channels examples") {
  std::mt19937_64 rng(4);
  auto a = random_tensor({2, 3, 3}, rng);
  auto single = concat_channels<double>({a});
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(single[i] == a[i]);

  std::vector<Tensor64> parts;
  for (int i = 0; i < 4; ++i) parts.push_back(random_tensor({16, 4, 4}, rng));
  CHECK(concat_channels(parts).shape() == Shape{64, 4, 4});

  auto b = random_tensor({3, 3, 3}, rng);
  auto ab = concat_channels<double>({a, b});
  auto a2 = slice_channels(ab, 0, 2);
  auto b2 = slice_channels(ab, 2, 3);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a2[i] == a[i]);
  for (std::size_t i = 0; i < b.numel(); ++i) CHECK(b2[i] == b[i]);

  CHECK_THROWS_AS(concat_channels<double>({a, random_tensor({1, 3, 4}, rng)}), ContractViolation);
}

TEST_CASE("softmax cross-entropy examples") {
  std::vector<std::uint8_t> mask(9);
  for (std::size_t i = 0; i < 9; ++i) mask[i] = i % 2;
  Tensor64 balanced({2, 3, 3}, 0.7);
  CHECK(softmax_cross_entropy(balanced, std::span<const std::uint8_t>(mask)).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));

  std::vector<std::uint8_t> one = {1};
  Tensor64 confident({2, 1, 1}, std::vector<double>{-500.0, 500.0});
  CHECK(softmax_cross_entropy(confident, std::span<const std::uint8_t>(one)).item() < 1e-300);

  Tensor64 logits({2, 1, 1}, std::vector<double>{0.0, 1.0});
  const double loss = softmax_cross_entropy(logits, std::span<const std::uint8_t>(one)).item();
  CHECK(loss == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-14));
  CHECK(loss == doctest::Approx(0.3133).epsilon(1e-4));

  std::vector<std::uint8_t> bad = {2};
  CHECK_THROWS_AS(softmax_cross_entropy(logits, std::span<const std::uint8_t>(bad)), ContractViolation);
}

TEST_CASE("softmax cross-entropy is non-negative and ln2 only when balanced") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto logits = random_tensor({2, 4, 4}, rng, -3.0, 3.0);
    std::vector<std::uint8_t> mask(16);
    for (auto& m : mask) m = rng() % 2;
    const double loss = softmax_cross_entropy(logits, std::span<const std::uint8_t>(mask)).item();
    CHECK(loss >= 0.0);
    CHECK(std::abs(loss - std::log(2.0)) > 1e-9);
  }
}

TEST_CASE("every layer primitive passes grad_check over 20 seeds") {
  const ConvSpec dilated = ConvSpec::same(2, 3, 3, 2);
  const ConvSpec strided{2, 3, 3, 2, 1, 1};
  const ConvSpec up{3, 2, 2, 2, 1, 0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto x = random_tensor({2, 6, 6}, rng);
    auto w = random_tensor({3, 2, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    auto xt = random_tensor({3, 3, 3}, rng);
    auto wt = random_tensor({3, 2, 2, 2}, rng);
    auto bt = random_tensor({2}, rng);
    std::vector<std::uint8_t> mask(36);
    for (auto& m : mask) m = rng() % 2;
    const std::span<const std::uint8_t> target(mask);

    auto conv_of = [&](const ConvSpec& spec) {
      return [&, spec](const Tensor64&) { return probe(conv2d(x, w, b, spec), seed); };
    };
    double worst = 0.0;
    worst = std::max(worst, grad_check(conv_of(dilated), x, 1e-6));
    worst = std::max(worst, grad_check(conv_of(dilated), w, 1e-6));
    worst = std::max(worst, grad_check(conv_of(dilated), b, 1e-6));
    worst = std::max(worst, grad_check(conv_of(strided), x, 1e-6));
    worst = std::max(worst, grad_check(conv_of(strided), w, 1e-6));
    auto tconv = [&](const Tensor64&) { return probe(transposed_conv2d(xt, wt, bt, up), seed); };
    worst = std::max(worst, grad_check(tconv, xt, 1e-6));
    worst = std::max(worst, grad_check(tconv, wt, 1e-6));
    worst = std::max(worst, grad_check(tconv, bt, 1e-6));
    worst = std::max(worst, grad_check([&](const Tensor64& t) { return probe(relu(t), seed); }, x, 1e-6));
    worst = std::max(worst, grad_check([&](const Tensor64& t) { return probe(max_pool2d(t), seed); }, x, 1e-6));
    worst = std::max(worst,
                     grad_check([&](const Tensor64& t) { return probe(upsample_nearest(t, 2), seed); }, x, 1e-6));
    worst = std::max(worst, grad_check(
                                [&](const Tensor64& t) {
                                  return probe(concat_channels<double>({t, relu(t), t}), seed);
                                },
                                x, 1e-6));
    worst = std::max(worst,
                     grad_check([&](const Tensor64& t) { return probe(slice_channels(t, 1, 1), seed); }, x, 1e-6));
    worst = std::max(worst, grad_check(
                                [&](const Tensor64& t) {
                                  return softmax_cross_entropy(slice_channels(t, 0, 2), target);
                                },
                                x, 1e-6));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("argmax_channels picks the larger logit, channel 0 on ties") {
  Tensor64 logits({2, 1, 3}, std::vector<double>{1.0, 0.0, 2.0, 0.5, 0.0, 3.0});
  auto mask = argmax_channels(logits);
  CHECK(mask == std::vector<std::uint8_t>{0, 0, 1});
}
