#include <doctest.h>

#include <random>
#include <set>

#include "../support.hpp"
#include "mfpu/errors.hpp"
#include "mfpu/model.hpp"

using namespace mfpu;

namespace {

std::size_t conv_params(std::size_t cin, std::size_t cout, std::size_t m) { return cout * cin * m * m + cout; }

// Parameter census of the shared U-net body plus a 1x1 head on `head_in` channels.
std::size_t unet_census(std::size_t b, std::size_t head_in) {
  std::size_t total = 0, in = 2;
  for (std::size_t l = 1; l <= 4; ++l) {
    const std::size_t w = b << (l - 1);
    total += conv_params(in, w, 3) + conv_params(w, w, 3);
    in = w;
  }
  total += conv_params(in, 16 * b, 3) + conv_params(16 * b, 16 * b, 3);
  in = 16 * b;
  for (std::size_t l = 4; l >= 1; --l) {
    const std::size_t w = b << (l - 1);
    total += conv_params(in, w, 2) + conv_params(2 * w, w, 3) + conv_params(w, w, 3);
    in = w;
  }
  return total + conv_params(head_in, 2, 1);
}

}  // namespace

TEST_CASE("U-net shape contract at N=64, B=8") {
  auto model = build_unet<float>(64, 8, 1);
  std::mt19937_64 rng(0);
  auto x = testing::random_tensor<float>({2, 64, 64}, rng);
  ForwardTrace trace;
  auto y = model.forward(x, &trace);
  CHECK(y.shape() == Shape{2, 64, 64});
  CHECK(trace.bottleneck == Shape{128, 4, 4});
  REQUIRE(trace.encoder.size() == 4);
  REQUIRE(trace.decoder.size() == 4);
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(trace.encoder[l] == Shape{8u << l, 64u >> l, 64u >> l});
    CHECK(trace.decoder[l] == Shape{64u >> l, 8u << l, 8u << l});
  }
  CHECK(model.parameter_count() == unet_census(8, 8));
}

TEST_CASE("dilated U-net matches U-net in parameters and shapes") {
  auto plain = build_unet<double>(32, 4, 3);
  auto d1 = build_dilated_unet<double>(32, 4, 1, 3);
  auto d2 = build_dilated_unet<double>(32, 4, 2, 3);
  CHECK(d1.parameter_count() == plain.parameter_count());
  CHECK(d2.parameter_count() == plain.parameter_count());
  // Same seed and registration order: d=1 reproduces U-net exactly.
  std::mt19937_64 rng(9);
  auto x = testing::random_tensor({2, 32, 32}, rng);
  auto a = plain.forward(x);
  auto b = d1.forward(x);
  CHECK(testing::max_abs_diff(a.data(), b.data()) == 0.0);
  CHECK(d2.forward(x).shape() == a.shape());
  CHECK(ConvSpec::same(4, 4, 3, 2).effective_kernel() == 5);
}

TEST_CASE("MFP-Unet pyramid and parameter identity") {
  for (std::size_t b : {2u, 4u, 8u}) {
    auto dilated = build_dilated_unet<float>(32, b, 2, 0);
    auto mfp = build_mfp_unet<float>(32, b, 2, 0);
    std::size_t pyramid = 0;
    for (std::size_t i = 1; i <= 4; ++i) pyramid += 3 * 3 * (b << (4 - i)) * 16 + 16;
    CHECK(mfp.parameter_count() == dilated.parameter_count() + pyramid + (64 * 2 + 2) - (b * 2 + 2));
    CHECK(mfp.parameter_count() == unet_census(b, 64) + pyramid);
  }
  auto model = build_mfp_unet<float>(64, 8);
  std::mt19937_64 rng(1);
  ForwardTrace trace;
  auto y = model.forward(testing::random_tensor<float>({2, 64, 64}, rng), &trace);
  CHECK(trace.pyramid_concat == Shape{64, 64, 64});
  CHECK(y.shape() == Shape{2, 64, 64});
  CHECK(model.parameter("pyramid1.conv.weight").shape() == Shape{16, 64, 3, 3});
  CHECK(model.parameter("pyramid4.conv.weight").shape() == Shape{16, 8, 3, 3});
  CHECK(model.parameter("head.weight").shape() == Shape{2, 64, 1, 1});
  CHECK(model.parameter("up1.tconv.weight").shape() == Shape{128, 64, 2, 2});
}

TEST_CASE("parameter names are unique and stable across rebuilds") {
  for (auto arch : {Architecture::UNet, Architecture::DilatedUNet, Architecture::MfpUNet}) {
    ModelConfig cfg{arch, 16, 2, 2};
    auto a = Model<double>::build(cfg, 5);
    auto b = Model<double>::build(cfg, 5);
    std::set<std::string> names;
    REQUIRE(a.parameters().size() == b.parameters().size());
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
      names.insert(a.parameters()[i].name);
      CHECK(a.parameters()[i].name == b.parameters()[i].name);
      CHECK(testing::max_abs_diff(a.parameters()[i].tensor.data(), b.parameters()[i].tensor.data()) == 0.0);
    }
    CHECK(names.size() == a.parameters().size());
  }
}

TEST_CASE("invalid configurations are contract violations") {
  CHECK_THROWS_AS(build_unet<float>(40, 8), ContractViolation);
  CHECK_THROWS_AS(build_unet<float>(0, 8), ContractViolation);
  CHECK_THROWS_AS(build_mfp_unet<float>(64, 1), ContractViolation);
  CHECK_THROWS_AS(parse_architecture("deeplab"), ContractViolation);
  CHECK(parse_architecture("mfp-unet") == Architecture::MfpUNet);
  auto model = build_unet<float>(16, 2);
  CHECK_THROWS_AS(model.forward(Tensor32({2, 32, 32}, 0.0f)), ContractViolation);
  CHECK_THROWS_AS(model.forward(Tensor32({1, 16, 16}, 0.0f)), ContractViolation);
}

TEST_CASE("segment: dominant channel 0 gives an all-background mask") {
  auto model = build_mfp_unet<double>(16, 2, 2, 4);
  auto bias = model.parameter("head.bias");
  auto w = model.parameter("head.weight");
  for (auto& v : w.data()) v = 0.0;
  bias[0] = 1.0;
  bias[1] = -1.0;
  std::mt19937_64 rng(2);
  auto mask = model.segment(testing::random_tensor({2, 16, 16}, rng));
  CHECK(mask.size() == 256);
  for (auto v : mask) CHECK(v == 0);
}

TEST_CASE("segment: constructed head reproduces the sign map of one feature") {
  auto model = build_mfp_unet<double>(16, 2, 2, 8);
  auto w = model.parameter("head.weight");
  auto bias = model.parameter("head.bias");
  for (auto& v : w.data()) v = 0.0;
  bias[0] = bias[1] = 0.0;
  std::mt19937_64 rng(3);
  for (std::size_t feature : {0u, 17u, 63u}) {
    for (auto& v : w.data()) v = 0.0;
    w[64 + feature] = 1.0;
    auto x = testing::random_tensor({2, 16, 16}, rng);
    Tensor64 feats;
    {
      NoGradGuard guard;
      feats = model.features(x);
    }
    auto mask = model.segment(x);
    std::size_t positives = 0;
    for (std::size_t p = 0; p < 256; ++p) {
      const std::uint8_t expect = feats[feature * 256 + p] > 0.0 ? 1 : 0;
      CHECK(mask[p] == expect);
      CHECK(mask[p] <= 1);
      positives += expect;
    }
    CHECK(positives <= 256);
  }
}

TEST_CASE("segment is a pure function of the input") {
  auto model = build_dilated_unet<float>(16, 2, 2, 11);
  std::mt19937_64 rng(12);
  auto x = testing::random_tensor<float>({2, 16, 16}, rng);
  CHECK(model.segment(x) == model.segment(x));
}

TEST_CASE("cast preserves topology and values") {
  auto m = build_mfp_unet<double>(16, 2, 2, 21);
  auto f = m.cast<float>();
  REQUIRE(f.parameters().size() == m.parameters().size());
  for (std::size_t i = 0; i < f.parameters().size(); ++i) {
    CHECK(f.parameters()[i].name == m.parameters()[i].name);
    CHECK(f.parameters()[i].tensor[0] == static_cast<float>(m.parameters()[i].tensor[0]));
  }
}

TEST_CASE("xavier-uniform initialisation bounds and zero biases") {
  auto m = build_unet<double>(16, 2, 0);
  for (const auto& p : m.parameters()) {
    if (p.name.ends_with(".bias")) {
      for (double v : p.tensor.data()) CHECK(v == 0.0);
      continue;
    }
    const auto& s = p.tensor.shape();
    const bool transposed = p.name.ends_with("tconv.weight");
    const double cin = static_cast<double>(transposed ? s[0] : s[1]);
    const double cout = static_cast<double>(transposed ? s[1] : s[0]);
    const double limit = std::sqrt(6.0 / ((cin + cout) * s[2] * s[3]));
    for (double v : p.tensor.data()) CHECK(std::abs(v) <= limit);
  }
}
