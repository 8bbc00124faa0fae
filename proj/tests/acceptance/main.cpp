// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "../geometry_oracles.hpp"
#include "../metric_oracles.hpp"
#include "../scratch.hpp"
#include "../support.hpp"
#include "mfpu/checkpoint.hpp"
#include "mfpu/data.hpp"
#include "mfpu/geometry.hpp"
#include "mfpu/layers.hpp"
#include "mfpu/measure.hpp"
#include "mfpu/metrics.hpp"
#include "mfpu/model.hpp"
#include "mfpu/pipeline.hpp"
#include "mfpu/stats.hpp"

using namespace mfpu;
using testing::random_tensor;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

class Gate {
 public:
  void run(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < budget_seconds;
    const bool pass = out.ok && in_time;
    failures_ += !pass;
    std::printf("%s %s: %s [%.2f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), seconds,
                budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Tensor64 probe(const Tensor64& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto weights = random_tensor(y.shape(), rng);
  return sum(mul(y, weights));
}

// Nonzero biases, so the check runs at a point where ReLU is differentiable.
void randomize_biases(const Model<double>& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (const auto& p : model.parameters())
    if (p.name.ends_with(".bias")) {
      Tensor64 t = p.tensor;
      for (double& v : t.data()) v = u(rng);
    }
}

Outcome anova_reproduction() {
  const auto t = anova_from_sums(3.524, 3, 2.198, 12);
  const bool ok = std::abs(t.ms_between - 1.1747) <= 0.005 && std::abs(t.f - 6.41) <= 0.02 && std::abs(t.p - 0.0077) <= 0.0005;
  return {ok, fmt("MS_b %.4f, MS_w %.4f, F %.4f, p %.5f", t.ms_between, t.ms_within, t.f, t.p)};
}

Outcome bland_altman_identities() {
  struct Row {
    const char* name;
    double low, high, rpc;
  };
  const Row rows[] = {{"volume", -24.28, 19.35, 21.81}, {"area", -4.02, 3.4, 3.71}, {"length", -0.63, 0.66, 0.65}, {"EF", -14.79, 13.01, 13.9}};
  // Standardized series: mean 0, sample SD 1.
  std::vector<double> z = {-1.5, -0.7, -0.2, 0.1, 0.4, 0.9, 1.0};
  const double zm = mean(z), zs = sample_sd(z);
  for (double& v : z) v = (v - zm) / zs;

  Outcome out;
  for (const auto& r : rows) {
    const double bias = (r.low + r.high) / 2;
    const double sd = (r.high - r.low) / 2 / 1.96;
    std::vector<double> manual, automatic;
    for (std::size_t i = 0; i < z.size(); ++i) {
      manual.push_back(50.0 + 3.0 * static_cast<double>(i));
      automatic.push_back(manual.back() + bias + sd * z[i]);
    }
    const auto ba = bland_altman(automatic, manual);
    const double half_width = (ba.loa_high - ba.loa_low) / 2;
    const bool ok = std::abs(ba.rpc - r.rpc) <= 0.01 && std::abs(half_width - ba.rpc) <= 1e-9 &&
                    std::abs(ba.loa_low - r.low) <= 1e-9 && std::abs(ba.loa_high - r.high) <= 1e-9;
    out.ok = out.ok && ok;
    out.detail += fmt("%s%s RPC %.3f (target %.2f)", out.detail.empty() ? "" : ", ", r.name, ba.rpc, r.rpc);
  }
  return out;
}

Outcome gradient_suite() {
  constexpr int kSeeds = 20;
  double worst_layer = 0, worst_model = 0;
  const ConvSpec dilated = ConvSpec::same(2, 3, 3, 2);
  const ConvSpec strided{2, 3, 3, 2, 1, 1};
  const ConvSpec up{3, 2, 2, 2, 1, 0};
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    auto x = random_tensor({2, 6, 6}, rng);
    auto w = random_tensor({3, 2, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    auto xt = random_tensor({3, 3, 3}, rng);
    auto wt = random_tensor({3, 2, 2, 2}, rng);
    auto bt = random_tensor({2}, rng);
    std::vector<std::uint8_t> mask(36);
    for (auto& m : mask) m = rng() % 2;
    const std::span<const std::uint8_t> target(mask);
    const auto check = [&](const std::function<Tensor64(const Tensor64&)>& f, const Tensor64& theta) {
      worst_layer = std::max(worst_layer, grad_check(f, theta, 1e-6));
    };
    for (const ConvSpec* spec : {&dilated, &strided}) {
      const auto f = [&, spec](const Tensor64&) { return probe(conv2d(x, w, b, *spec), seed); };
      check(f, x);
      check(f, w);
      check(f, b);
    }
    const auto tconv = [&](const Tensor64&) { return probe(transposed_conv2d(xt, wt, bt, up), seed); };
    check(tconv, xt);
    check(tconv, wt);
    check(tconv, bt);
    check([&](const Tensor64& t) { return probe(relu(t), seed); }, x);
    check([&](const Tensor64& t) { return probe(max_pool2d(t), seed); }, x);
    check([&](const Tensor64& t) { return probe(upsample_nearest(t, 2), seed); }, x);
    check([&](const Tensor64& t) { return probe(concat_channels<double>({t, relu(t), t}), seed); }, x);
    check([&](const Tensor64& t) { return probe(slice_channels(t, 1, 1), seed); }, x);
    check([&](const Tensor64& t) { return softmax_cross_entropy(slice_channels(t, 0, 2), target); }, x);
  }

  for (auto arch : {Architecture::UNet, Architecture::DilatedUNet, Architecture::MfpUNet}) {
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const auto model = Model<double>::build({arch, 16, 2, 2}, seed);
      std::mt19937_64 rng(seed);
      randomize_biases(model, rng);
      auto input = random_tensor({2, 16, 16}, rng, 0.0, 1.0);
      std::vector<std::uint8_t> mask(256);
      for (auto& m : mask) m = rng() % 2;
      const auto loss = [&](const Tensor64&) { return softmax_cross_entropy(model.forward(input), std::span<const std::uint8_t>(mask)); };
      GradCheckOptions opts{12, seed};
      for (const auto& p : model.parameters()) worst_model = std::max(worst_model, grad_check(loss, p.tensor, 1e-7, opts));
      worst_model = std::max(worst_model, grad_check(loss, input, 1e-7, GradCheckOptions{48, seed}));
    }
  }
  const double worst = std::max(worst_layer, worst_model);
  return {worst < 1e-4, fmt("%d seeds, max relative error %.2e (primitives), %.2e (architectures)", kSeeds, worst_layer, worst_model)};
}

Polygon foreground(const GrayImage& m) {
  Polygon pts;
  for (std::size_t y = 0; y < m.height; ++y)
    for (std::size_t x = 0; x < m.width; ++x)
      if (m.at(x, y)) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
  return pts;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0, pairs = 0;
  double worst_identity = 0;
  while (pairs < 200) {
    const std::size_t w = 1 + rng() % 32, h = 1 + rng() % 32;
    std::bernoulli_distribution pa((rng() % 90 + 5) / 100.0), pb((rng() % 90 + 5) / 100.0);
    GrayImage a(w, h), b(w, h);
    for (auto& p : a.pixels) p = pa(rng);
    for (auto& p : b.pixels) p = pb(rng);
    const auto fa = foreground(a), fb = foreground(b);
    if (fa.empty() || fb.empty()) continue;
    ++pairs;
    const double d = dice(a, b), j = jaccard(a, b);
    mismatches += d != testing::brute_dice(a, b);
    mismatches += j != testing::brute_jaccard(a, b);
    mismatches += hausdorff(fa, fb) != testing::brute_hausdorff(fa, fb);
    mismatches += mad(fa, fb) != testing::brute_mad(fa, fb);
    const auto ca = extract_contour(a).points, cb = extract_contour(b).points;
    mismatches += hausdorff(ca, cb) != testing::brute_hausdorff(ca, cb);
    mismatches += mad(ca, cb) != testing::brute_mad(ca, cb);
    worst_identity = std::max(worst_identity, std::abs(d - 2 * j / (1 + j)));
  }
  return {mismatches == 0 && worst_identity <= 1e-12,
          fmt("%zu mask pairs, %zu oracle mismatches, max |DM - 2J/(1+J)| %.1e", pairs, mismatches, worst_identity)};
}

Outcome dilated_equivalence() {
  std::mt19937_64 rng(77);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2, m = 3, cin = 1 + rng() % 3, cout = 1 + rng() % 3, inflated = d * (m - 1) + 1;
    auto x = random_tensor({cin, 8, 8}, rng);
    auto w = random_tensor({cout, cin, m, m}, rng);
    auto b = random_tensor({cout}, rng);
    std::vector<double> wz(cout * cin * inflated * inflated, 0.0);
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t k = 0; k < m; ++k)
            wz[((o * cin + c) * inflated + i * d) * inflated + k * d] = w[((o * cin + c) * m + i) * m + k];
    const auto dil = conv2d(x, w, b, ConvSpec::same(cin, cout, m, d));
    const auto plain = conv2d(x, Tensor64({cout, cin, inflated, inflated}, wz), b, ConvSpec::same(cin, cout, inflated, 1));
    if (dil.shape() != plain.shape()) return {false, "shape mismatch"};
    worst = std::max(worst, testing::max_abs_diff(dil.data(), plain.data()));
  }
  return {worst <= 1e-12, fmt("50 instances, max |difference| %.1e", worst)};
}

Outcome architecture_contract() {
  Outcome out;
  for (std::size_t n : {16u, 64u}) {
    for (auto arch : {Architecture::UNet, Architecture::DilatedUNet, Architecture::MfpUNet}) {
      const auto model = Model<float>::build({arch, n, 4, 2}, 1);
      ForwardTrace trace;
      const auto logits = model.forward(Tensor<float>({2, n, n}, 0.5f), &trace);
      const bool shape_ok = logits.shape() == Shape{2, n, n};
      out.ok = out.ok && shape_ok;
      if (arch == Architecture::MfpUNet) {
        const bool concat_ok = trace.pyramid_concat == Shape{64, n, n};
        out.ok = out.ok && concat_ok;
        out.detail += fmt("%sN=%zu: concat %s, logits %s", out.detail.empty() ? "" : "; ", n,
                          shape_string(trace.pyramid_concat).c_str(), shape_string(logits.shape()).c_str());
      } else if (!shape_ok) {
        out.detail += fmt("; %s logits %s", std::string(architecture_tag(arch)).c_str(), shape_string(logits.shape()).c_str());
      }
    }
  }
  return out;
}

RunConfig desk_config() {
  RunConfig c;
  c.architecture = Architecture::MfpUNet;
  c.input_size = 64;
  c.base_width = 4;
  c.dilation = 2;
  c.learning_rate = 0.02;
  c.batch_size = 1;
  c.max_epochs = 60;
  c.augmentation_factor = 10;
  c.seed = 7;
  return c;
}

Outcome desk_overfit() {
  const RunConfig c = desk_config();
  const auto train = synthesize_samples(8, 64, 100);
  const auto held_out = synthesize_samples(4, 64, 200);
  const auto initial = Model<float>::build(c.model_config(), c.seed);
  const double untrained_val = mean_dice(initial, held_out);
  const auto fit = fit_model(Model<float>::build(c.model_config(), c.seed), train, {}, c);
  const double train_dice = mean_dice(fit.model, train);
  const double val = mean_dice(fit.model, held_out);
  const bool ok = fit.log.size() <= 60 && train_dice > 0.95 && val - untrained_val >= 0.3;
  return {ok, fmt("%zu epochs, training Dice %.4f, held-out Dice %.4f vs untrained %.4f (gain %.4f)", fit.log.size(), train_dice, val,
                  untrained_val, val - untrained_val)};
}

Outcome geometry_suite() {
  Outcome out;
  const Polygon square = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const double area = triangle_area(min_enclosing_triangle(square));
  const double oracle = testing::brute_min_triangle_area(square);
  const bool square_ok = std::abs(area - 2.0) <= 1e-6 && std::abs(oracle - 2.0) <= 1e-6 && std::abs(area - oracle) <= 1e-6;

  double worst_v = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TruncatedEllipse shape = generate_phantom(128, seed).ed_shape;
    shape.tilt = 0;
    const double cal = 0.3;
    const auto m = measure_lv(rasterize(shape, 128, 128), cal);
    const double s = units::mm2_to_cm2(shape.area() * cal * cal), d = units::mm_to_cm(shape.long_axis() * cal);
    worst_v = std::max(worst_v, std::abs(m.volume_ml / lv_volume(s, d) - 1));
  }

  double worst_ef = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TruncatedEllipse ed = generate_phantom(128, seed).ed_shape;
    ed.tilt = 0;
    const double v_ed = measure_lv(rasterize(ed, 128, 128), 0.3).volume_ml;
    const double v_es = measure_lv(rasterize(ed.shrunk(0.5), 128, 128), 0.3).volume_ml;
    worst_ef = std::max(worst_ef, std::abs(ejection_fraction(v_ed, v_es) - 87.5));
  }
  out.ok = square_ok && worst_v <= 0.03 && worst_ef <= 3.0;
  out.detail = fmt("unit square %.9f (oracle %.9f), worst phantom V error %.2f%%, worst 50%%-shrink EF deviation %.2f points", area,
                   oracle, 100 * worst_v, worst_ef);
  return out;
}

std::vector<std::uint8_t> bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  testing::ScratchDir a("accept_det_a"), b("accept_det_b");
  RunConfig c = desk_config();
  c.max_epochs = 3;
  c.augmentation_factor = 2;
  c.batch_size = 4;
  c.data_dir = "synthetic:8";
  c.folds = 4;
  c.output_dir = a.path().string();
  const auto ra = train_command(c);
  c.output_dir = b.path().string();
  const auto rb = train_command(c);
  std::size_t identical = 0;
  for (std::size_t k = 0; k < ra.checkpoints.size(); ++k) identical += bytes_of(ra.checkpoints[k]) == bytes_of(rb.checkpoints[k]);
  const bool logs = bytes_of(a / "train_log.csv") == bytes_of(b / "train_log.csv");
  return {identical == ra.checkpoints.size() && identical == c.folds && logs,
          fmt("%zu/%zu fold checkpoints byte-identical, training logs %s", identical, ra.checkpoints.size(), logs ? "identical" : "differ")};
}

}  // namespace

int main() {
  Gate gate;
  gate.run("anova-reproduction", 1, anova_reproduction);
  gate.run("bland-altman-identities", 1, bland_altman_identities);
  gate.run("gradient-suite", 120, gradient_suite);
  gate.run("metric-oracle-equivalence", 30, metric_oracles);
  gate.run("dilated-kernel-equivalence", 5, dilated_equivalence);
  gate.run("architecture-contract", 10, architecture_contract);
  gate.run("desk-scale-overfit", 1800, desk_overfit);
  gate.run("geometry-suite", 60, geometry_suite);
  gate.run("determinism", 1800, determinism);
  std::printf("%d criteria failed\n", gate.failures());
  return gate.failures() == 0 ? 0 : 1;
}
