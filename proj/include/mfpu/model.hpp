#pragma once

// U-net, dilated U-net and MFP-Unet topologies.
//
// All three share a four-level encoder (two 3x3 conv+ReLU, then 2x2 max
// pool), a bottleneck, and a four-level decoder (2x2 stride-2 transposed
// conv, concatenation with the same-level encoder map, two 3x3 conv+ReLU).
// Decoder outputs are named up1..up4, up4 being full resolution.
//
// MFP-Unet adds a pyramid branch per decoder level: 3x3 conv+ReLU to 16
// channels, nearest upsampling by 2^(4-i) back to N x N. The four branches are
// concatenated (up4 first) into a 64-channel map that a 1x1 classifier turns
// into two raw logit channels. The baselines classify up4 directly.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mfpu/layers.hpp"
#include "mfpu/tensor.hpp"

namespace mfpu {

enum class Architecture { UNet, DilatedUNet, MfpUNet };

std::string_view architecture_tag(Architecture arch);
// Accepts "unet", "dilated-unet", "mfp-unet"; throws ContractViolation otherwise.
Architecture parse_architecture(std::string_view tag);

struct ModelConfig {
  Architecture architecture = Architecture::MfpUNet;
  std::size_t input_size = 64;  // N, must be a positive multiple of 16
  std::size_t base_width = 8;   // B, channels at the first level
  std::size_t dilation = 2;     // ignored (forced to 1) for plain U-net

  static constexpr std::size_t kInputChannels = 2;
  static constexpr std::size_t kOutputChannels = 2;
  static constexpr std::size_t kLevels = 4;
  static constexpr std::size_t kPyramidChannels = 16;

  std::size_t level_width(std::size_t level) const { return base_width << (level - 1); }  // level 1..4
  std::size_t bottleneck_width() const { return base_width << kLevels; }
  std::size_t effective_dilation() const { return architecture == Architecture::UNet ? 1 : dilation; }
  void validate() const;
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

template <class T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

// Shapes observed during one forward pass.
struct ForwardTrace {
  std::vector<Shape> encoder;   // per level, before pooling
  Shape bottleneck;
  std::vector<Shape> decoder;   // up1..up4
  Shape pyramid_concat;         // MFP-Unet only
  Shape logits;
};

template <class T>
class Model {
 public:
  // Xavier-uniform weights (+-sqrt(6 / (fan_in + fan_out))), zero biases,
  // drawn in parameter-registration order from a generator seeded by `seed`.
  static Model build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // input: 2 x N x N -> raw logits 2 x N x N.
  Tensor<T> forward(const Tensor<T>& input, ForwardTrace* trace = nullptr) const;

  // Logits before the final 1x1 classifier (64 channels for MFP-Unet, B for
  // the baselines), exposed for the classifier construction tests.
  Tensor<T> features(const Tensor<T>& input, ForwardTrace* trace = nullptr) const;

  // Per-pixel argmax, 1 = foreground.
  std::vector<std::uint8_t> segment(const Tensor<T>& input) const;

  const std::vector<NamedParameter<T>>& parameters() const { return params_; }
  std::vector<Tensor<T>> parameter_tensors() const;
  Tensor<T> parameter(std::string_view name) const;
  std::size_t parameter_count() const;

  // Same topology in another numeric profile, values converted.
  template <class U>
  Model<U> cast() const;

 private:
  struct Conv {
    ConvSpec spec;
    Tensor<T> weight;
    Tensor<T> bias;
    bool transposed = false;
  };
  struct DoubleConv {
    Conv first, second;
  };

  Model() = default;
  Conv add_conv(std::mt19937_64& rng, const std::string& name, const ConvSpec& spec, bool transposed = false);
  Tensor<T> apply(const Conv& conv, const Tensor<T>& x) const;

  ModelConfig config_;
  std::vector<NamedParameter<T>> params_;
  std::vector<DoubleConv> encoder_;
  DoubleConv bottleneck_;
  std::vector<Conv> upconv_;
  std::vector<DoubleConv> decoder_;
  std::vector<Conv> pyramid_;  // index i-1 for up^i
  Conv head_;

  template <class>
  friend class Model;
};

template <class T>
Model<T> build_unet(std::size_t n, std::size_t base_width, std::uint64_t seed = 0);
template <class T>
Model<T> build_dilated_unet(std::size_t n, std::size_t base_width, std::size_t dilation = 2, std::uint64_t seed = 0);
template <class T>
Model<T> build_mfp_unet(std::size_t n, std::size_t base_width, std::size_t dilation = 2, std::uint64_t seed = 0);

}  // namespace mfpu
