#include "mfpu/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mfpu/errors.hpp"

namespace mfpu {

std::string_view architecture_tag(Architecture arch) {
  switch (arch) {
    case Architecture::UNet:
      return "unet";
    case Architecture::DilatedUNet:
      return "dilated-unet";
    case Architecture::MfpUNet:
      return "mfp-unet";
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view tag) {
  if (tag == "unet") return Architecture::UNet;
  if (tag == "dilated-unet") return Architecture::DilatedUNet;
  if (tag == "mfp-unet") return Architecture::MfpUNet;
  throw ContractViolation("unknown architecture '" + std::string(tag) + "' (expected unet, dilated-unet or mfp-unet)");
}

void ModelConfig::validate() const {
  require(input_size >= 16 && input_size % 16 == 0,
          "input size N must be a positive multiple of 16, got " + std::to_string(input_size));
  require(base_width >= 2, "base width B must be >= 2, got " + std::to_string(base_width));
  require(dilation >= 1, "dilation must be >= 1");
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.architecture == b.architecture && a.input_size == b.input_size && a.base_width == b.base_width &&
         a.effective_dilation() == b.effective_dilation();
}

template <class T>
typename Model<T>::Conv Model<T>::add_conv(std::mt19937_64& rng, const std::string& name, const ConvSpec& spec, bool transposed) {
  Conv conv{spec, {}, {}, transposed};
  const Shape wshape = transposed ? spec.transposed_weight_shape() : spec.weight_shape();
  const double area = static_cast<double>(spec.kernel * spec.kernel);
  const double fan_in = static_cast<double>(spec.in_channels) * area;
  const double fan_out = static_cast<double>(spec.out_channels) * area;
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<T> w(shape_numel(wshape));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  conv.weight = Tensor<T>::parameter(wshape, std::move(w));
  conv.bias = Tensor<T>::parameter({spec.out_channels}, std::vector<T>(spec.out_channels, T(0)));
  params_.push_back({name + ".weight", conv.weight});
  params_.push_back({name + ".bias", conv.bias});
  return conv;
}

template <class T>
Model<T> Model<T>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.config_ = config;
  const std::size_t d = config.effective_dilation();
  const std::size_t levels = ModelConfig::kLevels;

  std::size_t in = ModelConfig::kInputChannels;
  for (std::size_t l = 1; l <= levels; ++l) {
    const std::size_t w = config.level_width(l);
    const std::string prefix = "enc" + std::to_string(l);
    DoubleConv block;
    block.first = m.add_conv(rng, prefix + ".conv1", ConvSpec::same(in, w, 3, d));
    block.second = m.add_conv(rng, prefix + ".conv2", ConvSpec::same(w, w, 3, d));
    m.encoder_.push_back(block);
    in = w;
  }
  const std::size_t bw = config.bottleneck_width();
  m.bottleneck_.first = m.add_conv(rng, "bottleneck.conv1", ConvSpec::same(in, bw, 3, d));
  m.bottleneck_.second = m.add_conv(rng, "bottleneck.conv2", ConvSpec::same(bw, bw, 3, d));
  in = bw;

  for (std::size_t i = 1; i <= levels; ++i) {
    const std::size_t level = levels + 1 - i;
    const std::size_t w = config.level_width(level);
    const std::string prefix = "up" + std::to_string(i);
    m.upconv_.push_back(m.add_conv(rng, prefix + ".tconv", ConvSpec{in, w, 2, 2, 1, 0}, true));
    DoubleConv block;
    block.first = m.add_conv(rng, prefix + ".conv1", ConvSpec::same(2 * w, w, 3, d));
    block.second = m.add_conv(rng, prefix + ".conv2", ConvSpec::same(w, w, 3, d));
    m.decoder_.push_back(block);
    in = w;
  }

  if (config.architecture == Architecture::MfpUNet) {
    for (std::size_t i = 1; i <= levels; ++i) {
      const std::size_t w = config.level_width(levels + 1 - i);
      m.pyramid_.push_back(m.add_conv(rng, "pyramid" + std::to_string(i) + ".conv",
                                      ConvSpec::same(w, ModelConfig::kPyramidChannels, 3, 1)));
    }
    in = levels * ModelConfig::kPyramidChannels;
  }
  m.head_ = m.add_conv(rng, "head", ConvSpec{in, ModelConfig::kOutputChannels, 1, 1, 1, 0});
  return m;
}

template <class T>
Tensor<T> Model<T>::apply(const Conv& conv, const Tensor<T>& x) const {
  return conv.transposed ? transposed_conv2d(x, conv.weight, conv.bias, conv.spec)
                         : conv2d(x, conv.weight, conv.bias, conv.spec);
}

template <class T>
Tensor<T> Model<T>::features(const Tensor<T>& input, ForwardTrace* trace) const {
  const std::size_t n = config_.input_size;
  require(input.defined() && input.shape() == Shape{ModelConfig::kInputChannels, n, n},
          "model input must be " + shape_string({ModelConfig::kInputChannels, n, n}) + ", got " +
              (input.defined() ? shape_string(input.shape()) : "<undefined>"));
  const std::size_t levels = ModelConfig::kLevels;
  std::vector<Tensor<T>> skips;
  Tensor<T> x = input;
  for (const auto& block : encoder_) {
    x = relu(apply(block.first, x));
    x = relu(apply(block.second, x));
    skips.push_back(x);
    if (trace) trace->encoder.push_back(x.shape());
    x = max_pool2d(x, 2);
  }
  x = relu(apply(bottleneck_.first, x));
  x = relu(apply(bottleneck_.second, x));
  if (trace) trace->bottleneck = x.shape();

  std::vector<Tensor<T>> ups;
  for (std::size_t i = 0; i < levels; ++i) {
    x = apply(upconv_[i], x);
    x = concat_channels<T>({skips[levels - 1 - i], x});
    x = relu(apply(decoder_[i].first, x));
    x = relu(apply(decoder_[i].second, x));
    ups.push_back(x);
    if (trace) trace->decoder.push_back(x.shape());
  }
  if (config_.architecture != Architecture::MfpUNet) return x;

  std::vector<Tensor<T>> branches;
  for (std::size_t i = levels; i >= 1; --i) {
    const std::size_t factor = std::size_t{1} << (levels - i);
    branches.push_back(upsample_nearest(relu(apply(pyramid_[i - 1], ups[i - 1])), factor));
  }
  Tensor<T> merged = concat_channels(branches);
  if (trace) trace->pyramid_concat = merged.shape();
  return merged;
}

template <class T>
Tensor<T> Model<T>::forward(const Tensor<T>& input, ForwardTrace* trace) const {
  Tensor<T> logits = apply(head_, features(input, trace));
  if (trace) trace->logits = logits.shape();
  return logits;
}

template <class T>
std::vector<std::uint8_t> Model<T>::segment(const Tensor<T>& input) const {
  NoGradGuard no_grad;
  return argmax_channels(forward(input));
}

template <class T>
std::vector<Tensor<T>> Model<T>::parameter_tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

template <class T>
Tensor<T> Model<T>::parameter(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw ContractViolation("no parameter named '" + std::string(name) + "'");
}

template <class T>
std::size_t Model<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.tensor.numel();
  return total;
}

template <class T>
template <class U>
Model<U> Model<T>::cast() const {
  Model<U> out = Model<U>::build(config_, 0);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto src = params_[i].tensor.data();
    auto dst = out.params_[i].tensor.data();
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<U>(src[j]);
  }
  return out;
}

template <class T>
Model<T> build_unet(std::size_t n, std::size_t base_width, std::uint64_t seed) {
  return Model<T>::build({Architecture::UNet, n, base_width, 1}, seed);
}

template <class T>
Model<T> build_dilated_unet(std::size_t n, std::size_t base_width, std::size_t dilation, std::uint64_t seed) {
  return Model<T>::build({Architecture::DilatedUNet, n, base_width, dilation}, seed);
}

template <class T>
Model<T> build_mfp_unet(std::size_t n, std::size_t base_width, std::size_t dilation, std::uint64_t seed) {
  return Model<T>::build({Architecture::MfpUNet, n, base_width, dilation}, seed);
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

template Model<float> build_unet<float>(std::size_t, std::size_t, std::uint64_t);
template Model<double> build_unet<double>(std::size_t, std::size_t, std::uint64_t);
template Model<float> build_dilated_unet<float>(std::size_t, std::size_t, std::size_t, std::uint64_t);
template Model<double> build_dilated_unet<double>(std::size_t, std::size_t, std::size_t, std::uint64_t);
template Model<float> build_mfp_unet<float>(std::size_t, std::size_t, std::size_t, std::uint64_t);
template Model<double> build_mfp_unet<double>(std::size_t, std::size_t, std::size_t, std::uint64_t);

}  // namespace mfpu
