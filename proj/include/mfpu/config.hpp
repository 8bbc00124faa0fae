#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "mfpu/data.hpp"
#include "mfpu/model.hpp"
#include "mfpu/optim.hpp"

namespace mfpu {

struct RunConfig {
  Architecture architecture = Architecture::MfpUNet;
  std::size_t input_size = 64;
  std::size_t base_width = 8;
  std::size_t dilation = 2;
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double lr_decay = 1e-4;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 20;
  std::size_t augmentation_factor = 10;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double elastic_alpha = 2.0;
  double elastic_sigma = 6.0;
  double niblack_k = 2.0;
  std::string data_dir = "synthetic:20";
  std::string output_dir = "out";

  // Clinical-scale settings: N = 256, B = 64, batch 64, 100 epochs.
  static RunConfig clinical_profile();

  ModelConfig model_config() const;
  SgdHyperparameters sgd() const;
  ElasticParams elastic() const;

  // Throws ContractViolation on non-positive hyperparameters or N % 16 != 0.
  void validate() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

// Flat JSON object with snake_case keys. Missing keys keep their defaults;
// unknown keys, wrong types and invalid values are rejected.
RunConfig parse_run_config(std::string_view json_text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace mfpu
