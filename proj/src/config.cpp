#include "mfpu/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfpu/errors.hpp"

namespace mfpu {

using nlohmann::json;

RunConfig RunConfig::clinical_profile() {
  RunConfig c;
  c.input_size = 256;
  c.base_width = 64;
  c.batch_size = 64;
  c.max_epochs = 100;
  return c;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.architecture = architecture;
  m.input_size = input_size;
  m.base_width = base_width;
  m.dilation = dilation;
  return m;
}

SgdHyperparameters RunConfig::sgd() const { return {learning_rate, momentum, weight_decay, lr_decay}; }

ElasticParams RunConfig::elastic() const { return {elastic_alpha, elastic_sigma}; }

void RunConfig::validate() const {
  require(input_size > 0 && input_size % 16 == 0, "input_size must be a positive multiple of 16");
  require(base_width > 0, "base_width must be positive");
  require(dilation > 0, "dilation must be positive");
  require(learning_rate > 0, "learning_rate must be positive");
  require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
  require(weight_decay >= 0, "weight_decay must be non-negative");
  require(lr_decay >= 0, "lr_decay must be non-negative");
  require(batch_size > 0, "batch_size must be positive");
  require(augmentation_factor > 0, "augmentation_factor must be positive");
  require(folds > 0, "folds must be positive");
  require(elastic_alpha >= 0, "elastic_alpha must be non-negative");
  require(elastic_sigma > 0, "elastic_sigma must be positive");
  require(niblack_k > 0, "niblack_k must be positive");
  require(!data_dir.empty(), "data_dir must not be empty");
  require(!output_dir.empty(), "output_dir must not be empty");
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return run_config_to_json(a) == run_config_to_json(b);
}

namespace {

std::size_t get_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ContractViolation("config key '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double get_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ContractViolation("config key '" + key + "' must be a number");
  return v.get<double>();
}

std::string get_text(const json& v, const std::string& key) {
  if (!v.is_string()) throw ContractViolation("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("config must be a JSON object");

  RunConfig c;
  for (const auto& [key, v] : doc.items()) {
    if (key == "architecture") c.architecture = parse_architecture(get_text(v, key));
    else if (key == "input_size") c.input_size = get_count(v, key);
    else if (key == "base_width") c.base_width = get_count(v, key);
    else if (key == "dilation") c.dilation = get_count(v, key);
    else if (key == "learning_rate") c.learning_rate = get_real(v, key);
    else if (key == "momentum") c.momentum = get_real(v, key);
    else if (key == "weight_decay") c.weight_decay = get_real(v, key);
    else if (key == "lr_decay") c.lr_decay = get_real(v, key);
    else if (key == "batch_size") c.batch_size = get_count(v, key);
    else if (key == "max_epochs") c.max_epochs = get_count(v, key);
    else if (key == "augmentation_factor") c.augmentation_factor = get_count(v, key);
    else if (key == "folds") c.folds = get_count(v, key);
    else if (key == "seed") c.seed = get_count(v, key);
    else if (key == "elastic_alpha") c.elastic_alpha = get_real(v, key);
    else if (key == "elastic_sigma") c.elastic_sigma = get_real(v, key);
    else if (key == "niblack_k") c.niblack_k = get_real(v, key);
    else if (key == "data_dir") c.data_dir = get_text(v, key);
    else if (key == "output_dir") c.output_dir = get_text(v, key);
    else throw ContractViolation("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json doc = json::object();
  doc["architecture"] = std::string(architecture_tag(c.architecture));
  doc["input_size"] = c.input_size;
  doc["base_width"] = c.base_width;
  doc["dilation"] = c.dilation;
  doc["learning_rate"] = c.learning_rate;
  doc["momentum"] = c.momentum;
  doc["weight_decay"] = c.weight_decay;
  doc["lr_decay"] = c.lr_decay;
  doc["batch_size"] = c.batch_size;
  doc["max_epochs"] = c.max_epochs;
  doc["augmentation_factor"] = c.augmentation_factor;
  doc["folds"] = c.folds;
  doc["seed"] = c.seed;
  doc["elastic_alpha"] = c.elastic_alpha;
  doc["elastic_sigma"] = c.elastic_sigma;
  doc["niblack_k"] = c.niblack_k;
  doc["data_dir"] = c.data_dir;
  doc["output_dir"] = c.output_dir;
  return doc.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << run_config_to_json(config);
  if (!out) throw IoError("failed writing config " + path.string());
}

}  // namespace mfpu
