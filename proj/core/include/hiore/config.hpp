#pragma once

#include <string>

#include <json.hpp>

#include "hiore/model.hpp"

namespace hiore {

/// Optimization and run-control settings.
struct TrainHyper {
  int batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.9;  // as configured; 0.999 available via config
  double adam_eps = 1e-8;
  int max_epochs = 300;
  int patience = 30;
  uint64_t seed = 7;
  double decode_threshold = 1.4;
  bool deterministic = true;

  void validate() const;
};

/// Whole-run configuration: the documented key set of the config file.
/// Unknown keys are rejected; every key has a default except corpus paths.
struct RunConfig {
  uint64_t seed = 7;
  std::string dtype = "float32";
  bool deterministic = true;
  int threads = 1;
  std::string train_path;
  std::string dev_path;
  std::string features_dir;
  ModelConfig model;
  TrainHyper train;
  double decode_threshold = 1.4;

  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace hiore
