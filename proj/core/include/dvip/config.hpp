#pragma once

#include <cstdint>
#include <string>

#include "dvip/data.hpp"
#include "dvip/model.hpp"

namespace dvip {

// Everything a run needs beyond the dataset itself. Parsed from flat
// `key = value` text ('#' starts a comment); unknown keys are rejected so
// typos fail loudly.
struct RunConfig {
  ModelConfig model;
  TaskKind task = TaskKind::kRegression;
  std::string dataset;
  int iterations = 150000;
  int batch_size = 100;
  double learning_rate = 1e-3;
  int r_train = 1;
  int r_test = 100;
  double test_fraction = 0.1;
  int split_index = 0;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Applies one key=value pair; FormatError on unknown key or bad value.
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical text describing a trained model's architecture and task, embedded
// in checkpoints so they are self-contained.
std::string serialize_model_descriptor(const ModelConfig& model, TaskKind task,
                                       std::int64_t train_size);
struct ModelDescriptor {
  ModelConfig model;
  TaskKind task = TaskKind::kRegression;
  std::int64_t train_size = 1;
};
ModelDescriptor parse_model_descriptor(const std::string& text);

const char* to_string(TaskKind t);
const char* to_string(PriorKind p);
const char* to_string(LikelihoodKind l);
const char* to_string(ObjectiveKind o);

}  // namespace dvip
