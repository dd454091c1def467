#pragma once

#include <string>

#include "strk/inference.hpp"
#include "strk/training.hpp"

namespace strk {

struct DatasetConfig {
  size_t samples = 100000;
  uint64_t seed = 1;
  double edge_probability = 0.05;
};

// Flat key=value experiment description with section prefixes
// (arm.variant, train.batch_size, ...). '#' starts a comment. Unknown keys
// are an error. Arm geometry defaults depend on arm.variant, everything else
// has one fixed default.
struct ExperimentConfig {
  ArmSpec arm = ArmSpec::four_geared(10);
  NeuronConfig neuron;
  DatasetConfig dataset;
  TrainConfig train;
  InferenceOptions infer;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  bool eta0_explicit = false;  // otherwise eta0 follows the model size

  static ExperimentConfig from_string(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  // 0.01 for 512-hidden and larger models, 0.1 for smaller ones, unless the
  // config pinned a value.
  double resolved_eta0() const;
};

}  // namespace strk
