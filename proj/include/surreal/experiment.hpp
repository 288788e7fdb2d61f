#pragma once

// Experiment descriptions: a plain-text run config naming the model config,
// the synthetic dataset parameters, the split, and the optimizer settings.
// Used by the command-line tool and by the acceptance harness.

#include <cstdint>
#include <string>
#include <vector>

#include "surreal/data.hpp"
#include "surreal/model.hpp"
#include "surreal/train.hpp"

namespace surreal {

struct RunConfig {
  std::string model_path;  // resolved relative to the run config file
  SynthSpec synth;
  double train_fraction = 0.3;
  std::uint64_t split_seed = 1;
  TrainConfig train;
  std::size_t baseline_hidden = 64;
  std::string target = "complex";  // complex | baseline | both
};

/// "key = value" lines, '#' comments. Keys: model, mode, classes, extents,
/// per_class, sigma, data_seed, train_fraction, split_seed, epochs, batch,
/// lr, train_seed, baseline_hidden, target.
RunConfig parse_run_config(const std::string& path);

/// "16x16" or "128".
std::vector<std::size_t> parse_extent_list(const std::string& s);

/// Reference network sized to the model's flattened two-plane input.
BaselineSpec derive_baseline(const ModelSpec& model, std::size_t hidden);

struct ExperimentData {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

/// Synthesizes and splits the dataset exactly as cmd_train does.
ExperimentData make_experiment_data(const RunConfig& rc);

}  // namespace surreal
