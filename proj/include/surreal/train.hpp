#pragma once

// Training stack: taped gradients through the full layer stack, ADAM, the
// minibatch loop, evaluation, and a plain real-valued reference network
// trained by the same loop for parameter and accuracy comparisons.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "surreal/autodiff.hpp"
#include "surreal/data.hpp"
#include "surreal/model.hpp"

namespace surreal {

struct EpochMetric;

struct TrainConfig {
  double learning_rate = 0.005;
  std::size_t batch_size = 100;
  std::size_t epochs = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Progress hook, called once per epoch when set.
  std::function<void(const EpochMetric&)> on_epoch;
};

struct AdamState {
  std::vector<double> m, v;
  std::size_t t = 0;
};

/// One ADAM update with bias correction. grads must have one entry per
/// parameter; the state is created lazily on first use.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const TrainConfig& cfg);

/// Gradient of the per-sample cross-entropy loss with respect to every
/// parameter, written into grad (overwritten, same size as params). Returns
/// the loss. The tape is reused across calls.
double sample_loss_grad(const ModelSpec& spec, const std::vector<double>& params,
                        const LabeledSample& sample, std::vector<double>& grad,
                        ad::Tape& tape);

/// Builds the per-sample loss on the caller's tape (cleared first) and
/// returns its node; param_vars receives the parameter leaves in layout
/// order, ready for backward().
ad::Var taped_sample_loss(const ModelSpec& spec, const std::vector<double>& params,
                          const LabeledSample& sample, ad::Tape& tape,
                          std::vector<ad::Var>& param_vars);

/// Forward probabilities through the taped path. Matches the plain path
/// bitwise because both instantiate the same kernels.
std::vector<double> taped_model_probs(const ModelSpec& spec,
                                      const std::vector<double>& params,
                                      const ComplexField& x, ad::Tape& tape);

struct EpochMetric {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_acc = 0.0;
};

struct TrainResult {
  std::vector<double> params;
  std::vector<EpochMetric> metrics;
};

struct Evaluation {
  double accuracy = 0.0;
  std::size_t classes = 0;
  std::vector<std::size_t> confusion;  // row-major true x predicted counts
};

Evaluation evaluate(const ModelSpec& spec, const std::vector<double>& params,
                    const std::vector<LabeledSample>& data, std::size_t threads = 1);

/// Minibatch training: seeded shuffling each epoch, mean-gradient ADAM
/// updates, per-epoch mean train loss and test accuracy.
TrainResult train_loop(const ModelSpec& spec, std::vector<double> init,
                       const std::vector<LabeledSample>& train,
                       const std::vector<LabeledSample>& test, const TrainConfig& cfg);

/// Reference network: flattened two-plane real input, one hidden relu layer,
/// softmax output.
struct BaselineSpec {
  std::size_t input_size = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;
};

std::size_t baseline_param_count(const BaselineSpec& spec);
std::vector<double> baseline_init(const BaselineSpec& spec, std::uint64_t seed);
std::vector<double> baseline_probs(const BaselineSpec& spec,
                                   const std::vector<double>& params,
                                   const std::vector<double>& input);
Evaluation baseline_evaluate(const BaselineSpec& spec, const std::vector<double>& params,
                             const std::vector<LabeledSample>& data,
                             std::size_t threads = 1);
TrainResult baseline_train(const BaselineSpec& spec, std::vector<double> init,
                           const std::vector<LabeledSample>& train,
                           const std::vector<LabeledSample>& test, const TrainConfig& cfg);

/// Flat parameter persistence as a rank-1 real tensor file.
void save_checkpoint(const std::string& path, const std::vector<double>& params);
std::vector<double> load_checkpoint(const std::string& path, std::size_t expected);

/// "epoch,train_loss,test_acc" rows, full precision, byte-stable.
void write_metrics_csv(const std::string& path, const std::vector<EpochMetric>& metrics);

}  // namespace surreal
