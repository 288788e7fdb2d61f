#pragma once

// Numeric property suites: randomized checks of the geometry and layer
// contracts, each reporting its worst-case error, the tolerance it was held
// to, and a reproducer seed for the worst trial. Shared by the command-line
// `check` subcommand and the acceptance harness.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace surreal {

struct SuiteResult {
  std::string name;
  std::size_t trials = 0;
  double max_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::uint64_t worst_seed = 0;  // reseeds the worst trial exactly
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 2026;
  /// Diagnostic override multiplying every tolerance; 1 runs the contract.
  double tolerance_scale = 1.0;
  std::size_t threads = 1;
};

/// Group action preserves pairwise distances.
SuiteResult check_isometry(std::size_t trials = 10000, const CheckOptions& opts = {});

/// Weighted mean of transformed points equals transformed weighted mean.
SuiteResult check_wfm_equivariance(std::size_t trials = 1000,
                                   const CheckOptions& opts = {});

/// Running estimator agrees with the direct variance minimizer on windows
/// confined to one angular chart.
SuiteResult check_wfm_oracle(std::size_t trials = 100, const CheckOptions& opts = {});

/// Distance features do not move under a global scale-and-rotate.
SuiteResult check_distance_fc_invariance(std::size_t trials = 1000,
                                         const CheckOptions& opts = {});

/// Class probabilities of a rectification-free model do not move under a
/// global scale-and-rotate of the input.
SuiteResult check_end_to_end_invariance(std::size_t trials = 100,
                                        const CheckOptions& opts = {});

/// Measures (does not assert) the probability drift of a model with
/// rectification layers under the same transforms.
SuiteResult check_trelu_drift(std::size_t trials = 100, const CheckOptions& opts = {});

/// Taped gradients against central differences for each layer family in
/// isolation and for a full small model; draws that land within the kink
/// margin of a nondifferentiable point are resampled.
SuiteResult check_gradients(std::size_t draws = 50, const CheckOptions& opts = {});

std::vector<SuiteResult> run_all_checks(const CheckOptions& opts = {});

/// Names accepted by run_selected_checks, in execution order.
std::vector<std::string> check_suite_names();
std::vector<SuiteResult> run_selected_checks(const std::vector<std::string>& names,
                                             std::size_t trials_override,
                                             const CheckOptions& opts);

std::string format_suite_line(const SuiteResult& r);

}  // namespace surreal
