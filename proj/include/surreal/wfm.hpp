#pragma once

// Weighted Fréchet means on the manifold. The estimator is the classic
// running update (seed with the first point, pull toward each next point by
// its share of the weight mass so far); the oracle below minimizes the
// weighted variance directly and shares no code with the estimator beyond
// angle wrapping.

#include <cstddef>
#include <vector>

#include "surreal/manifold.hpp"

namespace surreal {

/// Convex coefficients parameterized by unconstrained logits through a
/// max-shifted softmax: always strictly positive, always summing to one.
class ConvexWeights {
 public:
  ConvexWeights() = default;
  explicit ConvexWeights(std::vector<double> logits);

  static ConvexWeights uniform(std::size_t k);

  std::size_t size() const { return logits_.size(); }
  const std::vector<double>& logits() const { return logits_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> logits_;
  std::vector<double> weights_;
};

/// sum_i w_i * distance(z_i, m)^2, the objective the mean minimizes.
double weighted_variance(const std::vector<PolarComplex>& points,
                         const ConvexWeights& w, const PolarComplex& m);

/// Running-update estimate of the weighted Fréchet mean. Exact whenever the
/// points fit in one angular chart (no wrap crossings); order-sensitive in
/// general, so callers fix a canonical point order.
PolarComplex wfm_incremental(const std::vector<PolarComplex>& points,
                             const ConvexWeights& w);

struct WfmOracleResult {
  PolarComplex mean;
  double variance = 0.0;
  /// True when a second grid minimum of comparable value sits far from the
  /// returned angle; the minimizer is then not unique and the first grid
  /// minimum is reported.
  bool tie = false;
};

/// Direct minimizer of the weighted variance: the log-magnitude coordinate
/// has the closed-form solution sum w_i log_r_i, and the angle is found by
/// exhaustive grid search over (-pi, pi] followed by golden-section
/// refinement of the best bracket. Independent of the running estimator.
WfmOracleResult wfm_oracle(const std::vector<PolarComplex>& points,
                           const ConvexWeights& w, std::size_t grid = 20001);

/// Weighted mean of an already-flattened window. The canonical flattening is
/// channel-major, then row-major (see wfm_conv).
PolarComplex wfm_field(const std::vector<PolarComplex>& window,
                       const ConvexWeights& w);

}  // namespace surreal
