#include "surreal/wfm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "surreal/kernels.hpp"

namespace surreal {

ConvexWeights::ConvexWeights(std::vector<double> logits)
    : logits_(std::move(logits)) {
  if (logits_.empty()) {
    throw std::invalid_argument("ConvexWeights: empty logit vector");
  }
  for (double x : logits_) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("ConvexWeights: non-finite logit");
    }
  }
  weights_ = kern::softmax(logits_);
}

ConvexWeights ConvexWeights::uniform(std::size_t k) {
  return ConvexWeights(std::vector<double>(k, 0.0));
}

double weighted_variance(const std::vector<PolarComplex>& points,
                         const ConvexWeights& w, const PolarComplex& m) {
  if (points.size() != w.size()) {
    throw std::invalid_argument("weighted_variance: point/weight count mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    acc += w.weights()[i] * kern::dist_sq(points[i], m);
  }
  return acc;
}

PolarComplex wfm_incremental(const std::vector<PolarComplex>& points,
                             const ConvexWeights& w) {
  if (points.empty()) {
    throw std::invalid_argument("wfm_incremental: empty point set");
  }
  if (points.size() != w.size()) {
    throw std::invalid_argument("wfm_incremental: point/weight count mismatch");
  }
  const auto ratios = kern::wfm_step_ratios(w.weights());
  return kern::wfm_from_ratios(points, ratios);
}

PolarComplex wfm_field(const std::vector<PolarComplex>& window,
                       const ConvexWeights& w) {
  return wfm_incremental(window, w);
}

namespace {

// Angular part of the weighted variance. Uses only wrapping and arithmetic,
// nothing from the estimator path.
double angular_objective(const std::vector<PolarComplex>& points,
                         const std::vector<double>& w, double theta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double dt = wrap_angle(points[i].theta - theta);
    acc += w[i] * 2.0 * dt * dt;
  }
  return acc;
}

double golden_section(const std::vector<PolarComplex>& points,
                      const std::vector<double>& w, double lo, double hi) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = angular_objective(points, w, c);
  double fd = angular_objective(points, w, d);
  for (int it = 0; it < 200 && (b - a) > 1e-13; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = angular_objective(points, w, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = angular_objective(points, w, d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

WfmOracleResult wfm_oracle(const std::vector<PolarComplex>& points,
                           const ConvexWeights& w, std::size_t grid) {
  if (points.empty()) {
    throw std::invalid_argument("wfm_oracle: empty point set");
  }
  if (points.size() != w.size()) {
    throw std::invalid_argument("wfm_oracle: point/weight count mismatch");
  }
  if (grid < 10000) {
    throw std::invalid_argument("wfm_oracle: grid too coarse");
  }
  const std::vector<double>& ww = w.weights();

  // The log-magnitude coordinate separates: its minimizer is the plain
  // weighted average.
  double log_r = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    log_r += ww[i] * points[i].log_r;
  }

  const double step = kTwoPi / static_cast<double>(grid);
  double best = 0.0;
  double best_f = 0.0;
  std::size_t best_j = 0;
  std::vector<double> values(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    const double theta = wrap_angle(-kPi + step * (static_cast<double>(j) + 0.5));
    const double f = angular_objective(points, ww, theta);
    values[j] = f;
    if (j == 0 || f < best_f) {
      best_f = f;
      best = theta;
      best_j = j;
    }
  }

  // A near-optimal value far from the winning bracket means the argmin is
  // not unique (antipodal configurations); the first grid minimum wins.
  bool tie = false;
  const double f_tol = std::max(1e-9, 1e-6 * std::max(1.0, best_f));
  for (std::size_t j = 0; j < grid; ++j) {
    std::size_t gap = j > best_j ? j - best_j : best_j - j;
    gap = std::min(gap, grid - gap);
    if (gap > 8 && values[j] <= best_f + f_tol) {
      tie = true;
      break;
    }
  }

  const double refined =
      golden_section(points, ww, best - step, best + step);
  WfmOracleResult res;
  res.mean = {log_r, wrap_angle(refined)};
  res.tie = tie;
  res.variance = weighted_variance(points, w, res.mean);
  return res;
}

}  // namespace surreal
