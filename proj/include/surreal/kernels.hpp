#pragma once

// Generic kernels shared by the plain-double inference path and the taped
// training path. Instantiating the same templates with double and with
// ad::Var guarantees both paths execute the same floating-point operations
// in the same order, so forward values agree bitwise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "surreal/autodiff.hpp"
#include "surreal/field.hpp"
#include "surreal/manifold.hpp"

namespace surreal::kern {

inline double scalar_value(double x) { return x; }
inline double scalar_value(ad::Var x) { return x.tape->val(x); }

inline double wrap(double x) { return wrap_angle(x); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// Max-shifted softmax; strictly positive weights summing to one. The shift
/// is treated as a constant, which leaves the derivative unchanged.
template <class T>
std::vector<T> softmax(const std::vector<T>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  double m = scalar_value(logits[0]);
  for (const T& x : logits) m = std::max(m, scalar_value(x));
  std::vector<T> out;
  out.reserve(logits.size());
  using std::exp;
  T sum = exp(logits[0] - m);
  out.push_back(sum);
  for (std::size_t i = 1; i < logits.size(); ++i) {
    out.push_back(exp(logits[i] - m));
    sum = sum + out.back();
  }
  for (T& w : out) w = w / sum;
  return out;
}

/// Step sizes for the running-mean update: ratios[k-1] = w[k] / (w[0]+...+w[k]).
template <class T>
std::vector<T> wfm_step_ratios(const std::vector<T>& w) {
  std::vector<T> out;
  if (w.size() <= 1) return out;
  out.reserve(w.size() - 1);
  T c = w[0];
  for (std::size_t k = 1; k < w.size(); ++k) {
    c = c + w[k];
    out.push_back(w[k] / c);
  }
  return out;
}

template <class T>
BasicPolar<T> geodesic_step(const BasicPolar<T>& a, const BasicPolar<T>& b,
                            const T& t) {
  T lr = (1.0 - t) * a.log_r + t * b.log_r;
  T th = wrap(a.theta + t * wrap(b.theta - a.theta));
  return {lr, th};
}

/// Running weighted mean: seed with the first point, then pull toward each
/// following point by its share of the weight mass seen so far. The result
/// depends on the point order, so callers fix a canonical one.
template <class T>
BasicPolar<T> wfm_from_ratios(const std::vector<BasicPolar<T>>& pts,
                              const std::vector<T>& ratios) {
  if (pts.empty()) throw std::invalid_argument("wfm: empty window");
  if (ratios.size() + 1 != pts.size()) {
    throw std::invalid_argument("wfm: ratio count must be window size - 1");
  }
  BasicPolar<T> m = pts[0];
  for (std::size_t k = 1; k < pts.size(); ++k) {
    m = geodesic_step(m, pts[k], ratios[k - 1]);
  }
  return m;
}

template <class T>
T dist_sq(const BasicPolar<T>& a, const BasicPolar<T>& b) {
  T dl = b.log_r - a.log_r;
  T dt = wrap(b.theta - a.theta);
  return dl * dl + 2.0 * (dt * dt);
}

inline std::vector<std::size_t> conv_output_extents(
    const std::vector<std::size_t>& in_extents,
    const std::vector<std::size_t>& kernel,
    const std::vector<std::size_t>& stride) {
  if (in_extents.empty() || in_extents.size() > 2) {
    throw std::invalid_argument("conv: spatial rank must be 1 or 2");
  }
  if (kernel.size() != in_extents.size() || stride.size() != in_extents.size()) {
    throw std::invalid_argument("conv: kernel/stride rank mismatch");
  }
  std::vector<std::size_t> out(in_extents.size());
  for (std::size_t d = 0; d < in_extents.size(); ++d) {
    if (kernel[d] == 0 || stride[d] == 0) {
      throw std::invalid_argument("conv: zero kernel or stride extent");
    }
    if (in_extents[d] < kernel[d]) {
      throw std::invalid_argument("conv: kernel larger than input");
    }
    out[d] = (in_extents[d] - kernel[d]) / stride[d] + 1;
  }
  return out;
}

/// Sliding-window weighted mean. ratios_per_out holds the precomputed step
/// ratios of each output channel's weight vector over in_channels *
/// prod(kernel) window entries. Windows are flattened channel-major, then
/// row-major within each channel.
template <class T>
BasicField<T> wfm_conv_t(const BasicField<T>& x,
                         const std::vector<std::vector<T>>& ratios_per_out,
                         const std::vector<std::size_t>& kernel,
                         const std::vector<std::size_t>& stride) {
  const std::size_t c_in = x.channels();
  const std::vector<std::size_t> in_ext(x.shape.begin() + 1, x.shape.end());
  const std::vector<std::size_t> out_ext = conv_output_extents(in_ext, kernel, stride);
  const std::size_t c_out = ratios_per_out.size();
  if (c_out == 0) throw std::invalid_argument("conv: no output channels");

  std::size_t window = c_in;
  for (std::size_t k : kernel) window *= k;
  for (const auto& r : ratios_per_out) {
    if (r.size() + 1 != window) {
      throw std::invalid_argument("conv: weight count does not match window size");
    }
  }

  BasicField<T> out;
  out.shape.assign(1, c_out);
  out.shape.insert(out.shape.end(), out_ext.begin(), out_ext.end());
  out.data.resize(shape_numel(out.shape), x.data[0]);

  std::vector<BasicPolar<T>> buf(window);
  const std::size_t out_spatial = out.spatial_size();

  if (in_ext.size() == 1) {
    for (std::size_t ox = 0; ox < out_ext[0]; ++ox) {
      const std::size_t x0 = ox * stride[0];
      std::size_t b = 0;
      for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t dx = 0; dx < kernel[0]; ++dx) {
          buf[b++] = x.at(c, x0 + dx);
        }
      }
      for (std::size_t o = 0; o < c_out; ++o) {
        out.data[o * out_spatial + ox] = wfm_from_ratios(buf, ratios_per_out[o]);
      }
    }
  } else {
    const std::size_t in_w = in_ext[1];
    for (std::size_t oy = 0; oy < out_ext[0]; ++oy) {
      for (std::size_t ox = 0; ox < out_ext[1]; ++ox) {
        const std::size_t y0 = oy * stride[0];
        const std::size_t x0 = ox * stride[1];
        std::size_t b = 0;
        for (std::size_t c = 0; c < c_in; ++c) {
          for (std::size_t dy = 0; dy < kernel[0]; ++dy) {
            for (std::size_t dx = 0; dx < kernel[1]; ++dx) {
              buf[b++] = x.at(c, (y0 + dy) * in_w + (x0 + dx));
            }
          }
        }
        const std::size_t pos = oy * out_ext[1] + ox;
        for (std::size_t o = 0; o < c_out; ++o) {
          out.data[o * out_spatial + pos] = wfm_from_ratios(buf, ratios_per_out[o]);
        }
      }
    }
  }
  return out;
}

/// Rectifies toward the manifold identity: magnitudes below 1 are lifted to
/// 1 and negative phases to 0. Identity on the already-rectified quadrant.
template <class T>
BasicField<T> trelu_t(const BasicField<T>& x) {
  BasicField<T> out = x;
  for (auto& p : out.data) {
    p.log_r = relu(p.log_r);
    p.theta = relu(p.theta);
  }
  return out;
}

/// Distance features: for each output channel, take the positionwise weighted
/// mean across input channels (a point of the product manifold), then report
/// each input channel's distance to that mean. Row-major out_channels x
/// in_channels. Both legs move identically under a global scale-and-rotate,
/// so the features are invariant.
template <class T>
std::vector<T> distance_fc_t(const BasicField<T>& x,
                             const std::vector<std::vector<T>>& ratios_per_out) {
  const std::size_t m = x.channels();
  const std::size_t s = x.spatial_size();
  const std::size_t c_out = ratios_per_out.size();
  if (c_out == 0) throw std::invalid_argument("distance_fc: no output channels");
  for (const auto& r : ratios_per_out) {
    if (r.size() + 1 != m) {
      throw std::invalid_argument("distance_fc: weight count must equal channel count");
    }
  }

  std::vector<T> out;
  out.reserve(c_out * m);
  std::vector<BasicPolar<T>> column(m);
  std::vector<BasicPolar<T>> mean(s, x.data[0]);
  using std::sqrt;
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t p = 0; p < s; ++p) {
      for (std::size_t c = 0; c < m; ++c) column[c] = x.at(c, p);
      mean[p] = wfm_from_ratios(column, ratios_per_out[o]);
    }
    for (std::size_t i = 0; i < m; ++i) {
      T acc = dist_sq(x.at(i, 0), mean[0]);
      for (std::size_t p = 1; p < s; ++p) {
        acc = acc + dist_sq(x.at(i, p), mean[p]);
      }
      out.push_back(sqrt(acc));
    }
  }
  return out;
}

/// Dense affine map: out[j] = b[j] + sum_k w[j * in + k] * u[k].
template <class T>
std::vector<T> affine(const std::vector<T>& u, const std::vector<T>& w,
                      const std::vector<T>& b) {
  const std::size_t n_out = b.size();
  if (w.size() != n_out * u.size()) {
    throw std::invalid_argument("affine: weight shape mismatch");
  }
  std::vector<T> out;
  out.reserve(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    T acc = b[j];
    for (std::size_t k = 0; k < u.size(); ++k) {
      acc = acc + w[j * u.size() + k] * u[k];
    }
    out.push_back(acc);
  }
  return out;
}

template <class T>
std::vector<T> relu_all(std::vector<T> v) {
  for (T& x : v) x = relu(x);
  return v;
}

/// Negative log-likelihood of the labeled class under the given probabilities.
template <class T>
T cross_entropy(const std::vector<T>& probs, std::size_t label) {
  if (label >= probs.size()) throw std::invalid_argument("cross_entropy: label out of range");
  using std::log;
  return -log(probs[label]);
}

}  // namespace surreal::kern
