#include "surreal/layers.hpp"

#include <stdexcept>
#include <string>

#include "surreal/kernels.hpp"

namespace surreal {

namespace {

std::size_t window_size(const ConvSpec& spec) {
  std::size_t n = spec.in_channels;
  for (std::size_t k : spec.kernel) n *= k;
  return n;
}

std::vector<std::vector<double>> ratio_table(const std::vector<ConvexWeights>& weights) {
  std::vector<std::vector<double>> out;
  out.reserve(weights.size());
  for (const auto& w : weights) {
    out.push_back(kern::wfm_step_ratios(w.weights()));
  }
  return out;
}

}  // namespace

void validate(const ConvSpec& spec, const std::vector<std::size_t>& in_shape) {
  if (in_shape.size() < 2 || in_shape.size() > 3) {
    throw std::invalid_argument("conv: input must be [channels, x] or [channels, y, x]");
  }
  if (spec.in_channels != in_shape[0]) {
    throw std::invalid_argument("conv: expected " + std::to_string(spec.in_channels) +
                                " input channels, got " + std::to_string(in_shape[0]));
  }
  if (spec.out_channels == 0) throw std::invalid_argument("conv: no output channels");
  if (spec.kernel.size() != in_shape.size() - 1 ||
      spec.stride.size() != in_shape.size() - 1) {
    throw std::invalid_argument("conv: kernel/stride rank does not match input");
  }
  kern::conv_output_extents({in_shape.begin() + 1, in_shape.end()}, spec.kernel,
                            spec.stride);
  if (spec.weights.size() != spec.out_channels) {
    throw std::invalid_argument("conv: one weight vector per output channel required");
  }
  const std::size_t win = window_size(spec);
  for (const auto& w : spec.weights) {
    if (w.size() != win) {
      throw std::invalid_argument("conv: weight vector size " + std::to_string(w.size()) +
                                  " does not match window size " + std::to_string(win));
    }
  }
}

std::vector<std::size_t> conv_output_shape(const std::vector<std::size_t>& in_shape,
                                           const ConvSpec& spec) {
  validate(spec, in_shape);
  auto ext = kern::conv_output_extents({in_shape.begin() + 1, in_shape.end()},
                                       spec.kernel, spec.stride);
  std::vector<std::size_t> out{spec.out_channels};
  out.insert(out.end(), ext.begin(), ext.end());
  return out;
}

ComplexField wfm_conv(const ComplexField& x, const ConvSpec& spec) {
  validate_field(x);
  validate(spec, x.shape);
  return kern::wfm_conv_t(x, ratio_table(spec.weights), spec.kernel, spec.stride);
}

ComplexField trelu(const ComplexField& x) {
  validate_field(x);
  return kern::trelu_t(x);
}

void validate(const DistanceFCSpec& spec, const std::vector<std::size_t>& in_shape) {
  if (in_shape.size() < 2 || in_shape.size() > 3) {
    throw std::invalid_argument("distance_fc: input must be [channels, x] or [channels, y, x]");
  }
  if (spec.in_channels != in_shape[0]) {
    throw std::invalid_argument("distance_fc: expected " +
                                std::to_string(spec.in_channels) +
                                " input channels, got " + std::to_string(in_shape[0]));
  }
  if (spec.out_channels == 0) throw std::invalid_argument("distance_fc: no output channels");
  if (spec.weights.size() != spec.out_channels) {
    throw std::invalid_argument("distance_fc: one weight vector per output channel required");
  }
  for (const auto& w : spec.weights) {
    if (w.size() != spec.in_channels) {
      throw std::invalid_argument("distance_fc: weight vector must have one entry per input channel");
    }
  }
}

std::vector<double> distance_fc(const ComplexField& x, const DistanceFCSpec& spec) {
  validate_field(x);
  validate(spec, x.shape);
  return kern::distance_fc_t(x, ratio_table(spec.weights));
}

ComplexField normalize_unit_modulus(const ComplexField& x) {
  validate_field(x);
  ComplexField out = x;
  for (auto& p : out.data) p.log_r = 0.0;
  return out;
}

std::vector<double> softmax_head(const std::vector<double>& features,
                                 const std::vector<double>& w,
                                 const std::vector<double>& b) {
  return kern::softmax(kern::affine(features, w, b));
}

}  // namespace surreal
