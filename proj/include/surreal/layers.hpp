#pragma once

// Network layers on complex fields. The convolution and the distance
// transform aggregate through weighted Fréchet means, so a global
// scale-and-rotate of the input moves their outputs by the same group
// element (convolution) or not at all (distance features).

#include <cstddef>
#include <vector>

#include "surreal/field.hpp"
#include "surreal/manifold.hpp"
#include "surreal/wfm.hpp"

namespace surreal {

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<std::size_t> kernel;   // spatial extents, rank 1 or 2
  std::vector<std::size_t> stride;
  /// One weight vector per output channel over the flattened window
  /// (in_channels * prod(kernel) entries, channel-major then row-major).
  std::vector<ConvexWeights> weights;
};

/// Throws unless the spec is internally consistent and applicable to a field
/// with the given shape.
void validate(const ConvSpec& spec, const std::vector<std::size_t>& in_shape);

std::vector<std::size_t> conv_output_shape(const std::vector<std::size_t>& in_shape,
                                           const ConvSpec& spec);

/// Sliding-window weighted Fréchet mean, valid padding.
ComplexField wfm_conv(const ComplexField& x, const ConvSpec& spec);

/// Elementwise rectification toward the identity: r below 1 is lifted to 1,
/// phase below 0 to 0. Idempotent.
ComplexField trelu(const ComplexField& x);

struct DistanceFCSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  /// One weight vector of in_channels entries per output channel.
  std::vector<ConvexWeights> weights;
};

void validate(const DistanceFCSpec& spec, const std::vector<std::size_t>& in_shape);

/// Scale-and-rotate invariant features: distances of each input channel to a
/// positionwise weighted mean channel. Row-major out_channels x in_channels.
std::vector<double> distance_fc(const ComplexField& x, const DistanceFCSpec& spec);

/// Projects every point to the unit circle (log_r = 0), keeping the phase.
ComplexField normalize_unit_modulus(const ComplexField& x);

/// Class probabilities from real features: affine map then softmax.
/// w is row-major classes x features.
std::vector<double> softmax_head(const std::vector<double>& features,
                                 const std::vector<double>& w,
                                 const std::vector<double>& b);

}  // namespace surreal
