#pragma once

// Model descriptors and their plain-text config format. A model is a stack of
// complex-stage layers (weighted-mean convolutions and rectifications) closed
// by one distance-feature layer, followed by a real head (optionally one
// hidden relu layer) and a softmax. All learnable state lives in one flat
// parameter vector with a fixed layout.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "surreal/field.hpp"
#include "surreal/layers.hpp"

namespace surreal {

struct ConvLayerDesc {
  std::size_t out_channels = 0;
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
};

struct ModelSpec {
  enum class Kind { kConv, kTRelu, kDistanceFc };
  struct Layer {
    Kind kind = Kind::kConv;
    ConvLayerDesc conv;        // kind == kConv
    std::size_t dfc_out = 0;   // kind == kDistanceFc
  };

  std::size_t in_channels = 1;
  std::vector<std::size_t> input_extents;  // spatial, rank 1 or 2
  std::size_t classes = 2;
  std::vector<Layer> layers;
  std::size_t head_hidden = 0;  // 0 means a single affine layer
};

/// Shape checking for the whole stack: exactly one distance layer, in final
/// position, and every convolution must fit its input. Throws on violation.
void validate_model(const ModelSpec& spec);

struct LayerShape {
  std::size_t channels = 0;
  std::vector<std::size_t> spatial;
};

/// Field shape after each complex-stage layer, in layer order.
std::vector<LayerShape> layer_shapes(const ModelSpec& spec);

/// Real feature count entering the head: dfc_out * channels-before-dfc.
std::size_t feature_count(const ModelSpec& spec);

std::size_t param_count(const ModelSpec& spec);

/// Offsets of each parameter block inside the flat vector.
struct ParamLayout {
  struct Range {
    std::size_t offset = 0;
    std::size_t count = 0;
  };
  std::vector<Range> conv_logits;  // one per conv layer
  Range dfc_logits;
  Range head_w1, head_b1;  // present when head_hidden > 0
  Range head_w, head_b;
  std::size_t total = 0;
};

ParamLayout param_layout(const ModelSpec& spec);

/// Seeded initialization: mean logits near zero (close to uniform weights),
/// head weights uniform in +-1/sqrt(fan_in), biases zero.
std::vector<double> init_params(const ModelSpec& spec, std::uint64_t seed);

/// Parameter blocks bound to layer specs, ready for the forward pass.
struct CompiledModel {
  ModelSpec spec;
  std::vector<ConvSpec> convs;  // conv layers in order
  DistanceFCSpec dfc;
  std::vector<double> head_w1, head_b1;
  std::vector<double> head_w, head_b;
};

CompiledModel compile_model(const ModelSpec& spec, const std::vector<double>& params);

std::vector<double> model_features(const CompiledModel& m, const ComplexField& x);
std::vector<double> model_logits(const CompiledModel& m, const ComplexField& x);
std::vector<double> model_probs(const CompiledModel& m, const ComplexField& x);

/// Intermediate fields after each complex-stage layer (conv and trelu), in
/// layer order; the final distance layer produces real features and is not
/// included.
std::vector<ComplexField> model_layer_fields(const CompiledModel& m,
                                             const ComplexField& x);
std::vector<double> model_logits(const ModelSpec& spec, const std::vector<double>& params,
                                 const ComplexField& x);
std::vector<double> model_probs(const ModelSpec& spec, const std::vector<double>& params,
                                const ComplexField& x);

/// Config text: one `key = value` pair per line, '#' comments. Keys:
/// input_channels, input_extents (e.g. 16x16 or 128), classes, head_hidden,
/// and numbered layers such as
///   layer.1 = conv out=8 kernel=4x4 stride=4x4
///   layer.2 = trelu
///   layer.3 = dfc out=8
ModelSpec parse_model_config(std::istream& in);
ModelSpec load_model_config(const std::string& path);

}  // namespace surreal
