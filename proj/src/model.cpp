#include "surreal/model.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "surreal/kernels.hpp"

namespace surreal {

namespace {

std::size_t conv_window(const ModelSpec::Layer& layer, std::size_t in_channels) {
  std::size_t n = in_channels;
  for (std::size_t k : layer.conv.kernel) n *= k;
  return n;
}

}  // namespace

void validate_model(const ModelSpec& spec) {
  if (spec.in_channels == 0) throw std::invalid_argument("model: zero input channels");
  if (spec.input_extents.empty() || spec.input_extents.size() > 2) {
    throw std::invalid_argument("model: input must be rank 1 or 2");
  }
  for (std::size_t e : spec.input_extents) {
    if (e == 0) throw std::invalid_argument("model: zero input extent");
  }
  if (spec.classes < 2) throw std::invalid_argument("model: need at least two classes");
  if (spec.layers.empty()) throw std::invalid_argument("model: no layers");
  if (spec.layers.back().kind != ModelSpec::Kind::kDistanceFc) {
    throw std::invalid_argument("model: last layer must be dfc");
  }
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == ModelSpec::Kind::kDistanceFc) {
      throw std::invalid_argument("model: dfc allowed only as the final layer");
    }
  }
  layer_shapes(spec);  // throws on any shape mismatch
}

std::vector<LayerShape> layer_shapes(const ModelSpec& spec) {
  std::vector<LayerShape> out;
  LayerShape cur{spec.in_channels, spec.input_extents};
  for (const auto& layer : spec.layers) {
    switch (layer.kind) {
      case ModelSpec::Kind::kConv: {
        if (layer.conv.out_channels == 0) {
          throw std::invalid_argument("model: conv with zero output channels");
        }
        cur.spatial = kern::conv_output_extents(cur.spatial, layer.conv.kernel,
                                                layer.conv.stride);
        cur.channels = layer.conv.out_channels;
        break;
      }
      case ModelSpec::Kind::kTRelu:
        break;
      case ModelSpec::Kind::kDistanceFc:
        if (layer.dfc_out == 0) {
          throw std::invalid_argument("model: dfc with zero output channels");
        }
        break;
    }
    out.push_back(cur);
  }
  return out;
}

std::size_t feature_count(const ModelSpec& spec) {
  const auto shapes = layer_shapes(spec);
  const std::size_t m =
      spec.layers.size() >= 2 ? shapes[spec.layers.size() - 2].channels : spec.in_channels;
  return spec.layers.back().dfc_out * m;
}

ParamLayout param_layout(const ModelSpec& spec) {
  validate_model(spec);
  ParamLayout lay;
  std::size_t off = 0;
  std::size_t channels = spec.in_channels;
  for (const auto& layer : spec.layers) {
    if (layer.kind == ModelSpec::Kind::kConv) {
      const std::size_t n = layer.conv.out_channels * conv_window(layer, channels);
      lay.conv_logits.push_back({off, n});
      off += n;
      channels = layer.conv.out_channels;
    }
  }
  const std::size_t dfc_out = spec.layers.back().dfc_out;
  lay.dfc_logits = {off, dfc_out * channels};
  off += lay.dfc_logits.count;

  const std::size_t features = dfc_out * channels;
  if (spec.head_hidden > 0) {
    lay.head_w1 = {off, spec.head_hidden * features};
    off += lay.head_w1.count;
    lay.head_b1 = {off, spec.head_hidden};
    off += lay.head_b1.count;
    lay.head_w = {off, spec.classes * spec.head_hidden};
    off += lay.head_w.count;
  } else {
    lay.head_w = {off, spec.classes * features};
    off += lay.head_w.count;
  }
  lay.head_b = {off, spec.classes};
  off += lay.head_b.count;
  lay.total = off;
  return lay;
}

std::size_t param_count(const ModelSpec& spec) { return param_layout(spec).total; }

std::vector<double> init_params(const ModelSpec& spec, std::uint64_t seed) {
  const ParamLayout lay = param_layout(spec);
  std::vector<double> p(lay.total, 0.0);
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::uniform_real_distribution<double> logit_dist(-0.01, 0.01);
  for (const auto& range : lay.conv_logits) {
    for (std::size_t i = 0; i < range.count; ++i) {
      p[range.offset + i] = logit_dist(rng);
    }
  }
  for (std::size_t i = 0; i < lay.dfc_logits.count; ++i) {
    p[lay.dfc_logits.offset + i] = logit_dist(rng);
  }
  const std::size_t features = feature_count(spec);
  const auto fill_affine = [&](ParamLayout::Range w, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < w.count; ++i) p[w.offset + i] = dist(rng);
  };
  if (spec.head_hidden > 0) {
    fill_affine(lay.head_w1, features);
    fill_affine(lay.head_w, spec.head_hidden);
  } else {
    fill_affine(lay.head_w, features);
  }
  // biases stay zero
  return p;
}

CompiledModel compile_model(const ModelSpec& spec, const std::vector<double>& params) {
  const ParamLayout lay = param_layout(spec);
  if (params.size() != lay.total) {
    throw std::invalid_argument("model: expected " + std::to_string(lay.total) +
                                " parameters, got " + std::to_string(params.size()));
  }
  CompiledModel m;
  m.spec = spec;
  std::size_t channels = spec.in_channels;
  std::size_t conv_i = 0;
  for (const auto& layer : spec.layers) {
    if (layer.kind != ModelSpec::Kind::kConv) continue;
    const auto range = lay.conv_logits[conv_i++];
    ConvSpec cs;
    cs.in_channels = channels;
    cs.out_channels = layer.conv.out_channels;
    cs.kernel = layer.conv.kernel;
    cs.stride = layer.conv.stride;
    const std::size_t win = conv_window(layer, channels);
    cs.weights.reserve(cs.out_channels);
    for (std::size_t o = 0; o < cs.out_channels; ++o) {
      std::vector<double> logits(params.begin() + static_cast<std::ptrdiff_t>(range.offset + o * win),
                                 params.begin() + static_cast<std::ptrdiff_t>(range.offset + (o + 1) * win));
      cs.weights.emplace_back(std::move(logits));
    }
    m.convs.push_back(std::move(cs));
    channels = layer.conv.out_channels;
  }
  m.dfc.in_channels = channels;
  m.dfc.out_channels = spec.layers.back().dfc_out;
  for (std::size_t o = 0; o < m.dfc.out_channels; ++o) {
    std::vector<double> logits(
        params.begin() + static_cast<std::ptrdiff_t>(lay.dfc_logits.offset + o * channels),
        params.begin() + static_cast<std::ptrdiff_t>(lay.dfc_logits.offset + (o + 1) * channels));
    m.dfc.weights.emplace_back(std::move(logits));
  }
  const auto slice = [&](ParamLayout::Range r) {
    return std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(r.offset),
                               params.begin() + static_cast<std::ptrdiff_t>(r.offset + r.count));
  };
  if (spec.head_hidden > 0) {
    m.head_w1 = slice(lay.head_w1);
    m.head_b1 = slice(lay.head_b1);
  }
  m.head_w = slice(lay.head_w);
  m.head_b = slice(lay.head_b);
  return m;
}

std::vector<double> model_features(const CompiledModel& m, const ComplexField& x) {
  ComplexField cur = x;
  std::size_t conv_i = 0;
  for (const auto& layer : m.spec.layers) {
    switch (layer.kind) {
      case ModelSpec::Kind::kConv:
        cur = wfm_conv(cur, m.convs[conv_i++]);
        break;
      case ModelSpec::Kind::kTRelu:
        cur = trelu(cur);
        break;
      case ModelSpec::Kind::kDistanceFc:
        return distance_fc(cur, m.dfc);
    }
  }
  throw std::logic_error("model: layer stack missing dfc");
}

std::vector<double> model_logits(const CompiledModel& m, const ComplexField& x) {
  std::vector<double> u = model_features(m, x);
  if (m.spec.head_hidden > 0) {
    u = kern::relu_all(kern::affine(u, m.head_w1, m.head_b1));
  }
  return kern::affine(u, m.head_w, m.head_b);
}

std::vector<double> model_logits(const ModelSpec& spec, const std::vector<double>& params,
                                 const ComplexField& x) {
  return model_logits(compile_model(spec, params), x);
}

std::vector<double> model_probs(const CompiledModel& m, const ComplexField& x) {
  return kern::softmax(model_logits(m, x));
}

std::vector<double> model_probs(const ModelSpec& spec, const std::vector<double>& params,
                                const ComplexField& x) {
  return model_probs(compile_model(spec, params), x);
}

std::vector<ComplexField> model_layer_fields(const CompiledModel& m,
                                             const ComplexField& x) {
  std::vector<ComplexField> out;
  ComplexField cur = x;
  std::size_t conv_i = 0;
  for (const auto& layer : m.spec.layers) {
    if (layer.kind == ModelSpec::Kind::kDistanceFc) break;
    cur = layer.kind == ModelSpec::Kind::kConv ? wfm_conv(cur, m.convs[conv_i++])
                                               : trelu(cur);
    out.push_back(cur);
  }
  return out;
}

namespace {

[[noreturn]] void config_error(std::size_t line, const std::string& msg) {
  throw std::runtime_error("model config line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::size_t> parse_extents(const std::string& s, std::size_t line) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    part = trim(part);
    try {
      const long long v = std::stoll(part);
      if (v <= 0) config_error(line, "extent must be positive: " + s);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      config_error(line, "bad extent list: " + s);
    }
  }
  if (out.empty() || out.size() > 2) config_error(line, "extents must be rank 1 or 2: " + s);
  return out;
}

std::size_t parse_count(const std::string& s, std::size_t line, const std::string& what) {
  try {
    const long long v = std::stoll(trim(s));
    if (v < 0) config_error(line, what + " must be nonnegative");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    config_error(line, "bad " + what + ": " + s);
  }
}

ModelSpec::Layer parse_layer(const std::string& value, std::size_t line) {
  std::stringstream ss(value);
  std::string kind;
  ss >> kind;
  ModelSpec::Layer layer;
  std::map<std::string, std::string> kv;
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) config_error(line, "expected key=value, got: " + tok);
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  const auto take = [&](const char* key) {
    const auto it = kv.find(key);
    if (it == kv.end()) config_error(line, std::string("missing ") + key + " for " + kind);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (kind == "conv") {
    layer.kind = ModelSpec::Kind::kConv;
    layer.conv.out_channels = parse_count(take("out"), line, "out");
    layer.conv.kernel = parse_extents(take("kernel"), line);
    layer.conv.stride = parse_extents(take("stride"), line);
  } else if (kind == "trelu") {
    layer.kind = ModelSpec::Kind::kTRelu;
  } else if (kind == "dfc") {
    layer.kind = ModelSpec::Kind::kDistanceFc;
    layer.dfc_out = parse_count(take("out"), line, "out");
  } else {
    config_error(line, "unknown layer kind: " + kind);
  }
  if (!kv.empty()) config_error(line, "unexpected option: " + kv.begin()->first);
  return layer;
}

}  // namespace

ModelSpec parse_model_config(std::istream& in) {
  ModelSpec spec;
  spec.input_extents.clear();
  std::map<std::size_t, ModelSpec::Layer> layers;
  std::string raw;
  std::size_t line_no = 0;
  bool saw_extents = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string l = trim(raw);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string::npos) config_error(line_no, "expected key = value");
    const std::string key = trim(l.substr(0, eq));
    const std::string value = trim(l.substr(eq + 1));
    if (key == "input_channels") {
      spec.in_channels = parse_count(value, line_no, "input_channels");
    } else if (key == "input_extents") {
      spec.input_extents = parse_extents(value, line_no);
      saw_extents = true;
    } else if (key == "classes") {
      spec.classes = parse_count(value, line_no, "classes");
    } else if (key == "head_hidden") {
      spec.head_hidden = parse_count(value, line_no, "head_hidden");
    } else if (key.rfind("layer.", 0) == 0) {
      std::size_t idx = 0;
      try {
        idx = static_cast<std::size_t>(std::stoull(key.substr(6)));
      } catch (const std::logic_error&) {
        config_error(line_no, "bad layer index: " + key);
      }
      if (!layers.emplace(idx, parse_layer(value, line_no)).second) {
        config_error(line_no, "duplicate layer index: " + key);
      }
    } else {
      config_error(line_no, "unknown key: " + key);
    }
  }
  if (!saw_extents) throw std::runtime_error("model config: missing input_extents");
  for (auto& [idx, layer] : layers) spec.layers.push_back(std::move(layer));
  validate_model(spec);
  return spec;
}

ModelSpec load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model config: " + path);
  return parse_model_config(in);
}

}  // namespace surreal
