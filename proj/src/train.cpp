#include "surreal/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>

#include "surreal/kernels.hpp"
#include "surreal/parallel.hpp"
#include "surreal/rng.hpp"

namespace surreal {

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const TrainConfig& cfg) {
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adam_step: gradient size mismatch");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state size mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mh = state.m[i] / bc1;
    const double vh = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
  }
}

namespace {

using VarVec = std::vector<ad::Var>;

VarVec slice_vars(const VarVec& all, ParamLayout::Range r) {
  return VarVec(all.begin() + static_cast<std::ptrdiff_t>(r.offset),
                all.begin() + static_cast<std::ptrdiff_t>(r.offset + r.count));
}

// Forward pass with parameters on the tape; probs come back as tape nodes.
VarVec taped_forward(const ModelSpec& spec, const ParamLayout& lay,
                     const std::vector<double>& params, const ComplexField& x,
                     ad::Tape& tape, VarVec& param_vars) {
  if (params.size() != lay.total) {
    throw std::invalid_argument("taped_forward: parameter count mismatch");
  }
  param_vars.clear();
  param_vars.reserve(params.size());
  for (double p : params) param_vars.push_back(tape.leaf(p));

  BasicField<ad::Var> cur;
  cur.shape = x.shape;
  cur.data.reserve(x.data.size());
  for (const auto& p : x.data) {
    cur.data.push_back({tape.constant(p.log_r), tape.constant(p.theta)});
  }

  const auto ratios_block = [&](ParamLayout::Range range, std::size_t rows,
                                std::size_t cols) {
    std::vector<VarVec> out;
    out.reserve(rows);
    for (std::size_t o = 0; o < rows; ++o) {
      VarVec logits(cols);
      for (std::size_t k = 0; k < cols; ++k) {
        logits[k] = param_vars[range.offset + o * cols + k];
      }
      out.push_back(kern::wfm_step_ratios(kern::softmax(logits)));
    }
    return out;
  };

  std::size_t conv_i = 0;
  std::size_t channels = spec.in_channels;
  for (const auto& layer : spec.layers) {
    switch (layer.kind) {
      case ModelSpec::Kind::kConv: {
        std::size_t win = channels;
        for (std::size_t k : layer.conv.kernel) win *= k;
        cur = kern::wfm_conv_t(
            cur, ratios_block(lay.conv_logits[conv_i], layer.conv.out_channels, win),
            layer.conv.kernel, layer.conv.stride);
        channels = layer.conv.out_channels;
        ++conv_i;
        break;
      }
      case ModelSpec::Kind::kTRelu:
        cur = kern::trelu_t(cur);
        break;
      case ModelSpec::Kind::kDistanceFc: {
        VarVec u = kern::distance_fc_t(
            cur, ratios_block(lay.dfc_logits, layer.dfc_out, channels));
        if (spec.head_hidden > 0) {
          u = kern::relu_all(kern::affine(u, slice_vars(param_vars, lay.head_w1),
                                          slice_vars(param_vars, lay.head_b1)));
        }
        return kern::softmax(kern::affine(u, slice_vars(param_vars, lay.head_w),
                                          slice_vars(param_vars, lay.head_b)));
      }
    }
  }
  throw std::logic_error("taped_forward: layer stack missing dfc");
}

}  // namespace

ad::Var taped_sample_loss(const ModelSpec& spec, const std::vector<double>& params,
                          const LabeledSample& sample, ad::Tape& tape,
                          std::vector<ad::Var>& param_vars) {
  const ParamLayout lay = param_layout(spec);
  tape.clear();
  const VarVec probs = taped_forward(spec, lay, params, sample.field, tape, param_vars);
  return kern::cross_entropy(probs, sample.label);
}

double sample_loss_grad(const ModelSpec& spec, const std::vector<double>& params,
                        const LabeledSample& sample, std::vector<double>& grad,
                        ad::Tape& tape) {
  VarVec param_vars;
  const ad::Var loss = taped_sample_loss(spec, params, sample, tape, param_vars);
  tape.backward(loss);
  grad.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) grad[i] = tape.grad(param_vars[i]);
  return tape.val(loss);
}

std::vector<double> taped_model_probs(const ModelSpec& spec,
                                      const std::vector<double>& params,
                                      const ComplexField& x, ad::Tape& tape) {
  const ParamLayout lay = param_layout(spec);
  tape.clear();
  VarVec param_vars;
  const VarVec probs = taped_forward(spec, lay, params, x, tape, param_vars);
  std::vector<double> out;
  out.reserve(probs.size());
  for (ad::Var p : probs) out.push_back(tape.val(p));
  return out;
}

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Evaluation tally(const std::vector<std::size_t>& preds,
                 const std::vector<LabeledSample>& data, std::size_t classes) {
  Evaluation ev;
  ev.classes = classes;
  ev.confusion.assign(classes * classes, 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t t = data[i].label;
    if (t >= classes) throw std::invalid_argument("evaluate: label out of range");
    ev.confusion[t * classes + preds[i]] += 1;
    if (preds[i] == t) ++hits;
  }
  ev.accuracy = data.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
  return ev;
}

// Shared minibatch driver. grad_fn(worker, sample_index, params, grad_accum)
// adds the sample gradient at the given parameters into grad_accum and
// returns the sample loss; eval_fn gives test accuracy for the current
// parameters. Per-worker partial sums are reduced in worker order, so a fixed
// thread count reproduces exactly.
using GradFn = std::function<double(std::size_t, std::size_t, const std::vector<double>&,
                                    std::vector<double>&)>;
using EvalFn = std::function<double(const std::vector<double>&)>;

TrainResult run_training(std::size_t n_params, std::vector<double> params,
                         std::size_t n_train, const TrainConfig& cfg,
                         const GradFn& grad_fn, const EvalFn& eval_fn) {
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (n_train == 0) throw std::invalid_argument("train: empty training set");
  const std::size_t workers = std::max<std::size_t>(1, cfg.threads);

  TrainResult result;
  AdamState adam;
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5175ffe));
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  std::vector<std::vector<double>> grad_slots(workers, std::vector<double>(n_params, 0.0));
  std::vector<double> loss_slots(workers, 0.0);
  std::vector<double> grad(n_params, 0.0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n_train - start);
      for (std::size_t w = 0; w < workers; ++w) {
        std::fill(grad_slots[w].begin(), grad_slots[w].end(), 0.0);
        loss_slots[w] = 0.0;
      }
      parallel_chunks(count, workers,
                      [&](std::size_t w, std::size_t begin, std::size_t end) {
                        for (std::size_t i = begin; i < end; ++i) {
                          loss_slots[w] += grad_fn(w, order[start + i], params, grad_slots[w]);
                        }
                      });
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t w = 0; w < workers; ++w) {
        batch_loss += loss_slots[w];
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += grad_slots[w][i];
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (double& g : grad) g *= inv;
      adam_step(params, grad, adam, cfg);
      epoch_loss += batch_loss;
    }
    EpochMetric m;
    m.epoch = epoch;
    m.train_loss = epoch_loss / static_cast<double>(n_train);
    m.test_acc = eval_fn(params);
    if (cfg.on_epoch) cfg.on_epoch(m);
    result.metrics.push_back(m);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace

Evaluation evaluate(const ModelSpec& spec, const std::vector<double>& params,
                    const std::vector<LabeledSample>& data, std::size_t threads) {
  const CompiledModel compiled = compile_model(spec, params);
  std::vector<std::size_t> preds(data.size(), 0);
  parallel_for(data.size(), std::max<std::size_t>(1, threads), [&](std::size_t i) {
    preds[i] = argmax(model_probs(compiled, data[i].field));
  });
  return tally(preds, data, spec.classes);
}

TrainResult train_loop(const ModelSpec& spec, std::vector<double> init,
                       const std::vector<LabeledSample>& train,
                       const std::vector<LabeledSample>& test, const TrainConfig& cfg) {
  validate_model(spec);
  const ParamLayout lay = param_layout(spec);
  if (init.size() != lay.total) {
    throw std::invalid_argument("train_loop: parameter count mismatch");
  }
  const std::size_t workers = std::max<std::size_t>(1, cfg.threads);
  std::vector<ad::Tape> tapes(workers);
  std::vector<std::vector<double>> sgrads(workers);

  const auto grad_fn = [&](std::size_t w, std::size_t idx,
                           const std::vector<double>& params, std::vector<double>& acc) {
    const double loss = sample_loss_grad(spec, params, train[idx], sgrads[w], tapes[w]);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sgrads[w][i];
    return loss;
  };
  const auto eval_fn = [&](const std::vector<double>& p) {
    return test.empty() ? 0.0 : evaluate(spec, p, test, workers).accuracy;
  };
  return run_training(lay.total, std::move(init), train.size(), cfg, grad_fn, eval_fn);
}

std::size_t baseline_param_count(const BaselineSpec& spec) {
  return spec.hidden * spec.input_size + spec.hidden + spec.classes * spec.hidden +
         spec.classes;
}

std::vector<double> baseline_init(const BaselineSpec& spec, std::uint64_t seed) {
  if (spec.input_size == 0 || spec.hidden == 0 || spec.classes < 2) {
    throw std::invalid_argument("baseline: bad spec");
  }
  std::vector<double> p(baseline_param_count(spec), 0.0);
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::size_t off = 0;
  const auto fill = [&](std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) p[off + i] = dist(rng);
    off += count;
  };
  fill(spec.hidden * spec.input_size, spec.input_size);
  off += spec.hidden;  // b1 stays zero
  fill(spec.classes * spec.hidden, spec.hidden);
  // b2 stays zero
  return p;
}

namespace {

template <class T>
std::vector<T> baseline_forward_t(const BaselineSpec& spec, const std::vector<T>& params,
                                  const std::vector<T>& input) {
  const std::size_t n1 = spec.hidden * spec.input_size;
  std::vector<T> w1(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n1));
  std::vector<T> b1(params.begin() + static_cast<std::ptrdiff_t>(n1),
                    params.begin() + static_cast<std::ptrdiff_t>(n1 + spec.hidden));
  const std::size_t n2 = spec.classes * spec.hidden;
  std::vector<T> w2(params.begin() + static_cast<std::ptrdiff_t>(n1 + spec.hidden),
                    params.begin() + static_cast<std::ptrdiff_t>(n1 + spec.hidden + n2));
  std::vector<T> b2(params.end() - static_cast<std::ptrdiff_t>(spec.classes), params.end());
  const std::vector<T> h = kern::relu_all(kern::affine(input, w1, b1));
  return kern::softmax(kern::affine(h, w2, b2));
}

}  // namespace

std::vector<double> baseline_probs(const BaselineSpec& spec,
                                   const std::vector<double>& params,
                                   const std::vector<double>& input) {
  if (params.size() != baseline_param_count(spec)) {
    throw std::invalid_argument("baseline: parameter count mismatch");
  }
  if (input.size() != spec.input_size) {
    throw std::invalid_argument("baseline: input size mismatch");
  }
  return baseline_forward_t(spec, params, input);
}

Evaluation baseline_evaluate(const BaselineSpec& spec, const std::vector<double>& params,
                             const std::vector<LabeledSample>& data, std::size_t threads) {
  std::vector<std::size_t> preds(data.size(), 0);
  parallel_for(data.size(), std::max<std::size_t>(1, threads), [&](std::size_t i) {
    preds[i] = argmax(baseline_probs(spec, params, flatten_cartesian(data[i].field)));
  });
  return tally(preds, data, spec.classes);
}

TrainResult baseline_train(const BaselineSpec& spec, std::vector<double> init,
                           const std::vector<LabeledSample>& train,
                           const std::vector<LabeledSample>& test, const TrainConfig& cfg) {
  if (init.size() != baseline_param_count(spec)) {
    throw std::invalid_argument("baseline_train: parameter count mismatch");
  }
  const std::size_t workers = std::max<std::size_t>(1, cfg.threads);
  std::vector<ad::Tape> tapes(workers);

  const auto grad_fn = [&](std::size_t w, std::size_t idx,
                           const std::vector<double>& p, std::vector<double>& acc) {
    ad::Tape& tape = tapes[w];
    tape.clear();
    std::vector<ad::Var> pvars;
    pvars.reserve(p.size());
    for (double v : p) pvars.push_back(tape.leaf(v));
    std::vector<double> in = flatten_cartesian(train[idx].field);
    std::vector<ad::Var> invars;
    invars.reserve(in.size());
    for (double v : in) invars.push_back(tape.constant(v));
    const auto probs = baseline_forward_t(spec, pvars, invars);
    const ad::Var loss = kern::cross_entropy(probs, train[idx].label);
    tape.backward(loss);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += tape.grad(pvars[i]);
    return tape.val(loss);
  };
  const auto eval_fn = [&](const std::vector<double>& p) {
    return test.empty() ? 0.0 : baseline_evaluate(spec, p, test, workers).accuracy;
  };
  const std::size_t n_params = init.size();
  return run_training(n_params, std::move(init), train.size(), cfg, grad_fn, eval_fn);
}

void save_checkpoint(const std::string& path, const std::vector<double>& params) {
  RealTensor t;
  t.extents = {params.size()};
  t.values = params;
  save_cplx(path, t);
}

std::vector<double> load_checkpoint(const std::string& path, std::size_t expected) {
  RealTensor t = load_cplx_real(path);
  if (t.extents.size() != 1) {
    throw std::runtime_error("checkpoint must be rank 1: " + path);
  }
  if (t.values.size() != expected) {
    throw std::runtime_error("checkpoint has " + std::to_string(t.values.size()) +
                             " parameters, the model needs " + std::to_string(expected) +
                             ": " + path);
  }
  return t.values;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetric>& metrics) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write metrics: " + path);
  out << "epoch,train_loss,test_acc\n";
  char buf[96];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", m.epoch, m.train_loss, m.test_acc);
    out << buf;
  }
  if (!out) throw std::runtime_error("metrics write failed: " + path);
}

}  // namespace surreal
