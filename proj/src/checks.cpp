#include "surreal/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>

#include "surreal/kernels.hpp"
#include "surreal/layers.hpp"
#include "surreal/model.hpp"
#include "surreal/parallel.hpp"
#include "surreal/rng.hpp"
#include "surreal/train.hpp"
#include "surreal/wfm.hpp"

namespace surreal {

namespace {

// fixed per-suite tags keep trial seeds disjoint between suites
enum : std::uint64_t {
  kTagIsometry = 11,
  kTagEquivariance = 12,
  kTagOracle = 13,
  kTagDfc = 14,
  kTagEndToEnd = 15,
  kTagDrift = 16,
  kTagGrad = 17,
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

PolarComplex random_point(std::mt19937_64& rng, double lr_span = 3.0) {
  return {uniform(rng, -lr_span, lr_span), wrap_angle(uniform(rng, -kPi, kPi))};
}

GroupElement random_group(std::mt19937_64& rng) {
  return {uniform(rng, -2.0, 2.0), wrap_angle(uniform(rng, -kPi, kPi))};
}

ComplexField random_field(std::mt19937_64& rng, std::vector<std::size_t> shape,
                          double lr_span = 2.0) {
  ComplexField f = make_field(std::move(shape));
  for (auto& p : f.data) p = random_point(rng, lr_span);
  return f;
}

ComplexField transform_field(const ComplexField& x, const GroupElement& g) {
  ComplexField out = x;
  for (auto& p : out.data) p = act(g, p);
  return out;
}

ConvexWeights random_weights(std::mt19937_64& rng, std::size_t k, double span = 2.0) {
  std::vector<double> logits(k);
  for (double& l : logits) l = uniform(rng, -span, span);
  return ConvexWeights(std::move(logits));
}

template <class Fn>
SuiteResult run_trials(const char* name, std::size_t trials, double tol,
                       std::uint64_t tag, const CheckOptions& opts, Fn&& trial) {
  std::vector<double> errs(trials, 0.0);
  parallel_for(trials, std::max<std::size_t>(1, opts.threads), [&](std::size_t i) {
    errs[i] = trial(mix_seed(opts.seed, i, tag));
  });
  SuiteResult r;
  r.name = name;
  r.trials = trials;
  r.tolerance = tol * opts.tolerance_scale;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    if (errs[i] > errs[worst]) worst = i;
  }
  r.max_err = trials == 0 ? 0.0 : errs[worst];
  r.worst_seed = mix_seed(opts.seed, worst, tag);
  r.pass = r.max_err <= r.tolerance;
  return r;
}

}  // namespace

SuiteResult check_isometry(std::size_t trials, const CheckOptions& opts) {
  return run_trials("isometry", trials, 1e-10, kTagIsometry, opts,
                    [](std::uint64_t seed) {
                      std::mt19937_64 rng(seed);
                      const PolarComplex z1 = random_point(rng);
                      const PolarComplex z2 = random_point(rng);
                      const GroupElement g = random_group(rng);
                      return std::fabs(distance(act(g, z1), act(g, z2)) -
                                       distance(z1, z2));
                    });
}

SuiteResult check_wfm_equivariance(std::size_t trials, const CheckOptions& opts) {
  return run_trials(
      "equivariance", trials, 1e-9, kTagEquivariance, opts, [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        static constexpr std::size_t kSizes[] = {4, 9, 16, 25};
        const std::size_t k = kSizes[rng() % 4];
        std::vector<PolarComplex> pts(k);
        for (auto& p : pts) p = random_point(rng, 2.0);
        const ConvexWeights w = random_weights(rng, k);
        const GroupElement g = random_group(rng);
        std::vector<PolarComplex> moved(k);
        for (std::size_t i = 0; i < k; ++i) moved[i] = act(g, pts[i]);
        return distance(wfm_incremental(moved, w), act(g, wfm_incremental(pts, w)));
      });
}

SuiteResult check_wfm_oracle(std::size_t trials, const CheckOptions& opts) {
  return run_trials(
      "oracle", trials, 1e-3, kTagOracle, opts, [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::size_t k = 2 + rng() % 4;
        const double center = uniform(rng, -kPi, kPi);
        std::vector<PolarComplex> pts(k);
        for (auto& p : pts) {
          // spread below a quarter turn keeps the window in one chart, where
          // the running estimator is exact and the minimizer unique
          p = {uniform(rng, -1.0, 1.0), wrap_angle(center + uniform(rng, -0.7, 0.7))};
        }
        const ConvexWeights w = random_weights(rng, k, 1.0);
        const WfmOracleResult oracle = wfm_oracle(pts, w);
        if (oracle.tie) return 1.0;  // must not happen on one-chart windows
        return distance(wfm_incremental(pts, w), oracle.mean);
      });
}

SuiteResult check_distance_fc_invariance(std::size_t trials, const CheckOptions& opts) {
  return run_trials(
      "invariance", trials, 1e-9, kTagDfc, opts, [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::size_t channels = 2 + rng() % 5;
        const std::size_t h = 2 + rng() % 3;
        const std::size_t w = 2 + rng() % 3;
        const ComplexField x = random_field(rng, {channels, h, w});
        DistanceFCSpec spec;
        spec.in_channels = channels;
        spec.out_channels = 1 + rng() % 4;
        for (std::size_t o = 0; o < spec.out_channels; ++o) {
          spec.weights.push_back(random_weights(rng, channels, 1.0));
        }
        const GroupElement g = random_group(rng);
        const std::vector<double> u1 = distance_fc(x, spec);
        const std::vector<double> u2 = distance_fc(transform_field(x, g), spec);
        double err = 0.0;
        for (std::size_t i = 0; i < u1.size(); ++i) {
          err = std::max(err, std::fabs(u1[i] - u2[i]));
        }
        return err;
      });
}

namespace {

ModelSpec tiny_model(bool with_trelu) {
  ModelSpec spec;
  spec.in_channels = 1;
  spec.input_extents = {6, 6};
  spec.classes = 3;
  ModelSpec::Layer conv;
  conv.kind = ModelSpec::Kind::kConv;
  conv.conv = {4, {2, 2}, {2, 2}};
  spec.layers.push_back(conv);
  if (with_trelu) {
    ModelSpec::Layer t;
    t.kind = ModelSpec::Kind::kTRelu;
    spec.layers.push_back(t);
  }
  ModelSpec::Layer dfc;
  dfc.kind = ModelSpec::Kind::kDistanceFc;
  dfc.dfc_out = 3;
  spec.layers.push_back(dfc);
  return spec;
}

double probs_drift(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<double> params = init_params(spec, rng());
  const ComplexField x = random_field(rng, {1, 6, 6}, 1.0);
  const GroupElement g = random_group(rng);
  const CompiledModel m = compile_model(spec, params);
  const std::vector<double> p1 = model_probs(m, x);
  const std::vector<double> p2 = model_probs(m, transform_field(x, g));
  double err = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    err = std::max(err, std::fabs(p1[i] - p2[i]));
  }
  return err;
}

}  // namespace

SuiteResult check_end_to_end_invariance(std::size_t trials, const CheckOptions& opts) {
  const ModelSpec spec = tiny_model(false);
  return run_trials("end_to_end", trials, 1e-6, kTagEndToEnd, opts,
                    [&spec](std::uint64_t seed) { return probs_drift(spec, seed); });
}

SuiteResult check_trelu_drift(std::size_t trials, const CheckOptions& opts) {
  const ModelSpec spec = tiny_model(true);
  SuiteResult r = run_trials("trelu_drift", trials, 0.0, kTagDrift, opts,
                             [&spec](std::uint64_t seed) { return probs_drift(spec, seed); });
  // measurement only: rectification clamps magnitude and phase floors, which
  // deliberately breaks the global symmetry
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "measured drift up to %.3g under random transforms (not asserted)",
                r.max_err);
  r.detail = buf;
  r.tolerance = 0.0;
  r.pass = true;
  return r;
}

namespace {

struct GradProblem {
  std::vector<double> p0;
  // builds the scalar under test on the tape; fills pvars with the leaves
  std::function<ad::Var(ad::Tape&, const std::vector<double>&, std::vector<ad::Var>&)>
      build;
};

BasicField<ad::Var> lift_constant_field(const ComplexField& x, ad::Tape& tape) {
  BasicField<ad::Var> out;
  out.shape = x.shape;
  out.data.reserve(x.data.size());
  for (const auto& p : x.data) {
    out.data.push_back({tape.constant(p.log_r), tape.constant(p.theta)});
  }
  return out;
}

std::vector<std::vector<ad::Var>> ratio_rows(const std::vector<ad::Var>& pvars,
                                             std::size_t rows, std::size_t cols) {
  std::vector<std::vector<ad::Var>> out;
  out.reserve(rows);
  for (std::size_t o = 0; o < rows; ++o) {
    std::vector<ad::Var> logits(pvars.begin() + static_cast<std::ptrdiff_t>(o * cols),
                                pvars.begin() + static_cast<std::ptrdiff_t>((o + 1) * cols));
    out.push_back(kern::wfm_step_ratios(kern::softmax(logits)));
  }
  return out;
}

ad::Var sum_field(const BasicField<ad::Var>& f) {
  ad::Var acc = f.data[0].log_r + f.data[0].theta;
  for (std::size_t i = 1; i < f.data.size(); ++i) {
    acc = acc + f.data[i].log_r + f.data[i].theta;
  }
  return acc;
}

GradProblem make_grad_problem(std::size_t kind, std::mt19937_64& rng) {
  GradProblem prob;
  const auto lift_params = [](ad::Tape& tape, const std::vector<double>& p,
                              std::vector<ad::Var>& pvars) {
    pvars.clear();
    pvars.reserve(p.size());
    for (double v : p) pvars.push_back(tape.leaf(v));
  };

  switch (kind % 5) {
    case 0: {  // convolution logits in isolation
      const auto x = std::make_shared<ComplexField>(random_field(rng, {1, 4, 4}, 1.5));
      const std::size_t out_ch = 2, win = 4;
      prob.p0.resize(out_ch * win);
      for (double& v : prob.p0) v = uniform(rng, -1.0, 1.0);
      prob.build = [x, out_ch, win, lift_params](ad::Tape& tape,
                                                 const std::vector<double>& p,
                                                 std::vector<ad::Var>& pvars) {
        lift_params(tape, p, pvars);
        const auto field = lift_constant_field(*x, tape);
        const auto out = kern::wfm_conv_t(field, ratio_rows(pvars, out_ch, win),
                                          {2, 2}, {2, 2});
        return sum_field(out);
      };
      break;
    }
    case 1: {  // distance-feature logits in isolation
      const auto x = std::make_shared<ComplexField>(random_field(rng, {3, 2, 2}, 1.5));
      const std::size_t out_ch = 2, m = 3;
      prob.p0.resize(out_ch * m);
      for (double& v : prob.p0) v = uniform(rng, -1.0, 1.0);
      prob.build = [x, out_ch, m, lift_params](ad::Tape& tape,
                                               const std::vector<double>& p,
                                               std::vector<ad::Var>& pvars) {
        lift_params(tape, p, pvars);
        const auto field = lift_constant_field(*x, tape);
        const auto u = kern::distance_fc_t(field, ratio_rows(pvars, out_ch, m));
        ad::Var acc = u[0];
        for (std::size_t i = 1; i < u.size(); ++i) acc = acc + u[i];
        return acc;
      };
      break;
    }
    case 2: {  // affine head with softmax and loss
      const std::size_t features = 4, classes = 3;
      auto u0 = std::make_shared<std::vector<double>>(features);
      for (double& v : *u0) v = uniform(rng, 0.1, 2.0);
      const std::size_t label = rng() % classes;
      prob.p0.resize(classes * features + classes);
      for (double& v : prob.p0) v = uniform(rng, -1.0, 1.0);
      prob.build = [u0, features, classes, label, lift_params](
                       ad::Tape& tape, const std::vector<double>& p,
                       std::vector<ad::Var>& pvars) {
        lift_params(tape, p, pvars);
        std::vector<ad::Var> u;
        u.reserve(features);
        for (double v : *u0) u.push_back(tape.constant(v));
        const std::vector<ad::Var> w(pvars.begin(),
                                     pvars.begin() + static_cast<std::ptrdiff_t>(classes * features));
        const std::vector<ad::Var> b(pvars.end() - static_cast<std::ptrdiff_t>(classes),
                                     pvars.end());
        return kern::cross_entropy(kern::softmax(kern::affine(u, w, b)), label);
      };
      break;
    }
    case 3: {  // rectification in isolation, parameters feed the field
      const std::size_t n = 6;
      auto readout = std::make_shared<std::vector<double>>(2 * n);
      for (double& v : *readout) v = uniform(rng, 0.5, 2.0);
      prob.p0.resize(2 * n);
      for (double& v : prob.p0) v = uniform(rng, -1.5, 1.5);
      prob.build = [n, readout, lift_params](ad::Tape& tape,
                                             const std::vector<double>& p,
                                             std::vector<ad::Var>& pvars) {
        lift_params(tape, p, pvars);
        BasicField<ad::Var> f;
        f.shape = {1, n};
        f.data.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
          f.data.push_back({pvars[2 * i], pvars[2 * i + 1]});
        }
        const auto out = kern::trelu_t(f);
        ad::Var acc = tape.constant(0.0);
        for (std::size_t i = 0; i < n; ++i) {
          acc = acc + tape.constant((*readout)[2 * i]) * out.data[i].log_r +
                tape.constant((*readout)[2 * i + 1]) * out.data[i].theta;
        }
        return acc;
      };
      break;
    }
    default: {  // full model loss
      ModelSpec spec;
      spec.in_channels = 1;
      spec.input_extents = {3, 3};
      spec.classes = 2;
      ModelSpec::Layer conv;
      conv.kind = ModelSpec::Kind::kConv;
      conv.conv = {2, {2, 2}, {1, 1}};
      spec.layers.push_back(conv);
      ModelSpec::Layer dfc;
      dfc.kind = ModelSpec::Kind::kDistanceFc;
      dfc.dfc_out = 2;
      spec.layers.push_back(dfc);
      auto sample = std::make_shared<LabeledSample>();
      sample->field = random_field(rng, {1, 3, 3}, 1.5);
      sample->label = rng() % 2;
      // spread-out parameters keep the channel wFMs apart; init-scale logits
      // would park every distance feature inside the sqrt kink margin
      prob.p0.resize(param_count(spec));
      for (double& v : prob.p0) v = uniform(rng, -1.0, 1.0);
      auto spec_ptr = std::make_shared<ModelSpec>(spec);
      prob.build = [spec_ptr, sample](ad::Tape& tape, const std::vector<double>& p,
                                      std::vector<ad::Var>& pvars) {
        return taped_sample_loss(*spec_ptr, p, *sample, tape, pvars);
      };
      break;
    }
  }
  return prob;
}

}  // namespace

SuiteResult check_gradients(std::size_t draws, const CheckOptions& opts) {
  constexpr double kStep = 1e-5;
  constexpr double kKinkMargin = 1e-4;
  SuiteResult r;
  r.name = "gradcheck";
  r.trials = draws;
  r.tolerance = 1e-4 * opts.tolerance_scale;
  r.max_err = 0.0;
  std::size_t resampled = 0;

  ad::Tape tape;
  tape.set_kink_margin(kKinkMargin);
  std::vector<ad::Var> pvars;

  for (std::size_t draw = 0; draw < draws; ++draw) {
    double draw_err = -1.0;
    std::uint64_t used_seed = 0;
    for (std::size_t attempt = 0; attempt < 20; ++attempt) {
      const std::uint64_t seed = mix_seed(opts.seed, draw, kTagGrad + 100 * attempt);
      std::mt19937_64 rng(seed);
      GradProblem prob = make_grad_problem(draw, rng);

      tape.clear();
      const ad::Var top = prob.build(tape, prob.p0, pvars);
      if (tape.kink_hit()) {
        ++resampled;
        continue;
      }
      tape.backward(top);
      std::vector<double> analytic(prob.p0.size());
      for (std::size_t i = 0; i < pvars.size(); ++i) analytic[i] = tape.grad(pvars[i]);

      bool kinked = false;
      double err = 0.0;
      for (std::size_t i = 0; i < prob.p0.size() && !kinked; ++i) {
        std::vector<double> p = prob.p0;
        p[i] = prob.p0[i] + kStep;
        tape.clear();
        const double f_hi = tape.val(prob.build(tape, p, pvars));
        kinked = kinked || tape.kink_hit();
        p[i] = prob.p0[i] - kStep;
        tape.clear();
        const double f_lo = tape.val(prob.build(tape, p, pvars));
        kinked = kinked || tape.kink_hit();
        const double numeric = (f_hi - f_lo) / (2.0 * kStep);
        const double denom =
            std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric)});
        err = std::max(err, std::fabs(analytic[i] - numeric) / denom);
      }
      if (kinked) {
        ++resampled;
        continue;
      }
      draw_err = err;
      used_seed = seed;
      break;
    }
    if (draw_err < 0.0) {
      // every attempt straddled a kink; report as a failure with the draw id
      r.max_err = 1.0;
      r.worst_seed = mix_seed(opts.seed, draw, kTagGrad);
      r.detail = "draw " + std::to_string(draw) + " could not avoid kinks";
      r.pass = false;
      return r;
    }
    if (draw_err > r.max_err) {
      r.max_err = draw_err;
      r.worst_seed = used_seed;
    }
  }
  if (resampled > 0) {
    r.detail = std::to_string(resampled) + " draw(s) resampled off kinks";
  }
  r.pass = r.max_err <= r.tolerance;
  return r;
}

std::vector<std::string> check_suite_names() {
  return {"isometry",   "equivariance", "oracle",   "invariance",
          "end_to_end", "trelu_drift",  "gradcheck"};
}

std::vector<SuiteResult> run_selected_checks(const std::vector<std::string>& names,
                                             std::size_t trials_override,
                                             const CheckOptions& opts) {
  std::vector<SuiteResult> out;
  const auto n = [&](std::size_t def) { return trials_override ? trials_override : def; };
  for (const std::string& name : names) {
    if (name == "isometry") {
      out.push_back(check_isometry(n(10000), opts));
    } else if (name == "equivariance") {
      out.push_back(check_wfm_equivariance(n(1000), opts));
    } else if (name == "oracle") {
      out.push_back(check_wfm_oracle(n(100), opts));
    } else if (name == "invariance") {
      out.push_back(check_distance_fc_invariance(n(1000), opts));
    } else if (name == "end_to_end") {
      out.push_back(check_end_to_end_invariance(n(100), opts));
    } else if (name == "trelu_drift") {
      out.push_back(check_trelu_drift(n(100), opts));
    } else if (name == "gradcheck") {
      out.push_back(check_gradients(n(50), opts));
    } else {
      throw std::invalid_argument("unknown check suite: " + name);
    }
  }
  return out;
}

std::vector<SuiteResult> run_all_checks(const CheckOptions& opts) {
  return run_selected_checks(check_suite_names(), 0, opts);
}

std::string format_suite_line(const SuiteResult& r) {
  char buf[256];
  if (r.tolerance > 0.0) {
    std::snprintf(buf, sizeof(buf), "%-12s %6zu trials  max_err %.3e  tol %.0e  %s",
                  r.name.c_str(), r.trials, r.max_err, r.tolerance,
                  r.pass ? "PASS" : "FAIL");
  } else {
    std::snprintf(buf, sizeof(buf), "%-12s %6zu trials  max_err %.3e  %s",
                  r.name.c_str(), r.trials, r.max_err, r.pass ? "PASS" : "FAIL");
  }
  std::string line = buf;
  if (!r.pass) {
    std::snprintf(buf, sizeof(buf), "  [reproducer seed %llu]",
                  static_cast<unsigned long long>(r.worst_seed));
    line += buf;
  }
  if (!r.detail.empty()) line += "  (" + r.detail + ")";
  return line;
}

}  // namespace surreal
