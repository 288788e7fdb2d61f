// Command-line front end: train / eval / check / viz / synth.
//
// Exit codes: 0 success, 2 missing or unparseable configuration (the message
// names the offending path), 1 any other failure, including failed checks.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "surreal/checks.hpp"
#include "surreal/data.hpp"
#include "surreal/experiment.hpp"
#include "surreal/model.hpp"
#include "surreal/parallel.hpp"
#include "surreal/train.hpp"

namespace fs = std::filesystem;
using namespace surreal;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) {
    throw ConfigError(std::string("missing ") + what + ": " + path);
  }
}

// any config problem (absent or malformed) maps to exit code 2
RunConfig load_run_checked(const std::string& path) {
  require_file(path, "run config");
  try {
    return parse_run_config(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

ModelSpec load_model_checked(const std::string& path) {
  require_file(path, "model config");
  try {
    return load_model_config(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

void print_confusion(const Evaluation& ev) {
  std::printf("confusion (rows true, cols predicted, %%):\n");
  for (std::size_t t = 0; t < ev.classes; ++t) {
    std::size_t row = 0;
    for (std::size_t p = 0; p < ev.classes; ++p) row += ev.confusion[t * ev.classes + p];
    std::printf(" ");
    for (std::size_t p = 0; p < ev.classes; ++p) {
      const double pct =
          row == 0 ? 0.0
                   : 100.0 * static_cast<double>(ev.confusion[t * ev.classes + p]) /
                         static_cast<double>(row);
      std::printf(" %6.2f", pct);
    }
    std::printf("\n");
  }
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              bool deterministic) {
  const RunConfig rc = load_run_checked(config_path);
  const ModelSpec spec = load_model_checked(rc.model_path);
  if (spec.classes != rc.synth.classes) {
    throw ConfigError("model expects " + std::to_string(spec.classes) +
                      " classes, run config generates " +
                      std::to_string(rc.synth.classes));
  }
  if (spec.input_extents != rc.synth.extents || spec.in_channels != 1) {
    throw ConfigError("model input shape does not match synthesized data");
  }

  const ExperimentData data = make_experiment_data(rc);
  std::printf("dataset: %zu train / %zu test (%s, %zu classes, sigma %.3g)\n",
              data.train.size(), data.test.size(), to_string(rc.synth.mode).c_str(),
              rc.synth.classes, rc.synth.sigma);

  const std::size_t complex_params = param_count(spec);
  const BaselineSpec bspec = derive_baseline(spec, rc.baseline_hidden);
  const std::size_t baseline_params = baseline_param_count(bspec);
  std::printf("complex parameters:  %zu\n", complex_params);
  std::printf("baseline parameters: %zu\n", baseline_params);
  std::printf("parameter ratio: %.2f%%\n",
              100.0 * static_cast<double>(complex_params) /
                  static_cast<double>(baseline_params));

  TrainConfig cfg = rc.train;
  cfg.threads = deterministic ? 1 : thread_cap();
  fs::create_directories(out_dir);

  if (rc.target == "complex" || rc.target == "both") {
    cfg.on_epoch = [](const EpochMetric& m) {
      std::printf("[complex] epoch %zu  loss %.6f  test_acc %.4f\n", m.epoch,
                  m.train_loss, m.test_acc);
      std::fflush(stdout);
    };
    TrainResult res =
        train_loop(spec, init_params(spec, cfg.seed), data.train, data.test, cfg);
    write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), res.metrics);
    save_checkpoint((fs::path(out_dir) / "model.ckpt").string(), res.params);
    std::printf("final complex test accuracy: %.4f\n",
                res.metrics.empty() ? 0.0 : res.metrics.back().test_acc);
  }
  if (rc.target == "baseline" || rc.target == "both") {
    cfg.on_epoch = [](const EpochMetric& m) {
      std::printf("[baseline] epoch %zu  loss %.6f  test_acc %.4f\n", m.epoch,
                  m.train_loss, m.test_acc);
      std::fflush(stdout);
    };
    TrainResult res = baseline_train(bspec, baseline_init(bspec, cfg.seed),
                                     data.train, data.test, cfg);
    write_metrics_csv((fs::path(out_dir) / "metrics_baseline.csv").string(),
                      res.metrics);
    save_checkpoint((fs::path(out_dir) / "baseline.ckpt").string(), res.params);
    std::printf("final baseline test accuracy: %.4f\n",
                res.metrics.empty() ? 0.0 : res.metrics.back().test_acc);
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint,
             double scale, double rotate, bool baseline) {
  const RunConfig rc = load_run_checked(config_path);
  require_file(checkpoint, "checkpoint");
  if (!(scale > 0.0)) throw ConfigError("--scale must be positive");
  const ModelSpec spec = load_model_checked(rc.model_path);

  const ExperimentData data = make_experiment_data(rc);
  const GroupElement g{std::log(scale), wrap_angle(rotate)};
  const auto transformed = apply_global_scaling(data.test, g);
  const std::size_t threads = thread_cap();

  Evaluation ev;
  if (baseline) {
    const BaselineSpec bspec = derive_baseline(spec, rc.baseline_hidden);
    const auto params = load_checkpoint(checkpoint, baseline_param_count(bspec));
    ev = baseline_evaluate(bspec, params, transformed, threads);
  } else {
    const auto params = load_checkpoint(checkpoint, param_count(spec));
    ev = evaluate(spec, params, transformed, threads);
  }
  std::printf("scale %.6g, rotate %.6g rad: accuracy %.4f (%zu samples)\n", scale,
              rotate, ev.accuracy, transformed.size());
  print_confusion(ev);
  return 0;
}

int cmd_check(const std::vector<std::string>& suites, std::size_t trials,
              std::uint64_t seed, double tolerance_scale) {
  CheckOptions opts;
  opts.seed = seed;
  opts.tolerance_scale = tolerance_scale;
  opts.threads = thread_cap();
  const auto names = suites.empty() ? check_suite_names() : suites;
  const auto results = run_selected_checks(names, trials, opts);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%s\n", format_suite_line(r).c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_synth(const std::string& mode, std::size_t classes, std::size_t n,
              std::uint64_t seed, const std::string& out_dir,
              const std::string& extents, double sigma) {
  SynthSpec spec;
  spec.mode = synth_mode_from_string(mode);
  spec.classes = classes;
  spec.per_class = n;
  spec.seed = seed;
  spec.extents = parse_extent_list(extents);
  spec.sigma = sigma;
  const auto data = synth_generate(spec);
  const std::string manifest = save_dataset(data, out_dir);
  std::printf("wrote %zu samples and %s\n", data.size(), manifest.c_str());
  return 0;
}

// hue in [0,1) -> RGB with full saturation, value in [0,1]
void hsv_to_rgb(double h, double v, unsigned char* rgb) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double q = v * (1.0 - f), t = v * f;
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v; g = t; b = 0; break;
    case 1: r = q; g = v; b = 0; break;
    case 2: r = 0; g = v; b = t; break;
    case 3: r = 0; g = q; b = v; break;
    case 4: r = t; g = 0; b = v; break;
    default: r = v; g = 0; b = q; break;
  }
  rgb[0] = static_cast<unsigned char>(std::lround(255.0 * r));
  rgb[1] = static_cast<unsigned char>(std::lround(255.0 * g));
  rgb[2] = static_cast<unsigned char>(std::lround(255.0 * b));
}

void write_channel_ppm(const ComplexField& f, std::size_t channel,
                       const std::string& path) {
  const std::size_t h = f.shape.size() == 3 ? f.shape[1] : 1;
  const std::size_t w = f.shape.back();
  double r_max = 0.0;
  for (std::size_t i = 0; i < f.spatial_size(); ++i) {
    r_max = std::max(r_max, std::exp(f.at(channel, i).log_r));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  unsigned char rgb[3];
  for (std::size_t i = 0; i < h * w; ++i) {
    const PolarComplex& z = f.at(channel, i);
    const double hue = (z.theta + kPi) / kTwoPi;
    const double value = r_max > 0.0 ? std::exp(z.log_r) / r_max : 0.0;
    hsv_to_rgb(hue, std::clamp(value, 0.0, 1.0), rgb);
    out.write(reinterpret_cast<const char*>(rgb), 3);
  }
  if (!out) throw std::runtime_error("image write failed: " + path);
}

int cmd_viz(const std::string& input, const std::string& out,
            const std::string& model_path, const std::string& checkpoint,
            long layer, std::size_t channel) {
  require_file(input, "input tensor");
  const ComplexField field = tensor_to_field(load_cplx_complex(input));
  if (layer < 0) {
    if (channel >= field.channels()) {
      throw std::runtime_error("channel out of range");
    }
    write_channel_ppm(field, channel, out);
    std::printf("wrote %s\n", out.c_str());
    return 0;
  }
  if (model_path.empty() || checkpoint.empty()) {
    throw ConfigError("--layer needs --model and --checkpoint");
  }
  require_file(checkpoint, "checkpoint");
  const ModelSpec spec = load_model_checked(model_path);
  const auto params = load_checkpoint(checkpoint, param_count(spec));
  const auto fields = model_layer_fields(compile_model(spec, params), field);
  if (layer == 0 || static_cast<std::size_t>(layer) > fields.size()) {
    throw std::runtime_error("--layer must name a conv or trelu layer (1.." +
                             std::to_string(fields.size()) + ")");
  }
  const ComplexField& resp = fields[static_cast<std::size_t>(layer - 1)];
  // strip a trailing .ppm from the prefix so files end in _chNN.ppm
  std::string prefix = out;
  if (prefix.size() > 4 && prefix.substr(prefix.size() - 4) == ".ppm") {
    prefix.resize(prefix.size() - 4);
  }
  char suffix[32];
  for (std::size_t c = 0; c < resp.channels(); ++c) {
    std::snprintf(suffix, sizeof(suffix), "_ch%02zu.ppm", c);
    write_channel_ppm(resp, c, prefix + suffix);
  }
  std::printf("wrote %zu channel images with prefix %s\n", resp.channels(),
              prefix.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"complex-valued networks on the scaling-rotation manifold"};
  app.require_subcommand(1);
  int rc = 0;

  auto* train = app.add_subcommand("train", "train a model on synthetic data");
  std::string train_config, train_out = "out";
  bool deterministic = false;
  train->add_option("--config", train_config, "run config path")->required();
  train->add_option("--out", train_out, "output directory");
  train->add_flag("--deterministic", deterministic,
                  "single-threaded, bitwise reproducible run");
  train->callback([&] { rc = cmd_train(train_config, train_out, deterministic); });

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, optionally transformed");
  std::string eval_config, eval_ckpt;
  double eval_scale = 1.0, eval_rotate = 0.0;
  bool eval_baseline = false;
  eval->add_option("--config", eval_config, "run config path")->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--scale", eval_scale, "magnitude factor applied to the test set");
  eval->add_option("--rotate", eval_rotate, "phase offset in radians");
  eval->add_flag("--baseline", eval_baseline, "evaluate the reference network");
  eval->callback([&] {
    rc = cmd_eval(eval_config, eval_ckpt, eval_scale, eval_rotate, eval_baseline);
  });

  auto* check = app.add_subcommand("check", "run numeric property suites");
  std::vector<std::string> suites;
  std::size_t trials = 0;
  std::uint64_t check_seed = 2026;
  double tol_scale = 1.0;
  check->add_option("--suite", suites, "suite name (repeatable; default all)");
  check->add_option("--trials", trials, "trial count override");
  check->add_option("--seed", check_seed, "root seed");
  check->add_option("--tolerance-scale", tol_scale,
                    "diagnostic tolerance multiplier (1 = contract)");
  check->callback([&] { rc = cmd_check(suites, trials, check_seed, tol_scale); });

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  std::string synth_mode = "phase", synth_out = "data", synth_extents = "16x16";
  std::size_t synth_classes = 4, synth_n = 50;
  std::uint64_t synth_seed = 0;
  double synth_sigma = 0.3;
  synth->add_option("--mode", synth_mode, "phase | magnitude | mixed");
  synth->add_option("--classes", synth_classes, "class count");
  synth->add_option("--n", synth_n, "samples per class");
  synth->add_option("--seed", synth_seed, "dataset seed");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--extents", synth_extents, "spatial extents, e.g. 16x16 or 128");
  synth->add_option("--sigma", synth_sigma, "noise level");
  synth->callback([&] {
    rc = cmd_synth(synth_mode, synth_classes, synth_n, synth_seed, synth_out,
                   synth_extents, synth_sigma);
  });

  auto* viz = app.add_subcommand("viz", "render phase/magnitude images");
  std::string viz_input, viz_out = "out.ppm", viz_model, viz_ckpt;
  long viz_layer = -1;
  std::size_t viz_channel = 0;
  viz->add_option("--input", viz_input, "input .cplx tensor")->required();
  viz->add_option("--out", viz_out, "output image (or prefix with --layer)");
  viz->add_option("--model", viz_model, "model config for --layer");
  viz->add_option("--checkpoint", viz_ckpt, "checkpoint for --layer");
  viz->add_option("--layer", viz_layer,
                  "dump per-channel responses of this layer (1-based)");
  viz->add_option("--channel", viz_channel, "channel to render without --layer");
  viz->callback([&] {
    rc = cmd_viz(viz_input, viz_out, viz_model, viz_ckpt, viz_layer, viz_channel);
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
