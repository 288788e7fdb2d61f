#include "surreal/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace surreal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::size_t> parse_extent_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    const long long v = std::stoll(trim(part));
    if (v <= 0) throw std::runtime_error("extent must be positive: " + s);
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty() || out.size() > 2) {
    throw std::runtime_error("extents must be rank 1 or 2: " + s);
  }
  return out;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run config: " + path);
  RunConfig rc;
  bool saw_model = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "model") {
        std::filesystem::path p(value);
        if (p.is_relative()) p = std::filesystem::path(path).parent_path() / p;
        rc.model_path = p.string();
        saw_model = true;
      } else if (key == "mode") {
        rc.synth.mode = synth_mode_from_string(value);
      } else if (key == "classes") {
        rc.synth.classes = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "extents") {
        rc.synth.extents = parse_extent_list(value);
      } else if (key == "per_class") {
        rc.synth.per_class = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "sigma") {
        rc.synth.sigma = std::stod(value);
      } else if (key == "data_seed") {
        rc.synth.seed = std::stoull(value);
      } else if (key == "train_fraction") {
        rc.train_fraction = std::stod(value);
      } else if (key == "split_seed") {
        rc.split_seed = std::stoull(value);
      } else if (key == "epochs") {
        rc.train.epochs = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "batch") {
        rc.train.batch_size = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "lr") {
        rc.train.learning_rate = std::stod(value);
      } else if (key == "train_seed") {
        rc.train.seed = std::stoull(value);
      } else if (key == "baseline_hidden") {
        rc.baseline_hidden = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "target") {
        if (value != "complex" && value != "baseline" && value != "both") {
          throw std::runtime_error("target must be complex, baseline, or both");
        }
        rc.target = value;
      } else {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": unknown key: " + key);
      }
    } catch (const std::logic_error&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": bad value for " + key);
    }
  }
  if (!saw_model) throw std::runtime_error(path + ": missing model = <path>");
  return rc;
}

BaselineSpec derive_baseline(const ModelSpec& model, std::size_t hidden) {
  std::size_t spatial = 1;
  for (std::size_t e : model.input_extents) spatial *= e;
  return BaselineSpec{2 * model.in_channels * spatial, hidden, model.classes};
}

ExperimentData make_experiment_data(const RunConfig& rc) {
  const auto data = synth_generate(rc.synth);
  auto [train, test] = split_dataset(data, rc.train_fraction, rc.split_seed);
  return ExperimentData{std::move(train), std::move(test)};
}

}  // namespace surreal
