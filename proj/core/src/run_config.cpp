#include "eaf/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eaf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("config: key '" + key + "' expects a boolean");
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(trim(item)));
  return out;
}

}  // namespace

VisibilityMode RunConfig::visibility() const {
  if (visibility_mode == "literal") return VisibilityMode::kLiteral;
  if (visibility_mode == "masked") return VisibilityMode::kMasked;
  throw std::invalid_argument("config: visibility_mode must be literal or masked");
}

FieldConfig RunConfig::field_config() const {
  FieldConfig f;
  f.lambda = lambda;
  f.lambda_learnable = lambda_learnable;
  f.visibility_mode = visibility();
  return f;
}

SceneParams RunConfig::scene_params() const {
  SceneParams p;
  p.min_boxes = boxes_min;
  p.max_boxes = boxes_max;
  return p;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "rig") cfg.rig = value;
    else if (key == "grid") cfg.grid = value;
    else if (key == "lambda") cfg.lambda = std::stod(value);
    else if (key == "lambda_learnable") cfg.lambda_learnable = parse_bool(key, value);
    else if (key == "visibility_mode") cfg.visibility_mode = value;
    else if (key == "uniform_weights") cfg.uniform_weights = parse_bool(key, value);
    else if (key == "d_model") cfg.d_model = std::stoi(value);
    else if (key == "n_heads") cfg.n_heads = std::stoi(value);
    else if (key == "scales") cfg.scales = parse_list(value);
    else if (key == "blocks_per_scale") cfg.blocks_per_scale = std::stoi(value);
    else if (key == "ff_hidden") cfg.ff_hidden = std::stoi(value);
    else if (key == "focal_gamma") cfg.focal_gamma = std::stod(value);
    else if (key == "focal_alpha") cfg.focal_alpha = std::stod(value);
    else if (key == "steps") cfg.steps = std::stoi(value);
    else if (key == "lr_peak") cfg.lr_peak = std::stod(value);
    else if (key == "momentum") cfg.momentum = std::stod(value);
    else if (key == "eval_interval") cfg.eval_interval = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "train_scenes") cfg.train_scenes = std::stoi(value);
    else if (key == "eval_scenes") cfg.eval_scenes = std::stoi(value);
    else if (key == "data_seed") cfg.data_seed = std::stoull(value);
    else if (key == "boxes_min") cfg.boxes_min = std::stoi(value);
    else if (key == "boxes_max") cfg.boxes_max = std::stoi(value);
    else if (key == "out_dir") cfg.out_dir = value;
    else {
      throw std::invalid_argument("config: unknown key '" + key + "' (line " +
                                  std::to_string(lineno) + ")");
    }
  }
  cfg.visibility();  // validates the mode string
  if (cfg.lambda <= 0.0) throw std::invalid_argument("config: lambda must be > 0");
  if (cfg.focal_gamma < 0.0) throw std::invalid_argument("config: focal_gamma must be >= 0");
  if (cfg.focal_alpha <= 0.0 || cfg.focal_alpha >= 1.0) {
    throw std::invalid_argument("config: focal_alpha must be in (0,1)");
  }
  if (cfg.scales.empty()) throw std::invalid_argument("config: scales must be non-empty");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace eaf
