#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eaf/field.hpp"
#include "eaf/synth.hpp"

namespace eaf {

/// Key = value run configuration. Every key has a default; unknown keys are
/// rejected so a typo cannot silently fall back.
struct RunConfig {
  std::string rig;             // path to rig JSON, required for train/eval
  std::string grid = "16x16@0.5";
  double lambda = 1.0;
  bool lambda_learnable = false;
  std::string visibility_mode = "literal";
  bool uniform_weights = false;  // W == 1 ablation

  int d_model = 32;
  int n_heads = 4;
  std::vector<double> scales = {0.0625, 0.25};  // coarse -> fine
  int blocks_per_scale = 1;
  int ff_hidden = 64;

  double focal_gamma = 2.0;
  double focal_alpha = 0.25;

  int steps = 2000;
  double lr_peak = 0.05;
  double momentum = 0.9;
  int eval_interval = 100;
  std::uint64_t seed = 1;

  int train_scenes = 24;
  int eval_scenes = 8;
  std::uint64_t data_seed = 1000;
  int boxes_min = 1;
  int boxes_max = 3;

  std::string out_dir = "out";

  VisibilityMode visibility() const;
  FieldConfig field_config() const;
  SceneParams scene_params() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace eaf
