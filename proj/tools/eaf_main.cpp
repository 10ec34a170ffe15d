// Command-line front end: epipolar field heatmaps, geometric self-checks,
// toy training and evaluation on synthetic scenes.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eaf/checkpoint.hpp"
#include "eaf/field.hpp"
#include "eaf/geometry.hpp"
#include "eaf/image_io.hpp"
#include "eaf/model.hpp"
#include "eaf/rig.hpp"
#include "eaf/run_config.hpp"
#include "eaf/train.hpp"

namespace fs = std::filesystem;
using namespace eaf;

namespace {

double rng_uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

struct FieldsArgs {
  std::string rig_path;
  std::string grid_spec = "16x16@0.5";
  double scale = 0.25;
  double lambda = 1.0;
  std::string query = "8,8";
  std::string out_dir = "fields_out";
};

int run_fields(const FieldsArgs& args) {
  const Rig rig = load_rig(args.rig_path);
  const BevGrid grid = parse_grid_spec(args.grid_spec);

  const auto comma = args.query.find(',');
  if (comma == std::string::npos) {
    throw std::invalid_argument("fields: --query expects I,J");
  }
  const int qi = std::stoi(args.query.substr(0, comma));
  const int qj = std::stoi(args.query.substr(comma + 1));
  if (qi < 0 || qj < 0 || qi >= grid.cells_x || qj >= grid.cells_y) {
    throw std::invalid_argument("fields: query cell outside the grid");
  }
  const std::size_t q = static_cast<std::size_t>(grid.query_index(qi, qj));

  FieldConfig fcfg;
  fcfg.lambda = args.lambda;

  fs::create_directories(args.out_dir);
  std::ofstream index(fs::path(args.out_dir) / "index.txt");
  bool any_visible = false;
  for (std::size_t vi = 0; vi < rig.views.size(); ++vi) {
    auto [fw, fh] = feature_size_for(rig.views[vi], args.scale);
    const AttentionField field =
        compute_field(grid, rig.views[vi], fw, fh, fcfg);
    any_visible = any_visible || field.query_visibility[q];
    const std::string file = "field_" + rig.names[vi] + ".pgm";
    write_field_pgm((fs::path(args.out_dir) / file).string(), field, q);
    index << file << " view=" << rig.names[vi] << " view_id=" << field.view_id
          << " query=" << qi << "," << qj << "\n";
  }
  if (!any_visible) {
    std::cerr << "warning: query cell (" << qi << "," << qj
              << ") is not visible in any view; maps are all black\n";
  }
  return 0;
}

struct VerifyArgs {
  std::string rig_path;
  std::string grid_spec = "16x16@0.5";
  int samples = 100;
  std::uint64_t seed = 1;
};

int run_verify(const VerifyArgs& args) {
  const Rig rig = load_rig(args.rig_path);
  const BevGrid grid = parse_grid_spec(args.grid_spec);
  for (const auto& v : rig.views) v.validate();

  std::mt19937_64 rng(args.seed);
  double max_residual = 0.0;
  double max_dist_err = 0.0;
  double max_width_err = 0.0;
  std::string first_failure;

  const FieldConfig fcfg;
  const double clamp = effective_min_clamp(fcfg, grid);

  int checked = 0;
  for (int s = 0; s < args.samples; ++s) {
    const int i = static_cast<int>(rng() % static_cast<std::uint64_t>(grid.cells_x));
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(grid.cells_y));
    for (std::size_t vi = 0; vi < rig.views.size(); ++vi) {
      const CameraView& view = rig.views[vi];
      if (!cheirality(view, grid, i, j)) continue;
      const EpipolarLine line = epipolar_line(view, grid, i, j);
      if (line.degenerate) continue;
      ++checked;

      // ray samples with positive depth must land on the line
      const Eigen::Vector2d c = grid.cell_center(i, j);
      for (int n = 0; n < 100; ++n) {
        const double z = grid.ground_height - 2.0 + 0.05 * n;
        const Eigen::Vector3d p(c.x(), c.y(), z);
        const Eigen::Vector3d cam = view.rotation * p + view.translation;
        if (cam.z() < 1e-6) continue;
        const auto proj = project(view, p);
        const double res = std::abs(point_line_distance(
            {proj.pixel.x(), proj.pixel.y(), 1.0}, line));
        if (res > max_residual) max_residual = res;
        if (res > 1e-6 && first_failure.empty()) {
          first_failure = "line residual at cell (" + std::to_string(i) + "," +
                          std::to_string(j) + ") view " + rig.names[vi];
        }
      }

      // |x . l| against a brute-force scan along the line
      const Eigen::Vector3d x(rng_uniform(rng, 0, view.image_width),
                              rng_uniform(rng, 0, view.image_height), 1.0);
      const double analytic = std::abs(point_line_distance(x, line));
      const Eigen::Vector2d dir(-line.b, line.a);
      const Eigen::Vector2d on_line(-line.a * line.c, -line.b * line.c);
      const double t0 = (x.head<2>() - on_line).dot(dir);
      double best = std::numeric_limits<double>::infinity();
      for (int n = 0; n < 100000; ++n) {
        const double t = t0 - 50.0 + 100.0 * n / 99999.0;
        best = std::min(best, (on_line + t * dir - x.head<2>()).norm());
      }
      const double derr = std::abs(analytic - best);
      if (derr > max_dist_err) max_dist_err = derr;
      if (derr > 1e-3 && first_failure.empty()) {
        first_failure = "distance oracle at cell (" + std::to_string(i) + "," +
                        std::to_string(j) + ") view " + rig.names[vi];
      }

      // width law: sigma ratio equals camera-distance ratio above the clamp
      const int i2 = static_cast<int>(rng() % static_cast<std::uint64_t>(grid.cells_x));
      const int j2 = static_cast<int>(rng() % static_cast<std::uint64_t>(grid.cells_y));
      if (cheirality(view, grid, i2, j2)) {
        const Eigen::Vector2d cam_xy = view.center().head<2>();
        const double d1 = (grid.cell_center(i, j) - cam_xy).norm();
        const double d2 = (grid.cell_center(i2, j2) - cam_xy).norm();
        if (d1 > clamp && d2 > clamp) {
          const double l1 = lambda_qi(grid, i, j, view, clamp);
          const double l2 = lambda_qi(grid, i2, j2, view, clamp);
          // sigma is inversely proportional to lambda_qi
          const double werr = std::abs(l2 / l1 - d2 / d1);
          if (werr > max_width_err) max_width_err = werr;
          if (werr > 1e-9 && first_failure.empty()) {
            first_failure = "width law at cells (" + std::to_string(i) + "," +
                            std::to_string(j) + ")/(" + std::to_string(i2) +
                            "," + std::to_string(j2) + ") view " + rig.names[vi];
          }
        }
      }
    }
  }

  std::cout << "checked " << checked << " (cell, view) pairs\n";
  std::cout << "max line residual: " << max_residual << " px (tol 1e-6)\n";
  std::cout << "max distance-oracle error: " << max_dist_err << " px (tol 1e-3)\n";
  std::cout << "max width-law error: " << max_width_err << " (tol 1e-9)\n";
  if (!first_failure.empty()) {
    std::cerr << "FAIL: " << first_failure << "\n";
    return 1;
  }
  return 0;
}

ModelConfig model_config_from(const RunConfig& cfg) {
  ModelConfig mc;
  mc.grid = parse_grid_spec(cfg.grid);
  mc.d_model = cfg.d_model;
  mc.n_heads = cfg.n_heads;
  mc.scales = cfg.scales;
  mc.blocks_per_scale = cfg.blocks_per_scale;
  mc.ff_hidden = cfg.ff_hidden;
  mc.visibility_mode = cfg.visibility();
  mc.seed = cfg.seed;
  return mc;
}

TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig tc;
  tc.loss.gamma = cfg.focal_gamma;
  tc.loss.alpha = cfg.focal_alpha;
  tc.field = cfg.field_config();
  tc.uniform_weights = cfg.uniform_weights;
  tc.scene_params = cfg.scene_params();
  tc.steps = cfg.steps;
  tc.eval_interval = cfg.eval_interval;
  tc.lr_peak = cfg.lr_peak;
  tc.momentum = cfg.momentum;
  tc.train_scenes = cfg.train_scenes;
  tc.eval_scenes = cfg.eval_scenes;
  tc.data_seed = cfg.data_seed;
  return tc;
}

int run_train(const std::string& config_path) {
  const RunConfig cfg = load_run_config(config_path);
  if (cfg.rig.empty()) throw std::invalid_argument("train: config needs rig=PATH");
  const Rig rig = load_rig(cfg.rig);
  const ModelConfig mc = model_config_from(cfg);
  const TrainConfig tc = train_config_from(cfg);

  EafModel model(mc);
  const TrainResult result = train_toy(model, rig, tc, &std::cout);

  fs::create_directories(cfg.out_dir);
  std::ofstream csv(fs::path(cfg.out_dir) / "metrics.csv");
  csv << "step,loss,iou_vehicle,iou_drivable\n";
  csv.precision(17);
  for (const auto& row : result.log) {
    csv << row.step << "," << row.loss << "," << row.iou_vehicle << ","
        << row.iou_drivable << "\n";
  }

  auto params = model.params();
  params.emplace("lambda", Tensor::scalar(result.final_lambda));
  save_checkpoint((fs::path(cfg.out_dir) / "checkpoint.bin").string(), params);

  std::cout << "final lambda: " << result.final_lambda << "\n";
  std::cout << "field fraction over 0.5: " << result.field_sparsity << "\n";
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "metrics.csv").string()
            << " and checkpoint.bin\n";
  return 0;
}

int run_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& perturb_spec) {
  const RunConfig cfg = load_run_config(config_path);
  if (cfg.rig.empty()) throw std::invalid_argument("eval: config needs rig=PATH");
  Rig rig = load_rig(cfg.rig);
  const ModelConfig mc = model_config_from(cfg);
  TrainConfig tc = train_config_from(cfg);

  EafModel model(mc);
  auto loaded = load_checkpoint(checkpoint_path);
  double lambda_override = -1.0;
  if (const auto it = loaded.find("lambda"); it != loaded.end()) {
    lambda_override = it->second.value();
    loaded.erase(it);
  }
  restore_params(model.params(), loaded);

  if (!perturb_spec.empty()) {
    const RigPerturbation p = parse_perturbation_spec(perturb_spec);
    rig = perturb_rig(rig, p);
    std::cout << "perturbation applied: " << perturb_spec
              << " (fields recomputed from perturbed calibration)\n";
  }

  const auto scenes = make_scenes(tc.data_seed + 100000, tc.eval_scenes,
                                  tc.scene_params);
  const EvalResult ev = evaluate(model, rig, tc, scenes, lambda_override);
  std::cout << "iou_vehicle: " << ev.iou_vehicle << "\n";
  std::cout << "iou_drivable: " << ev.iou_drivable << "\n";
  for (std::size_t b = 0; b < ev.banded_vehicle.size(); ++b) {
    std::cout << "iou_vehicle_" << b * 10 << "_" << (b + 1) * 10
              << "m: " << ev.banded_vehicle[b] << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Epipolar attention fields: heatmaps, geometric verification, toy training"};
  app.require_subcommand(1);

  FieldsArgs fields_args;
  auto* fields = app.add_subcommand("fields", "Write per-camera field heatmaps for one BEV query");
  fields->add_option("--rig", fields_args.rig_path, "Rig JSON file")->required();
  fields->add_option("--grid", fields_args.grid_spec, "Grid spec CXxCY@CELL");
  fields->add_option("--scale", fields_args.scale, "Feature downscale factor");
  fields->add_option("--lambda", fields_args.lambda, "Distance-strength");
  fields->add_option("--query", fields_args.query, "Query cell I,J");
  fields->add_option("--out", fields_args.out_dir, "Output directory");

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Run the brute-force epipolar oracles");
  verify->add_option("--rig", verify_args.rig_path, "Rig JSON file")->required();
  verify->add_option("--grid", verify_args.grid_spec, "Grid spec CXxCY@CELL");
  verify->add_option("--samples", verify_args.samples, "Random cells to check");
  verify->add_option("--seed", verify_args.seed, "RNG seed");

  std::string train_config;
  auto* train = app.add_subcommand("train", "Train the toy model per a run config");
  train->add_option("--config", train_config, "Run config file")->required();

  std::string eval_config, eval_checkpoint, eval_perturb;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out scenes");
  eval->add_option("--config", eval_config, "Run config file")->required();
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval->add_option("--perturb-rig", eval_perturb, "Perturbation spec yaw=DEG,trans=M,seed=N");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fields->parsed()) return run_fields(fields_args);
    if (verify->parsed()) return run_verify(verify_args);
    if (train->parsed()) return run_train(train_config);
    if (eval->parsed()) return run_eval(eval_config, eval_checkpoint, eval_perturb);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
