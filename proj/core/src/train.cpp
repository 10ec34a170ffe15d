#include "eaf/train.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace eaf {

namespace {

void check_rig_images(const std::vector<CameraView>& views) {
  if (views.empty()) throw std::invalid_argument("train: rig has no cameras");
  for (const auto& v : views) {
    if (v.image_width != views[0].image_width ||
        v.image_height != views[0].image_height) {
      throw std::invalid_argument("train: all cameras must share an image size");
    }
  }
}

Tensor targets_tensor(const GroundTruth& gt, const ModelConfig& cfg) {
  const std::size_t n_q = static_cast<std::size_t>(cfg.n_queries());
  std::vector<double> t(n_q * 2);
  for (std::size_t q = 0; q < n_q; ++q) {
    t[q * 2] = gt.vehicle[q];
    t[q * 2 + 1] = gt.drivable[q];
  }
  return Tensor({n_q, 2}, std::move(t));
}

}  // namespace

std::vector<AttentionField> uniform_bank(const BevGrid& grid,
                                         const std::vector<CameraView>& views,
                                         const std::vector<double>& scales) {
  std::vector<AttentionField> bank;
  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    for (std::size_t si = 0; si < scales.size(); ++si) {
      auto [fw, fh] = feature_size_for(views[vi], scales[si]);
      AttentionField f;
      f.view_id = views[vi].view_id;
      f.scale_id = static_cast<int>(si);
      f.feature_width = fw;
      f.feature_height = fh;
      f.n_q = static_cast<std::size_t>(grid.num_cells());
      f.n_k = static_cast<std::size_t>(fw) * fh;
      f.weights.assign(f.n_q * f.n_k, 1.0);
      f.query_visibility.assign(f.n_q, true);
      f.lambda_q.assign(f.n_q, 0.0);
      bank.push_back(std::move(f));
    }
  }
  return bank;
}

std::vector<WeightTensors> scale_weights(const std::vector<AttentionField>& bank,
                                         std::size_t n_views,
                                         std::size_t n_scales,
                                         VisibilityMode mode,
                                         bool w_requires_grad) {
  if (bank.size() != n_views * n_scales) {
    throw std::invalid_argument("scale_weights: bank size mismatch");
  }
  std::vector<WeightTensors> out;
  out.reserve(n_scales);
  for (std::size_t si = 0; si < n_scales; ++si) {
    std::vector<const AttentionField*> fields;
    for (std::size_t vi = 0; vi < n_views; ++vi) {
      fields.push_back(&bank[vi * n_scales + si]);
    }
    out.push_back(make_weight_tensors(fields, mode, w_requires_grad));
  }
  return out;
}

std::vector<SyntheticScene> make_scenes(std::uint64_t base_seed, int count,
                                        const SceneParams& params) {
  std::vector<SyntheticScene> scenes;
  scenes.reserve(count);
  for (int i = 0; i < count; ++i) {
    scenes.push_back(generate_scene(base_seed + static_cast<std::uint64_t>(i), params));
  }
  return scenes;
}

std::vector<Tensor> render_inputs(const SyntheticScene& scene,
                                  const std::vector<CameraView>& views) {
  std::vector<Tensor> inputs;
  inputs.reserve(views.size());
  for (const auto& view : views) {
    const Image img = render(scene, view);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    std::vector<double> data(n * 3);
    for (std::size_t i = 0; i < n * 3; ++i) data[i] = img.rgb[i] / 255.0;
    inputs.emplace_back(std::vector<std::size_t>{n, 3}, std::move(data));
  }
  return inputs;
}

double one_cycle_lr(int step, int total_steps, double peak) {
  const double warm = 0.3 * total_steps;
  if (step < warm) {
    const double t = step / warm;
    return peak / 25.0 + t * (peak - peak / 25.0);
  }
  const double t = (step - warm) / (total_steps - warm);
  const double floor = peak / 1000.0;
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

double bank_sparsity(const std::vector<AttentionField>& bank) {
  std::size_t over = 0, total = 0;
  for (const auto& f : bank) {
    for (double w : f.weights) over += w > 0.5 ? 1 : 0;
    total += f.weights.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(over) / static_cast<double>(total);
}

EvalResult evaluate(const EafModel& model, const Rig& rig,
                    const TrainConfig& cfg,
                    const std::vector<SyntheticScene>& scenes,
                    double lambda_override) {
  check_rig_images(rig.views);
  const ModelConfig& mc = model.config();
  FieldConfig fcfg = cfg.field;
  if (lambda_override > 0.0) fcfg.lambda = lambda_override;

  const std::vector<AttentionField> bank =
      cfg.uniform_weights ? uniform_bank(mc.grid, rig.views, mc.scales)
                          : field_bank(mc.grid, rig.views, mc.scales, fcfg);

  const std::vector<double> edges = {0.0, 10.0, 20.0, 30.0, 40.0, 50.0};
  std::size_t inter_v = 0, uni_v = 0, inter_d = 0, uni_d = 0;
  std::vector<std::size_t> band_inter(edges.size() - 1, 0), band_uni(edges.size() - 1, 0);

  const int iw = rig.views[0].image_width;
  const int ih = rig.views[0].image_height;
  for (const SyntheticScene& scene : scenes) {
    Tape tape;
    const auto weights = scale_weights(bank, rig.views.size(), mc.scales.size(),
                                       mc.visibility_mode, false);
    const Tensor logits = model.forward(tape, render_inputs(scene, rig.views),
                                        iw, ih, weights);
    const GroundTruth gt = ground_truth(scene, mc.grid);
    for (int j = 0; j < mc.grid.cells_y; ++j) {
      for (int i = 0; i < mc.grid.cells_x; ++i) {
        const std::size_t q = static_cast<std::size_t>(mc.grid.query_index(i, j));
        const bool pv = logits(q, 0) > 0.0;
        const bool pd = logits(q, 1) > 0.0;
        const bool gv = gt.vehicle[q] != 0;
        const bool gd = gt.drivable[q] != 0;
        inter_v += (pv && gv) ? 1 : 0;
        uni_v += (pv || gv) ? 1 : 0;
        inter_d += (pd && gd) ? 1 : 0;
        uni_d += (pd || gd) ? 1 : 0;
        const double dist = mc.grid.cell_center(i, j).norm();
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
          if (dist >= edges[b] && dist < edges[b + 1]) {
            band_inter[b] += (pv && gv) ? 1 : 0;
            band_uni[b] += (pv || gv) ? 1 : 0;
            break;
          }
        }
      }
    }
  }

  EvalResult r;
  r.iou_vehicle = uni_v == 0 ? 1.0 : double(inter_v) / double(uni_v);
  r.iou_drivable = uni_d == 0 ? 1.0 : double(inter_d) / double(uni_d);
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    r.banded_vehicle.push_back(band_uni[b] == 0
                                   ? 1.0
                                   : double(band_inter[b]) / double(band_uni[b]));
  }
  return r;
}

TrainResult train_toy(EafModel& model, const Rig& rig, const TrainConfig& cfg,
                      std::ostream* progress) {
  check_rig_images(rig.views);
  const ModelConfig& mc = model.config();
  const int iw = rig.views[0].image_width;
  const int ih = rig.views[0].image_height;

  const auto train_scenes = make_scenes(cfg.data_seed, cfg.train_scenes, cfg.scene_params);
  const auto eval_scenes = make_scenes(cfg.data_seed + 100000,
                                       cfg.eval_scenes, cfg.scene_params);

  // renders and targets are rig-fixed; cache them
  std::vector<std::vector<Tensor>> train_inputs;
  std::vector<Tensor> train_targets;
  for (const auto& scene : train_scenes) {
    train_inputs.push_back(render_inputs(scene, rig.views));
    train_targets.push_back(targets_tensor(ground_truth(scene, mc.grid), mc));
  }

  FieldConfig fcfg = cfg.field;
  const bool learn_lambda = fcfg.lambda_learnable && !cfg.uniform_weights;
  std::vector<AttentionField> bank =
      cfg.uniform_weights ? uniform_bank(mc.grid, rig.views, mc.scales)
                          : field_bank(mc.grid, rig.views, mc.scales, fcfg);

  std::map<std::string, std::vector<double>> velocity;
  for (const auto& [name, t] : model.params()) {
    velocity[name] = std::vector<double>(t.size(), 0.0);
  }
  double lambda_vel = 0.0;

  TrainResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    const int scene_idx = step % cfg.train_scenes;
    Tape tape;
    auto weights = scale_weights(bank, rig.views.size(), mc.scales.size(),
                                 mc.visibility_mode, learn_lambda);
    Tensor logits = model.forward(tape, train_inputs[scene_idx], iw, ih, weights);
    Tensor loss = focal_loss(tape, logits, train_targets[scene_idx], cfg.loss);
    const double loss_v = loss.value();
    if (!std::isfinite(loss_v)) {
      throw std::runtime_error("train: loss diverged (NaN/Inf) at step " +
                               std::to_string(step));
    }
    tape.backward(loss);

    const double lr = one_cycle_lr(step, cfg.steps, cfg.lr_peak);
    for (auto& [name, t] : model.params()) {
      const auto g = t.grad();
      auto& v = velocity[name];
      auto& d = t.mutable_data();
      for (std::size_t i = 0; i < d.size(); ++i) {
        v[i] = cfg.momentum * v[i] - lr * g[i];
        d[i] += v[i];
      }
      t.zero_grad();
    }

    if (learn_lambda) {
      double lambda_grad = 0.0;
      for (std::size_t si = 0; si < mc.scales.size(); ++si) {
        const auto wgrad = weights[si].w.grad();
        const std::size_t total_k = weights[si].w.cols();
        std::size_t off = 0;
        for (const AttentionField* f : weights[si].fields) {
          for (std::size_t q = 0; q < f->n_q; ++q) {
            const double* dwdl = f->dw_dlambda.data() + q * f->n_k;
            const double* wg = wgrad.data() + q * total_k + off;
            for (std::size_t k = 0; k < f->n_k; ++k) lambda_grad += wg[k] * dwdl[k];
          }
          off += f->n_k;
        }
      }
      lambda_vel = cfg.momentum * lambda_vel - lr * lambda_grad;
      fcfg.lambda = std::max(fcfg.lambda + lambda_vel, 1e-3);
      for (auto& f : bank) recompute_lambda(f, mc.grid, rig.views[0], fcfg);
    }

    if ((step + 1) % cfg.eval_interval == 0 || step + 1 == cfg.steps) {
      TrainConfig ecfg = cfg;
      ecfg.field = fcfg;
      const EvalResult ev = evaluate(model, rig, ecfg, eval_scenes);
      result.log.push_back({step + 1, loss_v, ev.iou_vehicle, ev.iou_drivable});
      if (progress) {
        (*progress) << "step " << (step + 1) << " loss " << loss_v
                    << " iou_vehicle " << ev.iou_vehicle << " iou_drivable "
                    << ev.iou_drivable << " lambda " << fcfg.lambda << "\n";
      }
    }
  }

  result.final_lambda = fcfg.lambda;
  result.field_sparsity = bank_sparsity(bank);
  return result;
}

}  // namespace eaf
