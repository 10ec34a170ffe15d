#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "eaf/field.hpp"
#include "eaf/model.hpp"
#include "eaf/rig.hpp"
#include "eaf/synth.hpp"

namespace eaf {

struct TrainConfig {
  LossConfig loss;
  FieldConfig field;
  bool uniform_weights = false;  // W == 1 baseline ablation
  SceneParams scene_params;
  int steps = 2000;
  int eval_interval = 100;
  double lr_peak = 0.05;
  double momentum = 0.9;
  int train_scenes = 24;
  int eval_scenes = 8;
  std::uint64_t data_seed = 1000;
};

struct MetricRow {
  int step = 0;
  double loss = 0.0;
  double iou_vehicle = 0.0;
  double iou_drivable = 0.0;
};

struct EvalResult {
  double iou_vehicle = 0.0;
  double iou_drivable = 0.0;
  std::vector<double> banded_vehicle;  // per distance band
};

struct TrainResult {
  std::vector<MetricRow> log;
  double final_lambda = 0.0;
  double field_sparsity = 0.0;  // fraction of field weights > 0.5
};

/// All-ones stand-in bank matching the geometry of a real field bank.
std::vector<AttentionField> uniform_bank(const BevGrid& grid,
                                         const std::vector<CameraView>& views,
                                         const std::vector<double>& scales);

/// One WeightTensors per scale from a (view-major) field bank.
std::vector<WeightTensors> scale_weights(const std::vector<AttentionField>& bank,
                                         std::size_t n_views,
                                         std::size_t n_scales,
                                         VisibilityMode mode,
                                         bool w_requires_grad);

/// Deterministic scene set: seeds base, base+1, ...
std::vector<SyntheticScene> make_scenes(std::uint64_t base_seed, int count,
                                        const SceneParams& params);

/// Renders every view of a scene and packs images as (H*W) x C tensors
/// scaled to [0, 1].
std::vector<Tensor> render_inputs(const SyntheticScene& scene,
                                  const std::vector<CameraView>& views);

double one_cycle_lr(int step, int total_steps, double peak);

/// Aggregate IoU over scenes (global intersection / union), logits
/// thresholded at 0.5 probability. lambda_override, when > 0, recomputes a
/// learnable-lambda bank before evaluating.
EvalResult evaluate(const EafModel& model, const Rig& rig,
                    const TrainConfig& cfg,
                    const std::vector<SyntheticScene>& scenes,
                    double lambda_override = -1.0);

/// Momentum-SGD training under a one-cycle schedule. Deterministic for a
/// fixed (model seed, data_seed). Aborts with a diagnostic on NaN loss.
/// progress, when given, receives one line per eval interval.
TrainResult train_toy(EafModel& model, const Rig& rig, const TrainConfig& cfg,
                      std::ostream* progress = nullptr);

/// Fraction of bank weights above 0.5 (field width statistic).
double bank_sparsity(const std::vector<AttentionField>& bank);

}  // namespace eaf
