#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eaf/attention.hpp"
#include "eaf/field.hpp"
#include "eaf/geometry.hpp"
#include "eaf/tensor.hpp"

namespace eaf {

struct ModelConfig {
  BevGrid grid = BevGrid::centered(16, 16, 0.5);
  int d_model = 32;
  int n_heads = 4;
  std::vector<double> scales = {0.0625, 0.25};  // coarse -> fine
  int blocks_per_scale = 1;
  int ff_hidden = 64;
  int image_channels = 3;
  std::vector<std::string> class_names = {"vehicle", "drivable"};
  VisibilityMode visibility_mode = VisibilityMode::kLiteral;
  std::uint64_t seed = 1;

  int n_queries() const { return grid.num_cells(); }
  int n_classes() const { return static_cast<int>(class_names.size()); }
  void validate() const;
};

struct LossConfig {
  double gamma = 2.0;
  double alpha = 0.25;
};

/// BEV encoder-decoder over epipolar-field weighted cross attention:
/// patch-pool backbone -> per-scale encoder blocks -> 3x3 mixing decoder.
/// Parameters live in a name-keyed map so checkpoints are self-describing.
class EafModel {
 public:
  explicit EafModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::map<std::string, Tensor>& params() { return params_; }
  const std::map<std::string, Tensor>& params() const { return params_; }

  /// images: one (H*W) x C tensor per view, all views the same size.
  /// weights: one WeightTensors per scale (coarse -> fine order matching
  /// cfg.scales). Returns n_q x n_classes logits.
  Tensor forward(Tape& tape, const std::vector<Tensor>& images, int image_width,
                 int image_height,
                 const std::vector<WeightTensors>& weights) const;

 private:
  Tensor backbone(Tape& tape, const Tensor& image, int image_width,
                  int image_height, std::size_t scale_idx) const;
  Tensor decoder(Tape& tape, const Tensor& bev) const;
  BlockParams block_params(std::size_t scale_idx, int block) const;

  ModelConfig cfg_;
  std::map<std::string, Tensor> params_;
  std::vector<std::ptrdiff_t> neighbor_index_;  // 3x3 gather, -1 pads zero
};

/// Mean over elements of -alpha_t (1 - p_t)^gamma log(p_t) with
/// p_t = sigmoid(logit) for target 1 and 1 - sigmoid otherwise.
Tensor focal_loss(Tape& tape, const Tensor& logits, const Tensor& targets,
                  const LossConfig& cfg);

/// |pred & gt| / |pred | gt|; empty union counts as 1.
double iou(const std::vector<std::uint8_t>& pred,
           const std::vector<std::uint8_t>& gt);

/// IoU restricted to cells whose center distance to the ego origin falls in
/// [edges[b], edges[b+1]). Returns edges.size() - 1 values.
std::vector<double> distance_banded_iou(const std::vector<std::uint8_t>& pred,
                                        const std::vector<std::uint8_t>& gt,
                                        const BevGrid& grid,
                                        const std::vector<double>& edges);

}  // namespace eaf
