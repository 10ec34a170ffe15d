#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eaf/geometry.hpp"

namespace eaf {

enum class VisibilityMode {
  kLiteral,  // W = 0 zeroes the attention logit, exactly as written
  kMasked,   // views with an all-zero query row get -inf logits instead
};

struct FieldConfig {
  double lambda = 1.0;  // distance-strength; must be > 0
  bool lambda_learnable = false;
  VisibilityMode visibility_mode = VisibilityMode::kLiteral;
  /// Lower clamp on the cell-to-camera distance; <= 0 means one cell size.
  double min_distance_clamp = -1.0;
};

/// Gaussian attention weights for one (view, scale) pair: n_q BEV queries by
/// n_k feature pixels, row-major. Rows of invisible or degenerate queries are
/// all zero.
struct AttentionField {
  int view_id = 0;
  int scale_id = 0;
  int feature_width = 0;
  int feature_height = 0;
  std::size_t n_q = 0;
  std::size_t n_k = 0;
  std::vector<double> weights;      // n_q * n_k
  std::vector<double> dw_dlambda;   // same layout; filled when lambda_learnable
  std::vector<bool> query_visibility;
  std::vector<double> lambda_q;     // per-query width factor, 0 when invisible
  std::vector<double> distances;    // point-line distances; kept when lambda_learnable
};

/// Per-query, per-camera width factor: d / (f_mean * cell_size) with d the
/// horizontal distance from the cell center to the camera origin, clamped
/// below by min_clamp, and f_mean = (fx + fy) / 2 of the scale-adjusted
/// intrinsics. Throws std::domain_error for an invisible cell.
double lambda_qi(const BevGrid& grid, int i, int j,
                 const CameraView& scaled_view, double min_clamp);

/// exp(-(lambda * lambda_qi)^2 * dist^2)
double field_weight(double dist, double lambda, double lambda_qi);

/// Feature pixels are enumerated row-major at centers (u+0.5, v+0.5, 1).
AttentionField compute_field(const BevGrid& grid, const CameraView& view,
                             int feature_width, int feature_height,
                             const FieldConfig& cfg, int scale_id = 0);

/// One field per (view, scale), ordered by (view index, scale index). Scales
/// are downscale factors applied to the view's image size. Pairs may be
/// computed concurrently; EAF_THREADS caps the worker count.
std::vector<AttentionField> field_bank(const BevGrid& grid,
                                       const std::vector<CameraView>& views,
                                       const std::vector<double>& scales,
                                       const FieldConfig& cfg);

/// Re-evaluates weights (and dw_dlambda) of an existing field for a new
/// lambda. Geometry (distances, visibility) is reused.
void recompute_lambda(AttentionField& field, const BevGrid& grid,
                      const CameraView& scaled_view, const FieldConfig& cfg);

double effective_min_clamp(const FieldConfig& cfg, const BevGrid& grid);

/// Feature size for a view at a downscale factor; throws if not integral.
std::pair<int, int> feature_size_for(const CameraView& view, double scale);

/// 8-bit grayscale PGM (P5) of one query's row; weight 1.0 maps to 255.
void write_field_pgm(const std::string& path, const AttentionField& field,
                     std::size_t query);

}  // namespace eaf
