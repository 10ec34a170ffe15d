#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "eaf/geometry.hpp"

namespace eaf {

struct Box {
  double cx = 0.0, cy = 0.0;  // footprint center, ego meters
  double sx = 0.0, sy = 0.0;  // footprint size
  double height = 0.0;
};

/// Drivable area: axis-aligned band y in [y0, y1] across all x, containing
/// the ego origin.
struct DrivableBand {
  double y0 = 0.0;
  double y1 = 0.0;
};

struct SceneParams {
  int min_boxes = 1;
  int max_boxes = 3;
  double min_size = 0.6;
  double max_size = 1.2;
  double min_height = 0.6;
  double max_height = 1.2;
  // placement region for box centers
  double place_x0 = 1.5, place_x1 = 3.5;
  double place_y0 = -1.5, place_y1 = 1.5;
  double band_halfwidth_min = 1.0;
  double band_halfwidth_max = 2.5;
};

struct SyntheticScene {
  std::vector<Box> boxes;
  DrivableBand drivable;
  std::uint64_t seed = 0;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row-major

  std::uint8_t r(int u, int v) const { return rgb[3 * (v * width + u)]; }
  std::uint8_t g(int u, int v) const { return rgb[3 * (v * width + u) + 1]; }
  std::uint8_t b(int u, int v) const { return rgb[3 * (v * width + u) + 2]; }
};

struct GroundTruth {
  std::vector<std::uint8_t> vehicle;   // grid.num_cells(), query-index order
  std::vector<std::uint8_t> drivable;
};

// splat colors, class-coded
inline constexpr std::uint8_t kVehicleColor[3] = {230, 90, 40};
inline constexpr std::uint8_t kDrivableColor[3] = {70, 110, 200};

/// Boxes sampled uniformly without footprint overlap (rejection, at most
/// 1000 tries per box). Bit-identical for a fixed (seed, params).
SyntheticScene generate_scene(std::uint64_t seed, const SceneParams& params);

/// Point-splat rasterization with a per-pixel depth buffer; no anti-aliasing.
Image render(const SyntheticScene& scene, const CameraView& view,
             double splat_spacing = 0.05);

GroundTruth ground_truth(const SyntheticScene& scene, const BevGrid& grid);

bool boxes_overlap(const Box& a, const Box& b);
bool point_in_box(const Box& b, double x, double y);

nlohmann::json scene_to_json(const SyntheticScene& scene);
SyntheticScene scene_from_json(const nlohmann::json& j);

void write_scene_ppm(const std::string& path, const Image& image);

}  // namespace eaf
