#include "eaf/synth.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "eaf/image_io.hpp"

namespace eaf {

namespace {

// Ground splat extent along x, meters; generous vs. the toy grids in use.
constexpr double kGroundExtent = 6.0;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53-bit mantissa draw; stable across standard library implementations.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

}  // namespace

bool point_in_box(const Box& b, double x, double y) {
  return std::abs(x - b.cx) <= 0.5 * b.sx && std::abs(y - b.cy) <= 0.5 * b.sy;
}

bool boxes_overlap(const Box& a, const Box& b) {
  return std::abs(a.cx - b.cx) < 0.5 * (a.sx + b.sx) &&
         std::abs(a.cy - b.cy) < 0.5 * (a.sy + b.sy);
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneParams& p) {
  if (p.min_boxes < 0 || p.max_boxes < p.min_boxes || p.min_size <= 0.0 ||
      p.max_size < p.min_size) {
    throw std::invalid_argument("generate_scene: invalid parameter ranges");
  }
  std::mt19937_64 rng(seed);
  SyntheticScene scene;
  scene.seed = seed;

  const int count =
      p.min_boxes +
      static_cast<int>(rng() % static_cast<std::uint64_t>(p.max_boxes - p.min_boxes + 1));
  for (int n = 0; n < count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Box b;
      b.sx = uniform(rng, p.min_size, p.max_size);
      b.sy = uniform(rng, p.min_size, p.max_size);
      b.height = uniform(rng, p.min_height, p.max_height);
      b.cx = uniform(rng, p.place_x0, p.place_x1);
      b.cy = uniform(rng, p.place_y0, p.place_y1);
      bool collides = false;
      for (const Box& other : scene.boxes) {
        if (boxes_overlap(b, other)) {
          collides = true;
          break;
        }
      }
      if (!collides) {
        scene.boxes.push_back(b);
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw std::runtime_error("generate_scene: box placement failed after 1000 tries");
    }
  }

  const double hw = uniform(rng, p.band_halfwidth_min, p.band_halfwidth_max);
  const double off = uniform(rng, -hw, hw);  // band always contains the ego origin
  scene.drivable.y0 = off - hw;
  scene.drivable.y1 = off + hw;
  return scene;
}

namespace {

struct Splatter {
  const CameraView& view;
  Image& img;
  std::vector<double>& depth;

  void splat(const Eigen::Vector3d& p, const std::uint8_t color[3]) {
    const Eigen::Vector3d c = view.rotation * p + view.translation;
    if (c.z() <= 1e-6) return;
    const int u = static_cast<int>(std::floor(view.fx() * c.x() / c.z() + view.cx()));
    const int v = static_cast<int>(std::floor(view.fy() * c.y() / c.z() + view.cy()));
    if (u < 0 || v < 0 || u >= img.width || v >= img.height) return;
    const std::size_t idx = static_cast<std::size_t>(v) * img.width + u;
    if (c.z() >= depth[idx]) return;
    depth[idx] = c.z();
    img.rgb[3 * idx] = color[0];
    img.rgb[3 * idx + 1] = color[1];
    img.rgb[3 * idx + 2] = color[2];
  }
};

}  // namespace

Image render(const SyntheticScene& scene, const CameraView& view,
             double spacing) {
  Image img;
  img.width = view.image_width;
  img.height = view.image_height;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
  std::vector<double> depth(static_cast<std::size_t>(img.width) * img.height,
                            std::numeric_limits<double>::infinity());
  Splatter sp{view, img, depth};

  // drivable ground
  for (double x = -kGroundExtent; x <= kGroundExtent; x += spacing) {
    for (double y = scene.drivable.y0; y <= scene.drivable.y1; y += spacing) {
      sp.splat({x, y, 0.0}, kDrivableColor);
    }
  }

  // box surfaces: top face plus the four sides
  for (const Box& b : scene.boxes) {
    const double x0 = b.cx - 0.5 * b.sx, x1 = b.cx + 0.5 * b.sx;
    const double y0 = b.cy - 0.5 * b.sy, y1 = b.cy + 0.5 * b.sy;
    for (double x = x0; x <= x1; x += spacing) {
      for (double y = y0; y <= y1; y += spacing) {
        sp.splat({x, y, b.height}, kVehicleColor);
      }
    }
    for (double z = 0.0; z <= b.height; z += spacing) {
      for (double x = x0; x <= x1; x += spacing) {
        sp.splat({x, y0, z}, kVehicleColor);
        sp.splat({x, y1, z}, kVehicleColor);
      }
      for (double y = y0; y <= y1; y += spacing) {
        sp.splat({x0, y, z}, kVehicleColor);
        sp.splat({x1, y, z}, kVehicleColor);
      }
    }
  }
  return img;
}

GroundTruth ground_truth(const SyntheticScene& scene, const BevGrid& grid) {
  GroundTruth gt;
  gt.vehicle.assign(grid.num_cells(), 0);
  gt.drivable.assign(grid.num_cells(), 0);
  for (int j = 0; j < grid.cells_y; ++j) {
    for (int i = 0; i < grid.cells_x; ++i) {
      const Eigen::Vector2d c = grid.cell_center(i, j);
      const int q = grid.query_index(i, j);
      for (const Box& b : scene.boxes) {
        if (point_in_box(b, c.x(), c.y())) {
          gt.vehicle[q] = 1;
          break;
        }
      }
      if (c.y() >= scene.drivable.y0 && c.y() <= scene.drivable.y1) {
        gt.drivable[q] = 1;
      }
    }
  }
  return gt;
}

nlohmann::json scene_to_json(const SyntheticScene& scene) {
  nlohmann::json j;
  j["seed"] = scene.seed;
  j["drivable"] = {{"y0", scene.drivable.y0}, {"y1", scene.drivable.y1}};
  j["boxes"] = nlohmann::json::array();
  for (const Box& b : scene.boxes) {
    j["boxes"].push_back({{"cx", b.cx},
                          {"cy", b.cy},
                          {"sx", b.sx},
                          {"sy", b.sy},
                          {"height", b.height}});
  }
  return j;
}

SyntheticScene scene_from_json(const nlohmann::json& j) {
  SyntheticScene scene;
  scene.seed = j.at("seed").get<std::uint64_t>();
  scene.drivable.y0 = j.at("drivable").at("y0").get<double>();
  scene.drivable.y1 = j.at("drivable").at("y1").get<double>();
  for (const auto& bj : j.at("boxes")) {
    Box b;
    b.cx = bj.at("cx").get<double>();
    b.cy = bj.at("cy").get<double>();
    b.sx = bj.at("sx").get<double>();
    b.sy = bj.at("sy").get<double>();
    b.height = bj.at("height").get<double>();
    scene.boxes.push_back(b);
  }
  return scene;
}

void write_scene_ppm(const std::string& path, const Image& image) {
  write_ppm(path, image.width, image.height, image.rgb);
}

}  // namespace eaf
