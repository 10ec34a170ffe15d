#include "eaf/field.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "eaf/image_io.hpp"

namespace eaf {

double effective_min_clamp(const FieldConfig& cfg, const BevGrid& grid) {
  return cfg.min_distance_clamp > 0.0 ? cfg.min_distance_clamp : grid.cell_size;
}

double lambda_qi(const BevGrid& grid, int i, int j,
                 const CameraView& scaled_view, double min_clamp) {
  if (!cheirality(scaled_view, grid, i, j)) {
    throw std::domain_error("lambda_qi: cell is not visible to the camera");
  }
  const Eigen::Vector2d cell = grid.cell_center(i, j);
  const Eigen::Vector3d cam = scaled_view.center();
  const double d =
      std::max((cell - cam.head<2>()).norm(), min_clamp);
  const double f_mean = 0.5 * (scaled_view.fx() + scaled_view.fy());
  return d / (f_mean * grid.cell_size);
}

double field_weight(double dist, double lambda, double lqi) {
  const double s = lambda * lqi * dist;
  return std::exp(-s * s);
}

std::pair<int, int> feature_size_for(const CameraView& view, double scale) {
  const double fw = view.image_width * scale;
  const double fh = view.image_height * scale;
  const int iw = static_cast<int>(std::lround(fw));
  const int ih = static_cast<int>(std::lround(fh));
  if (iw <= 0 || ih <= 0 || std::abs(fw - iw) > 1e-9 || std::abs(fh - ih) > 1e-9) {
    throw std::invalid_argument("feature_size_for: image size not divisible at scale");
  }
  return {iw, ih};
}

AttentionField compute_field(const BevGrid& grid, const CameraView& view,
                             int feature_width, int feature_height,
                             const FieldConfig& cfg, int scale_id) {
  if (feature_width <= 0 || feature_height <= 0) {
    throw std::invalid_argument("compute_field: feature size must be positive");
  }
  if (cfg.lambda <= 0.0) {
    throw std::invalid_argument("compute_field: lambda must be positive");
  }
  const CameraView scaled = scale_intrinsics(view, feature_width, feature_height);
  const double clamp = effective_min_clamp(cfg, grid);

  AttentionField f;
  f.view_id = view.view_id;
  f.scale_id = scale_id;
  f.feature_width = feature_width;
  f.feature_height = feature_height;
  f.n_q = static_cast<std::size_t>(grid.num_cells());
  f.n_k = static_cast<std::size_t>(feature_width) * feature_height;
  f.weights.assign(f.n_q * f.n_k, 0.0);
  f.query_visibility.assign(f.n_q, false);
  f.lambda_q.assign(f.n_q, 0.0);
  if (cfg.lambda_learnable) {
    f.dw_dlambda.assign(f.n_q * f.n_k, 0.0);
    f.distances.assign(f.n_q * f.n_k, 0.0);
  }

  for (int j = 0; j < grid.cells_y; ++j) {
    for (int i = 0; i < grid.cells_x; ++i) {
      const std::size_t q = static_cast<std::size_t>(grid.query_index(i, j));
      if (!cheirality(scaled, grid, i, j)) continue;
      const EpipolarLine line = epipolar_line(scaled, grid, i, j);
      if (line.degenerate) continue;
      const double lqi = lambda_qi(grid, i, j, scaled, clamp);
      f.query_visibility[q] = true;
      f.lambda_q[q] = lqi;
      double* row = f.weights.data() + q * f.n_k;
      for (int v = 0; v < feature_height; ++v) {
        for (int u = 0; u < feature_width; ++u) {
          const std::size_t k = static_cast<std::size_t>(v) * feature_width + u;
          const double dist = point_line_distance(
              Eigen::Vector3d(u + 0.5, v + 0.5, 1.0), line);
          const double w = field_weight(dist, cfg.lambda, lqi);
          row[k] = w;
          if (cfg.lambda_learnable) {
            f.distances[q * f.n_k + k] = dist;
            f.dw_dlambda[q * f.n_k + k] =
                -2.0 * cfg.lambda * lqi * lqi * dist * dist * w;
          }
        }
      }
    }
  }
  return f;
}

void recompute_lambda(AttentionField& field, const BevGrid& /*grid*/,
                      const CameraView& /*scaled_view*/, const FieldConfig& cfg) {
  if (field.distances.empty()) {
    throw std::logic_error("recompute_lambda: field was not built with lambda_learnable");
  }
  if (cfg.lambda <= 0.0) {
    throw std::invalid_argument("recompute_lambda: lambda must be positive");
  }
  field.dw_dlambda.assign(field.n_q * field.n_k, 0.0);
  for (std::size_t q = 0; q < field.n_q; ++q) {
    if (!field.query_visibility[q]) continue;
    const double lqi = field.lambda_q[q];
    for (std::size_t k = 0; k < field.n_k; ++k) {
      const std::size_t idx = q * field.n_k + k;
      const double dist = field.distances[idx];
      const double w = field_weight(dist, cfg.lambda, lqi);
      field.weights[idx] = w;
      field.dw_dlambda[idx] = -2.0 * cfg.lambda * lqi * lqi * dist * dist * w;
    }
  }
}

namespace {

int worker_count(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("EAF_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = static_cast<unsigned>(cap);
  }
  if (n == 0) n = 1;
  return static_cast<int>(std::min<std::size_t>(n, jobs));
}

}  // namespace

std::vector<AttentionField> field_bank(const BevGrid& grid,
                                       const std::vector<CameraView>& views,
                                       const std::vector<double>& scales,
                                       const FieldConfig& cfg) {
  struct Job {
    std::size_t view;
    std::size_t scale;
  };
  std::vector<Job> jobs;
  for (std::size_t vi = 0; vi < views.size(); ++vi)
    for (std::size_t si = 0; si < scales.size(); ++si) jobs.push_back({vi, si});

  std::vector<AttentionField> out(jobs.size());
  std::exception_ptr error;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto run = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size() || failed.load()) return;
      try {
        const auto& job = jobs[idx];
        auto [fw, fh] = feature_size_for(views[job.view], scales[job.scale]);
        out[idx] = compute_field(grid, views[job.view], fw, fh, cfg,
                                 static_cast<int>(job.scale));
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };

  const int workers = worker_count(jobs.size());
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) std::rethrow_exception(error);
  return out;
}

void write_field_pgm(const std::string& path, const AttentionField& field,
                     std::size_t query) {
  if (query >= field.n_q) {
    throw std::out_of_range("write_field_pgm: query index out of range");
  }
  std::vector<std::uint8_t> pixels(field.n_k);
  const double* row = field.weights.data() + query * field.n_k;
  for (std::size_t k = 0; k < field.n_k; ++k) {
    const double w = std::min(std::max(row[k], 0.0), 1.0);
    pixels[k] = static_cast<std::uint8_t>(std::lround(w * 255.0));
  }
  write_pgm(path, field.feature_width, field.feature_height, pixels);
}

}  // namespace eaf
