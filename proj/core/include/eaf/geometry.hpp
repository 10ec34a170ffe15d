#pragma once

#include <Eigen/Dense>

namespace eaf {

/// Pinhole camera: z-forward / x-right / y-down optical frame, ego frame is
/// x-forward / y-left / z-up. rotation/translation map ego points into the
/// camera frame: p_cam = rotation * p_ego + translation.
struct CameraView {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int image_width = 0;
  int image_height = 0;
  int view_id = 0;

  double fx() const { return intrinsics(0, 0); }
  double fy() const { return intrinsics(1, 1); }
  double cx() const { return intrinsics(0, 2); }
  double cy() const { return intrinsics(1, 2); }

  /// Camera projection center in ego coordinates.
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  /// Throws std::invalid_argument on non-orthonormal rotation, non-positive
  /// focal length, or non-positive image size.
  void validate() const;
};

/// Orthographic BEV plane discretized into cells_x * cells_y square cells.
/// cell_center(i, j) = origin + (i * cell_size, j * cell_size).
struct BevGrid {
  int cells_x = 0;
  int cells_y = 0;
  double cell_size = 0.0;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double ground_height = 0.0;

  static BevGrid centered(int cells_x, int cells_y, double cell_size,
                          double ground_height = 0.0);

  Eigen::Vector2d cell_center(int i, int j) const {
    return origin + Eigen::Vector2d(i * cell_size, j * cell_size);
  }
  int num_cells() const { return cells_x * cells_y; }
  /// Row-major query index for cell (i, j): j * cells_x + i.
  int query_index(int i, int j) const { return j * cells_x + i; }
};

/// Homogeneous image line a*u + b*v + c = 0 normalized so a^2 + b^2 = 1,
/// making x . l the signed Euclidean pixel distance.
struct EpipolarLine {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  bool degenerate = false;
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth;  // camera-frame z; negative means behind the camera
};

/// Rescales intrinsics to a feature map of the given size.
CameraView scale_intrinsics(const CameraView& view, int feature_width,
                            int feature_height);

/// Projects an ego-frame point. Depth is reported signed (cheirality);
/// throws std::domain_error when |depth| < 1e-9.
Projection project(const CameraView& view, const Eigen::Vector3d& point);

EpipolarLine normalize_line(double a, double b, double c);

/// Image of the vertical ray through the cell center, built by joining the
/// projections of two ray points. degenerate when the ray passes through the
/// camera center or lies entirely behind it.
EpipolarLine epipolar_line(const CameraView& view, const BevGrid& grid, int i,
                           int j);

/// Signed pixel distance between homogeneous pixel (u, v, 1) and the line.
/// Throws std::domain_error on a degenerate line.
double point_line_distance(const Eigen::Vector3d& pixel_h,
                           const EpipolarLine& line);

/// True iff the cell's ground point has positive camera-frame depth.
bool cheirality(const CameraView& view, const BevGrid& grid, int i, int j);

}  // namespace eaf
