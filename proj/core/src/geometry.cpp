#include "eaf/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace eaf {

void CameraView::validate() const {
  const Eigen::Matrix3d rtr = rotation * rotation.transpose();
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("camera: rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("camera: rotation determinant is not +1");
  }
  if (fx() <= 0.0 || fy() <= 0.0) {
    throw std::invalid_argument("camera: focal length must be positive");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw std::invalid_argument("camera: image size must be positive");
  }
}

BevGrid BevGrid::centered(int cells_x, int cells_y, double cell_size,
                          double ground_height) {
  BevGrid g;
  g.cells_x = cells_x;
  g.cells_y = cells_y;
  g.cell_size = cell_size;
  g.ground_height = ground_height;
  g.origin = Eigen::Vector2d(-0.5 * (cells_x - 1) * cell_size,
                             -0.5 * (cells_y - 1) * cell_size);
  return g;
}

CameraView scale_intrinsics(const CameraView& view, int feature_width,
                            int feature_height) {
  if (feature_width <= 0 || feature_height <= 0) {
    throw std::invalid_argument("scale_intrinsics: zero-sized feature map");
  }
  const double sx = static_cast<double>(feature_width) / view.image_width;
  const double sy = static_cast<double>(feature_height) / view.image_height;
  CameraView out = view;
  out.intrinsics(0, 0) = view.fx() * sx;
  out.intrinsics(0, 2) = view.cx() * sx;
  out.intrinsics(1, 1) = view.fy() * sy;
  out.intrinsics(1, 2) = view.cy() * sy;
  out.image_width = feature_width;
  out.image_height = feature_height;
  return out;
}

Projection project(const CameraView& view, const Eigen::Vector3d& point) {
  const Eigen::Vector3d p = view.rotation * point + view.translation;
  if (std::abs(p.z()) < 1e-9) {
    throw std::domain_error("project: point at projection infinity");
  }
  return Projection{
      Eigen::Vector2d(view.fx() * p.x() / p.z() + view.cx(),
                      view.fy() * p.y() / p.z() + view.cy()),
      p.z()};
}

EpipolarLine normalize_line(double a, double b, double c) {
  const double n = std::hypot(a, b);
  EpipolarLine l;
  if (n < 1e-12) {
    l.degenerate = true;
    return l;
  }
  l.a = a / n;
  l.b = b / n;
  l.c = c / n;
  return l;
}

EpipolarLine epipolar_line(const CameraView& view, const BevGrid& grid, int i,
                           int j) {
  const Eigen::Vector2d xy = grid.cell_center(i, j);
  const Eigen::Vector3d p0(xy.x(), xy.y(), grid.ground_height);
  const Eigen::Vector3d p1(xy.x(), xy.y(), grid.ground_height + 1.0);

  const Eigen::Vector3d c0 = view.rotation * p0 + view.translation;
  const Eigen::Vector3d c1 = view.rotation * p1 + view.translation;

  EpipolarLine degen;
  degen.degenerate = true;
  if (c0.z() <= 0.0 && c1.z() <= 0.0) return degen;

  // Join in homogeneous image coordinates; no division by depth, so ray
  // points near the camera plane stay well defined.
  const Eigen::Vector3d h0 = view.intrinsics * c0;
  const Eigen::Vector3d h1 = view.intrinsics * c1;
  const Eigen::Vector3d l = h0.cross(h1);

  // Coincident projections (ray through the camera center).
  if (std::abs(c0.z()) > 1e-9 && std::abs(c1.z()) > 1e-9) {
    const Eigen::Vector2d px0 = h0.head<2>() / h0.z();
    const Eigen::Vector2d px1 = h1.head<2>() / h1.z();
    if ((px0 - px1).norm() < 1e-9) return degen;
  }
  return normalize_line(l.x(), l.y(), l.z());
}

double point_line_distance(const Eigen::Vector3d& pixel_h,
                           const EpipolarLine& line) {
  if (line.degenerate) {
    throw std::domain_error("point_line_distance: degenerate line");
  }
  return pixel_h.x() * line.a + pixel_h.y() * line.b + pixel_h.z() * line.c;
}

bool cheirality(const CameraView& view, const BevGrid& grid, int i, int j) {
  const Eigen::Vector2d xy = grid.cell_center(i, j);
  const Eigen::Vector3d p(xy.x(), xy.y(), grid.ground_height);
  const Eigen::Vector3d c = view.rotation * p + view.translation;
  return c.z() > 0.0;
}

}  // namespace eaf
