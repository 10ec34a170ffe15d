#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "eaf/geometry.hpp"
#include "eaf/tensor.hpp"

namespace eaf::testing {

/// Camera at ego (0, 0, 1.5) facing ego +x, fx = fy = 100, cx = 120,
/// cy = 60, 240x120 image. Matches the worked projection examples.
inline CameraView canonical_view() {
  CameraView v;
  v.intrinsics = Eigen::Matrix3d::Identity();
  v.intrinsics(0, 0) = 100.0;
  v.intrinsics(1, 1) = 100.0;
  v.intrinsics(0, 2) = 120.0;
  v.intrinsics(1, 2) = 60.0;
  v.rotation << 0, -1, 0,
                0, 0, -1,
                1, 0, 0;
  v.translation = -v.rotation * Eigen::Vector3d(0.0, 0.0, 1.5);
  v.image_width = 240;
  v.image_height = 120;
  v.view_id = 1;
  return v;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

/// Random orthonormal ego->camera rotation via a normalized quaternion.
inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1),
                       uniform(rng, -1, 1), uniform(rng, -1, 1));
  while (q.norm() < 1e-3) {
    q = Eigen::Quaterniond(uniform(rng, -1, 1), uniform(rng, -1, 1),
                           uniform(rng, -1, 1), uniform(rng, -1, 1));
  }
  q.normalize();
  return q.toRotationMatrix();
}

inline CameraView random_view(std::mt19937_64& rng) {
  CameraView v;
  v.rotation = random_rotation(rng);
  v.translation = Eigen::Vector3d(uniform(rng, -5, 5), uniform(rng, -5, 5),
                                  uniform(rng, -5, 5));
  const double fx = uniform(rng, 50, 500);
  const double fy = uniform(rng, 50, 500);
  v.intrinsics = Eigen::Matrix3d::Identity();
  v.intrinsics(0, 0) = fx;
  v.intrinsics(1, 1) = fy;
  v.intrinsics(0, 2) = uniform(rng, 50, 200);
  v.intrinsics(1, 2) = uniform(rng, 50, 200);
  v.image_width = 240;
  v.image_height = 160;
  v.view_id = 1;
  return v;
}

/// Max elementwise deviation between analytic gradients of build(tape) and
/// central finite differences over every entry of params.
/// Relative error uses denominator max(|analytic|, |numeric|, 1e-3).
inline double gradcheck(std::vector<Tensor> params,
                        const std::function<Tensor(Tape&)>& build,
                        double h = 1e-5) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tape tape;
  Tensor loss = build(tape);
  tape.backward(loss);

  double max_rel = 0.0;
  for (auto& p : params) {
    const std::vector<double> analytic = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.at(i);
      p.at(i) = saved + h;
      Tape tp;
      const double fp = build(tp).value();
      p.at(i) = saved - h;
      Tape tm;
      const double fm = build(tm).value();
      p.at(i) = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
      max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return max_rel;
}

inline Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape,
                            double lo = -1.0, double hi = 1.0) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  std::vector<double> d(n);
  for (double& x : d) x = uniform(rng, lo, hi);
  return Tensor(std::move(shape), std::move(d));
}

}  // namespace eaf::testing
