#include <doctest.h>

#include <cmath>
#include <random>

#include "eaf/geometry.hpp"
#include "support/helpers.hpp"

using namespace eaf;
using namespace eaf::testing;

namespace {

BevGrid single_cell_grid(double x, double y, double cell_size = 0.5,
                         double ground_height = 0.0) {
  BevGrid g;
  g.cells_x = 1;
  g.cells_y = 1;
  g.cell_size = cell_size;
  g.origin = Eigen::Vector2d(x, y);
  g.ground_height = ground_height;
  return g;
}

}  // namespace

TEST_CASE("canonical projection examples") {
  const CameraView v = canonical_view();
  v.validate();

  Projection on_axis = project(v, {10, 0, 1.5});
  CHECK(on_axis.pixel.x() == doctest::Approx(120.0).epsilon(1e-12));
  CHECK(on_axis.pixel.y() == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(on_axis.depth == doctest::Approx(10.0).epsilon(1e-12));

  Projection ground = project(v, {10, 0, 0});
  CHECK(ground.pixel.x() == doctest::Approx(120.0).epsilon(1e-12));
  CHECK(ground.pixel.y() == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(ground.depth == doctest::Approx(10.0).epsilon(1e-12));

  // behind the camera: negative depth reported, pixel still computed
  Projection behind = project(v, {-10, 0, 1.5});
  CHECK(behind.depth < 0.0);

  // point in the camera plane has no projection
  CHECK_THROWS_AS(project(v, {0, 3, 1.5}), std::domain_error);
}

TEST_CASE("camera validation rejects bad rotations and focals") {
  CameraView v = canonical_view();
  v.rotation(0, 0) = 0.5;
  CHECK_THROWS_AS(v.validate(), std::invalid_argument);

  CameraView w = canonical_view();
  w.intrinsics(0, 0) = -1.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}

TEST_CASE("scale_intrinsics examples") {
  const CameraView v = canonical_view();
  CameraView s = scale_intrinsics(v, 60, 30);
  CHECK(s.fx() == doctest::Approx(25.0).epsilon(1e-15));
  CHECK(s.cx() == doctest::Approx(30.0).epsilon(1e-15));
  CHECK(s.fy() == doctest::Approx(25.0).epsilon(1e-15));
  CHECK(s.cy() == doctest::Approx(15.0).epsilon(1e-15));
  CHECK(s.image_width == 60);
  CHECK(s.image_height == 30);

  CameraView id = scale_intrinsics(v, v.image_width, v.image_height);
  CHECK(id.intrinsics == v.intrinsics);

  CHECK_THROWS(scale_intrinsics(v, 0, 30));
}

TEST_CASE("scale_intrinsics commutes with projection") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    CameraView v = random_view(rng);
    CameraView s = scale_intrinsics(v, v.image_width / 4, v.image_height / 4);
    Eigen::Vector3d p(uniform(rng, -10, 10), uniform(rng, -10, 10),
                      uniform(rng, -10, 10));
    Projection full = project(v, p);
    if (std::abs(full.depth) < 1e-6) continue;
    Projection quarter = project(s, p);
    CHECK(std::abs(full.pixel.x() / 4 - quarter.pixel.x()) < 1e-9);
    CHECK(std::abs(full.pixel.y() / 4 - quarter.pixel.y()) < 1e-9);
  }
}

TEST_CASE("epipolar line on the canonical rig") {
  const CameraView v = canonical_view();
  const BevGrid grid = single_cell_grid(10, 0);
  EpipolarLine l = epipolar_line(v, grid, 0, 0);
  REQUIRE(!l.degenerate);
  // normalized join of (120,75) and (120,60): (1, 0, -120) up to global sign
  const double sign = l.a > 0 ? 1.0 : -1.0;
  CHECK(sign * l.a == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(l.b) < 1e-12);
  CHECK(sign * l.c == doctest::Approx(-120.0).epsilon(1e-12));
}

TEST_CASE("cell under the camera gives a degenerate line") {
  const CameraView v = canonical_view();
  const BevGrid grid = single_cell_grid(0, 0);
  CHECK(epipolar_line(v, grid, 0, 0).degenerate);
}

TEST_CASE("ray samples with positive depth lie on the line") {
  const CameraView v = canonical_view();
  const BevGrid grid = single_cell_grid(10, 0);
  EpipolarLine l = epipolar_line(v, grid, 0, 0);
  REQUIRE(!l.degenerate);
  for (int n = 0; n < 100; ++n) {
    const double z = -2.0 + 0.07 * n;
    Projection p = project(v, {10, 0, z});
    if (p.depth <= 0) continue;
    const double res =
        point_line_distance({p.pixel.x(), p.pixel.y(), 1.0}, l);
    CHECK(std::abs(res) < 1e-6);
  }
}

TEST_CASE("normalization idempotence") {
  EpipolarLine l = normalize_line(3.0, -4.0, 10.0);
  CHECK(std::abs(l.a * l.a + l.b * l.b - 1.0) < 1e-12);
  EpipolarLine l2 = normalize_line(l.a, l.b, l.c);
  CHECK(std::abs(l2.a - l.a) < 1e-12);
  CHECK(std::abs(l2.b - l.b) < 1e-12);
  CHECK(std::abs(l2.c - l.c) < 1e-12);

  CHECK(normalize_line(0, 0, 1).degenerate);
}

TEST_CASE("line is invariant under ray-point choice") {
  std::mt19937_64 rng(37);
  int tested = 0;
  for (std::uint64_t seed = 0; tested < 40 && seed < 400; ++seed) {
    std::mt19937_64 r(seed);
    CameraView v = random_view(r);
    const double x = uniform(r, -8, 8), y = uniform(r, -8, 8);
    const BevGrid grid = single_cell_grid(x, y);
    EpipolarLine l = epipolar_line(v, grid, 0, 0);
    if (l.degenerate) continue;

    Projection pa = project(v, {x, y, -3.0});
    Projection pb = project(v, {x, y, 7.0});
    if (pa.depth <= 0 && pb.depth <= 0) continue;
    const Eigen::Vector3d ha(pa.pixel.x(), pa.pixel.y(), 1.0);
    const Eigen::Vector3d hb(pb.pixel.x(), pb.pixel.y(), 1.0);
    const Eigen::Vector3d join = ha.cross(hb);
    EpipolarLine alt = normalize_line(join.x(), join.y(), join.z());
    if (alt.degenerate) continue;
    const double sign = (alt.a * l.a + alt.b * l.b) >= 0 ? 1.0 : -1.0;
    CHECK(std::abs(sign * alt.a - l.a) < 1e-9);
    CHECK(std::abs(sign * alt.b - l.b) < 1e-9);
    CHECK(std::abs(sign * alt.c - l.c) < 1e-9);
    ++tested;
  }
  CHECK(tested >= 40);
  (void)rng;
}

TEST_CASE("point_line_distance examples") {
  EpipolarLine l;
  l.a = 1;
  l.b = 0;
  l.c = -120;
  CHECK(point_line_distance({125, 40, 1}, l) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(point_line_distance({120, 99, 1}, l) == doctest::Approx(0.0));

  EpipolarLine bad;
  bad.degenerate = true;
  CHECK_THROWS_AS(point_line_distance({0, 0, 1}, bad), std::domain_error);
}

TEST_CASE("distance equals brute-force minimum over sampled line points") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    EpipolarLine l = normalize_line(uniform(rng, -1, 1), uniform(rng, -1, 1),
                                    uniform(rng, -50, 50));
    if (l.degenerate) continue;
    const Eigen::Vector3d x(uniform(rng, 0, 200), uniform(rng, 0, 100), 1.0);
    const double analytic = std::abs(point_line_distance(x, l));

    // foot of the perpendicular, then march along the direction (-b, a)
    const Eigen::Vector2d foot(x.x() - point_line_distance(x, l) * l.a,
                               x.y() - point_line_distance(x, l) * l.b);
    double best = 1e300;
    for (int n = 0; n < 100000; ++n) {
      const double t = -50.0 + 1e-3 * n;
      const Eigen::Vector2d p = foot + t * Eigen::Vector2d(-l.b, l.a);
      best = std::min(best, (p - x.head<2>()).norm());
    }
    CHECK(std::abs(analytic - best) < 1e-3);
  }
}

TEST_CASE("cheirality on the canonical rig") {
  const CameraView v = canonical_view();
  CHECK(cheirality(v, single_cell_grid(10, 0), 0, 0));
  CHECK(!cheirality(v, single_cell_grid(-10, 0), 0, 0));
}

TEST_CASE("cheirality matches the per-cell projection oracle") {
  const CameraView v = canonical_view();
  const BevGrid grid = BevGrid::centered(16, 16, 0.5);
  int visible = 0;
  for (int j = 0; j < grid.cells_y; ++j) {
    for (int i = 0; i < grid.cells_x; ++i) {
      const Eigen::Vector2d c = grid.cell_center(i, j);
      const Eigen::Vector3d p_cam =
          v.rotation * Eigen::Vector3d(c.x(), c.y(), grid.ground_height) +
          v.translation;
      const bool expect = p_cam.z() > 0;
      CHECK(cheirality(v, grid, i, j) == expect);
      visible += expect;
    }
  }
  // forward-facing camera sees roughly the forward half-plane
  CHECK(visible == 8 * 16);
}

TEST_CASE("epipolar constraint holds for random rigs and cells") {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 100 && seed < 2000; ++seed) {
    std::mt19937_64 rng(seed + 500);
    CameraView v = random_view(rng);
    const BevGrid grid =
        single_cell_grid(uniform(rng, -10, 10), uniform(rng, -10, 10));
    if (!cheirality(v, grid, 0, 0)) continue;
    EpipolarLine l = epipolar_line(v, grid, 0, 0);
    if (l.degenerate) continue;
    const Eigen::Vector2d c = grid.cell_center(0, 0);
    bool any = false;
    for (int n = 0; n < 100; ++n) {
      const double z = -5.0 + 0.1 * n;
      Projection p = project(v, {c.x(), c.y(), z});
      if (p.depth <= 1e-3) continue;
      any = true;
      CHECK(std::abs(point_line_distance({p.pixel.x(), p.pixel.y(), 1.0}, l)) <
            1e-6);
    }
    if (any) ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("BevGrid layout") {
  const BevGrid g = BevGrid::centered(16, 16, 0.5);
  CHECK(g.num_cells() == 256);
  CHECK(g.query_index(3, 2) == 2 * 16 + 3);
  // centered grid straddles the ego origin symmetrically
  const Eigen::Vector2d lo = g.cell_center(0, 0);
  const Eigen::Vector2d hi = g.cell_center(15, 15);
  CHECK(lo.x() == doctest::Approx(-hi.x()).epsilon(1e-15));
  CHECK(lo.y() == doctest::Approx(-hi.y()).epsilon(1e-15));
  CHECK(hi.x() - lo.x() == doctest::Approx(15 * 0.5));
}
