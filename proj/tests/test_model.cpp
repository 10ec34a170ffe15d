#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "eaf/checkpoint.hpp"
#include "eaf/model.hpp"
#include "eaf/rig.hpp"
#include "eaf/train.hpp"
#include "support/helpers.hpp"

using namespace eaf;
using namespace eaf::testing;

namespace {

const std::string kFixtures = std::string(EAF_SOURCE_DIR) + "/fixtures";

// Stereo pair of small cameras for micro-model tests: 8x8 images, both
// facing ego +x from (0, +-0.5, 1.0).
std::vector<CameraView> micro_rig() {
  std::vector<CameraView> views;
  for (int n = 0; n < 2; ++n) {
    CameraView v;
    v.intrinsics = Eigen::Matrix3d::Identity();
    v.intrinsics(0, 0) = 8.0;
    v.intrinsics(1, 1) = 8.0;
    v.intrinsics(0, 2) = 4.0;
    v.intrinsics(1, 2) = 4.0;
    v.rotation << 0, -1, 0,
                  0, 0, -1,
                  1, 0, 0;
    const Eigen::Vector3d center(0.0, n == 0 ? 0.5 : -0.5, 1.0);
    v.translation = -v.rotation * center;
    v.image_width = 8;
    v.image_height = 8;
    v.view_id = n + 1;
    views.push_back(v);
  }
  return views;
}

ModelConfig micro_config() {
  ModelConfig mc;
  mc.grid = BevGrid::centered(4, 4, 0.5);
  mc.d_model = 4;
  mc.n_heads = 2;
  mc.scales = {0.25};
  mc.ff_hidden = 6;
  mc.seed = 5;
  return mc;
}

}  // namespace

TEST_CASE("ModelConfig validation") {
  ModelConfig mc;
  CHECK_NOTHROW(mc.validate());
  mc.scales = {0.25, 0.0625};  // fine before coarse
  CHECK_THROWS(mc.validate());
  mc.scales = {0.25};
  mc.n_heads = 3;
  CHECK_THROWS(mc.validate());
}

TEST_CASE("constant image gives a constant backbone feature map") {
  EafModel model(micro_config());
  const Tensor img = Tensor::full({64, 3}, 0.7);
  Tape tape;
  Tensor pooled = tape.pool_patches(img, 8, 8, 4);
  Tensor feat = tape.add_rowvec(
      tape.matmul(pooled, model.params().at("backbone.s0.w")),
      model.params().at("backbone.s0.b"));
  REQUIRE(feat.shape() == std::vector<std::size_t>{4, 4});
  for (int r = 1; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(feat(r, c) == doctest::Approx(feat(0, c)).epsilon(1e-14));
}

TEST_CASE("fresh model emits all-zero logits (zero-init output layer)") {
  const auto views = micro_rig();
  const ModelConfig mc = micro_config();
  EafModel model(mc);
  auto bank = field_bank(mc.grid, views, mc.scales, FieldConfig{});
  auto weights = scale_weights(bank, 2, 1, mc.visibility_mode, false);

  std::mt19937_64 rng(97);
  std::vector<Tensor> images{random_tensor(rng, {64, 3}, 0, 1),
                             random_tensor(rng, {64, 3}, 0, 1)};
  Tape tape;
  Tensor logits = model.forward(tape, images, 8, 8, weights);
  REQUIRE(logits.shape() == std::vector<std::size_t>{16, 2});
  for (double v : logits.data()) CHECK(v == 0.0);
}

TEST_CASE("swapping cameras together with their fields leaves output unchanged") {
  auto views = micro_rig();
  ModelConfig mc = micro_config();
  // make the output layer non-trivial so the check is not vacuous
  EafModel model(mc);
  std::mt19937_64 rng(101);
  for (auto& [name, t] : model.params()) {
    if (name.rfind("dec.out", 0) == 0)
      for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = uniform(rng, -1, 1);
  }

  auto bank = field_bank(mc.grid, views, mc.scales, FieldConfig{});
  std::vector<Tensor> images{random_tensor(rng, {64, 3}, 0, 1),
                             random_tensor(rng, {64, 3}, 0, 1)};

  Tape t1;
  Tensor a = model.forward(t1, images, 8, 8,
                           scale_weights(bank, 2, 1, mc.visibility_mode, false));

  std::vector<AttentionField> swapped{bank[1], bank[0]};
  std::vector<Tensor> images_swapped{images[1], images[0]};
  Tape t2;
  Tensor b = model.forward(
      t2, images_swapped, 8, 8,
      scale_weights(swapped, 2, 1, mc.visibility_mode, false));

  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::abs(a.at(i) - b.at(i)) < 1e-9);
}

TEST_CASE("end-to-end micro-model gradient matches finite differences") {
  const auto views = micro_rig();
  const ModelConfig mc = micro_config();
  EafModel model(mc);
  // give the output layer nonzero weights so its gradient path is exercised,
  // and nudge zero-initialized biases off the relu kink so central finite
  // differences do not straddle the non-differentiable point
  std::mt19937_64 rng(103);
  for (auto& [name, t] : model.params()) {
    if (name.rfind("dec.out", 0) == 0)
      for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = uniform(rng, -0.3, 0.3);
    else if (name.ends_with(".b") || name.ends_with("_b"))
      for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = uniform(rng, 0.01, 0.1);
  }

  auto bank = field_bank(mc.grid, views, mc.scales, FieldConfig{});
  auto weights = scale_weights(bank, 2, 1, mc.visibility_mode, false);
  std::vector<Tensor> images{random_tensor(rng, {64, 3}, 0, 1),
                             random_tensor(rng, {64, 3}, 0, 1)};
  Tensor targets = Tensor::zeros({16, 2});
  for (std::size_t i = 0; i < targets.size(); ++i)
    targets.at(i) = (rng() % 3 == 0) ? 1.0 : 0.0;

  std::vector<Tensor> params{images[0], images[1]};
  for (auto& [name, t] : model.params()) params.push_back(t);

  LossConfig loss_cfg;
  auto build = [&](Tape& t) {
    return focal_loss(t, model.forward(t, images, 8, 8, weights), targets,
                      loss_cfg);
  };
  CHECK(gradcheck(params, build) < 1e-3);
}

TEST_CASE("focal loss closed forms") {
  LossConfig cfg;  // gamma 2, alpha 0.25
  Tape tape;
  Tensor logits = Tensor::zeros({1, 1});
  Tensor pos({1, 1}, {1.0});
  const double v = focal_loss(tape, logits, pos, cfg).value();
  CHECK(v == doctest::Approx(0.25 * 0.25 * std::log(2.0)).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.04332).epsilon(1e-4));
}

TEST_CASE("gamma 0, alpha 0.5 halves binary cross-entropy") {
  LossConfig cfg;
  cfg.gamma = 0.0;
  cfg.alpha = 0.5;
  std::mt19937_64 rng(107);
  Tensor logits = random_tensor(rng, {4, 2}, -3, 3);
  Tensor targets = Tensor::zeros({4, 2});
  for (std::size_t i = 0; i < 8; ++i) targets.at(i) = rng() % 2;

  Tape tape;
  const double got = focal_loss(tape, logits, targets, cfg).value();
  double bce = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits.at(i)));
    bce += targets.at(i) == 1.0 ? -std::log(p) : -std::log(1.0 - p);
  }
  bce /= 8.0;
  CHECK(got == doctest::Approx(0.5 * bce).epsilon(1e-12));
}

TEST_CASE("focal loss decreases as a positive cell's probability rises") {
  LossConfig cfg;
  double prev = 1e300;
  for (double logit = -3.0; logit <= 3.0; logit += 0.25) {
    Tape tape;
    const double v =
        focal_loss(tape, Tensor({1, 1}, {logit}), Tensor({1, 1}, {1.0}), cfg)
            .value();
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("focal loss gradient matches finite differences") {
  std::mt19937_64 rng(109);
  Tensor logits = random_tensor(rng, {3, 2}, -2, 2);
  Tensor targets = Tensor::zeros({3, 2});
  for (std::size_t i = 0; i < 6; ++i) targets.at(i) = rng() % 2;
  LossConfig cfg;
  auto build = [&](Tape& t) { return focal_loss(t, logits, targets, cfg); };
  CHECK(gradcheck({logits}, build) < 1e-6);
}

TEST_CASE("iou basics") {
  using V = std::vector<std::uint8_t>;
  CHECK(iou(V{1, 1, 0}, V{1, 1, 0}) == 1.0);
  CHECK(iou(V{1, 0, 0}, V{0, 1, 0}) == 0.0);
  CHECK(iou(V{1, 1, 0, 0}, V{0, 1, 1, 0}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(V{0, 0}, V{0, 0}) == 1.0);  // empty-union convention
  CHECK_THROWS(iou(V{0}, V{0, 0}));
}

TEST_CASE("distance-banded iou against a brute-force oracle") {
  const BevGrid grid = BevGrid::centered(16, 16, 0.5);
  std::mt19937_64 rng(113);
  std::vector<std::uint8_t> pred(256), gt(256);
  for (int i = 0; i < 256; ++i) {
    pred[i] = rng() % 2;
    gt[i] = rng() % 2;
  }

  // single band covering everything reduces to plain iou
  CHECK(distance_banded_iou(pred, gt, grid, {0.0, 1000.0})[0] ==
        doctest::Approx(iou(pred, gt)));

  const std::vector<double> edges{0.0, 2.0, 4.0, 10.0};
  const auto got = distance_banded_iou(pred, gt, grid, edges);
  REQUIRE(got.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    std::size_t inter = 0, uni = 0;
    for (int j = 0; j < 16; ++j) {
      for (int i = 0; i < 16; ++i) {
        const double d = grid.cell_center(i, j).norm();
        if (d < edges[b] || d >= edges[b + 1]) continue;
        const int q = grid.query_index(i, j);
        inter += (pred[q] && gt[q]) ? 1 : 0;
        uni += (pred[q] || gt[q]) ? 1 : 0;
      }
    }
    const double expect = uni == 0 ? 1.0 : double(inter) / double(uni);
    CHECK(got[b] == doctest::Approx(expect));
  }

  // mask entirely inside the first band: later bands use the empty-union 1.0
  std::vector<std::uint8_t> inner(256, 0);
  inner[grid.query_index(8, 8)] = 1;
  const auto bands = distance_banded_iou(inner, inner, grid, {0.0, 2.0, 4.0});
  CHECK(bands[0] == 1.0);
  CHECK(bands[1] == 1.0);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  EafModel model(micro_config());
  const std::string path = "ckpt_test.bin";
  save_checkpoint(path, model.params());
  const auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == model.params().size());
  for (const auto& [name, t] : model.params()) {
    REQUIRE(loaded.count(name) == 1);
    CHECK(loaded.at(name).shape() == t.shape());
    CHECK(loaded.at(name).data() == t.data());
  }

  EafModel other(micro_config());
  for (auto& [name, t] : other.params())
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = -1.0;
  restore_params(other.params(), loaded);
  for (const auto& [name, t] : model.params())
    CHECK(other.params().at(name).data() == t.data());
  std::remove(path.c_str());
}

TEST_CASE("restoring a mismatched checkpoint names the parameter") {
  EafModel model(micro_config());
  std::map<std::string, Tensor> loaded;
  for (const auto& [name, t] : model.params()) loaded.emplace(name, t);
  loaded.at("query_embed") = Tensor::zeros({2, 2});
  try {
    restore_params(model.params(), loaded);
    FAIL("expected restore_params to throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("query_embed") != std::string::npos);
  }
}

TEST_CASE("one-cycle schedule warms up and decays") {
  const int total = 1000;
  const double peak = 0.05;
  CHECK(one_cycle_lr(0, total, peak) == doctest::Approx(peak / 25.0));
  CHECK(one_cycle_lr(300, total, peak) == doctest::Approx(peak));
  CHECK(one_cycle_lr(999, total, peak) < 0.002);
  for (int s = 1; s < 300; ++s)
    CHECK(one_cycle_lr(s, total, peak) >= one_cycle_lr(s - 1, total, peak));
  for (int s = 301; s < 1000; ++s)
    CHECK(one_cycle_lr(s, total, peak) <= one_cycle_lr(s - 1, total, peak));
}

TEST_CASE("short training runs are deterministic and log the schedule") {
  const Rig rig = load_rig(kFixtures + "/rig_stereo.json");
  ModelConfig mc;
  mc.grid = BevGrid::centered(8, 8, 0.5);
  mc.d_model = 8;
  mc.n_heads = 2;
  mc.scales = {0.0625, 0.25};
  mc.ff_hidden = 16;
  mc.seed = 7;

  TrainConfig tc;
  tc.steps = 6;
  tc.eval_interval = 3;
  tc.train_scenes = 2;
  tc.eval_scenes = 1;

  EafModel m1(mc), m2(mc);
  const TrainResult r1 = train_toy(m1, rig, tc);
  const TrainResult r2 = train_toy(m2, rig, tc);
  REQUIRE(r1.log.size() == 2);
  CHECK(r1.log[0].step == 3);
  CHECK(r1.log[1].step == 6);
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].loss == r2.log[i].loss);
    CHECK(r1.log[i].iou_vehicle == r2.log[i].iou_vehicle);
    CHECK(r1.log[i].iou_drivable == r2.log[i].iou_drivable);
  }
  for (const auto& [name, t] : m1.params())
    CHECK(m2.params().at(name).data() == t.data());
}

TEST_CASE("lambda ablation produces distinct field sparsities") {
  const Rig rig = load_rig(kFixtures + "/rig_stereo.json");
  const BevGrid grid = BevGrid::centered(8, 8, 0.5);
  std::vector<double> sparsities;
  for (double lambda : {0.25, 1.0, 4.0}) {
    FieldConfig cfg;
    cfg.lambda = lambda;
    sparsities.push_back(
        bank_sparsity(field_bank(grid, rig.views, {0.25}, cfg)));
  }
  CHECK(sparsities[0] > sparsities[1]);
  CHECK(sparsities[1] > sparsities[2]);
}
