#include "eaf/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace eaf {

namespace {

class ParamRng {
 public:
  explicit ParamRng(std::uint64_t seed) : rng_(seed) {}

  double normal() {
    // Box-Muller on explicit 53-bit draws keeps init bit-stable.
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Tensor init_normal(ParamRng& rng, std::vector<std::size_t> shape, double std) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  std::vector<double> d(n);
  for (double& x : d) x = rng.normal() * std;
  return Tensor(std::move(shape), std::move(d), true);
}

}  // namespace

void ModelConfig::validate() const {
  if (grid.cells_x <= 0 || grid.cells_y <= 0 || grid.cell_size <= 0.0) {
    throw std::invalid_argument("model: invalid grid");
  }
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("model: n_heads must divide d_model");
  }
  if (scales.empty()) throw std::invalid_argument("model: scales must be non-empty");
  for (std::size_t i = 1; i < scales.size(); ++i) {
    if (scales[i] <= scales[i - 1]) {
      throw std::invalid_argument("model: scales must be sorted coarse to fine");
    }
  }
  if (blocks_per_scale <= 0 || ff_hidden <= 0 || image_channels <= 0 ||
      class_names.empty()) {
    throw std::invalid_argument("model: invalid configuration value");
  }
}

EafModel::EafModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  ParamRng rng(cfg_.seed);
  const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
  const std::size_t h = static_cast<std::size_t>(cfg_.ff_hidden);
  const std::size_t c = static_cast<std::size_t>(cfg_.image_channels);
  const std::size_t n_q = static_cast<std::size_t>(cfg_.n_queries());

  params_["query_embed"] = init_normal(rng, {n_q, d}, 0.1);
  for (std::size_t si = 0; si < cfg_.scales.size(); ++si) {
    const std::string bp = "backbone.s" + std::to_string(si) + ".";
    params_[bp + "w"] = init_normal(rng, {c, d}, 1.0 / std::sqrt(double(c)));
    params_[bp + "b"] = Tensor::zeros({1, d}, true);
    for (int b = 0; b < cfg_.blocks_per_scale; ++b) {
      const std::string ep =
          "enc.s" + std::to_string(si) + ".b" + std::to_string(b) + ".";
      const double ds = 1.0 / std::sqrt(double(d));
      // Larger query/key projections keep initial attention logits away from
      // zero, where the multiplicative field gating has no effect on the
      // softmax and the geometry provides no training signal.
      const double as = 3.0 / std::sqrt(double(d));
      params_[ep + "wq"] = init_normal(rng, {d, d}, as);
      params_[ep + "wk"] = init_normal(rng, {d, d}, as);
      params_[ep + "wv"] = init_normal(rng, {d, d}, ds);
      params_[ep + "wo"] = init_normal(rng, {d, d}, ds);
      params_[ep + "ff1_w"] = init_normal(rng, {d, h}, ds);
      params_[ep + "ff1_b"] = Tensor::zeros({1, h}, true);
      params_[ep + "ff2_w"] = init_normal(rng, {h, d}, 1.0 / std::sqrt(double(h)));
      params_[ep + "ff2_b"] = Tensor::zeros({1, d}, true);
      params_[ep + "ln_gain"] = Tensor::full({1, d}, 1.0, true);
      params_[ep + "ln_bias"] = Tensor::zeros({1, d}, true);
    }
  }
  const double d9s = 1.0 / std::sqrt(double(9 * d));
  params_["dec.mix1.w"] = init_normal(rng, {9 * d, d}, d9s);
  params_["dec.mix1.b"] = Tensor::zeros({1, d}, true);
  params_["dec.mix2.w"] = init_normal(rng, {9 * d, d}, d9s);
  params_["dec.mix2.b"] = Tensor::zeros({1, d}, true);
  params_["dec.out.w"] = Tensor::zeros({d, static_cast<std::size_t>(cfg_.n_classes())}, true);
  params_["dec.out.b"] = Tensor::zeros({1, static_cast<std::size_t>(cfg_.n_classes())}, true);

  // 3x3 neighborhoods in query-index order; -1 rows gather zeros at borders.
  neighbor_index_.reserve(n_q * 9);
  for (int j = 0; j < cfg_.grid.cells_y; ++j) {
    for (int i = 0; i < cfg_.grid.cells_x; ++i) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || nj < 0 || ni >= cfg_.grid.cells_x ||
              nj >= cfg_.grid.cells_y) {
            neighbor_index_.push_back(-1);
          } else {
            neighbor_index_.push_back(cfg_.grid.query_index(ni, nj));
          }
        }
      }
    }
  }
}

BlockParams EafModel::block_params(std::size_t scale_idx, int block) const {
  const std::string ep =
      "enc.s" + std::to_string(scale_idx) + ".b" + std::to_string(block) + ".";
  BlockParams p;
  p.wq = params_.at(ep + "wq");
  p.wk = params_.at(ep + "wk");
  p.wv = params_.at(ep + "wv");
  p.wo = params_.at(ep + "wo");
  p.ff1_w = params_.at(ep + "ff1_w");
  p.ff1_b = params_.at(ep + "ff1_b");
  p.ff2_w = params_.at(ep + "ff2_w");
  p.ff2_b = params_.at(ep + "ff2_b");
  p.ln_gain = params_.at(ep + "ln_gain");
  p.ln_bias = params_.at(ep + "ln_bias");
  return p;
}

Tensor EafModel::backbone(Tape& tape, const Tensor& image, int image_width,
                          int image_height, std::size_t scale_idx) const {
  const double s = cfg_.scales[scale_idx];
  const double pf = 1.0 / s;
  const auto p = static_cast<std::size_t>(std::lround(pf));
  if (std::abs(pf - static_cast<double>(p)) > 1e-9) {
    throw std::invalid_argument("backbone: scale is not an integer downsampling");
  }
  Tensor pooled = tape.pool_patches(image, image_height, image_width, p);
  const std::string bp = "backbone.s" + std::to_string(scale_idx) + ".";
  return tape.add_rowvec(tape.matmul(pooled, params_.at(bp + "w")),
                         params_.at(bp + "b"));
}

Tensor EafModel::forward(Tape& tape, const std::vector<Tensor>& images,
                         int image_width, int image_height,
                         const std::vector<WeightTensors>& weights) const {
  if (weights.size() != cfg_.scales.size()) {
    throw std::invalid_argument("forward: one WeightTensors per scale required");
  }
  AttentionConfig acfg;
  acfg.d_model = cfg_.d_model;
  acfg.n_heads = cfg_.n_heads;
  acfg.visibility_mode = cfg_.visibility_mode;

  Tensor x = params_.at("query_embed");
  for (std::size_t si = 0; si < cfg_.scales.size(); ++si) {
    std::vector<Tensor> feats;
    feats.reserve(images.size());
    for (const Tensor& img : images) {
      feats.push_back(backbone(tape, img, image_width, image_height, si));
    }
    for (int b = 0; b < cfg_.blocks_per_scale; ++b) {
      x = cross_attention_block(tape, x, feats, weights[si],
                                block_params(si, b), acfg);
    }
  }
  return decoder(tape, x);
}

Tensor EafModel::decoder(Tape& tape, const Tensor& bev) const {
  const std::size_t n_q = bev.rows();
  const std::size_t d = bev.cols();
  if (n_q != static_cast<std::size_t>(cfg_.n_queries())) {
    throw std::invalid_argument("decoder: embedding row count != grid cells");
  }
  auto mix = [&](const Tensor& x, const std::string& name) {
    Tensor gathered = tape.reshape(tape.gather_rows(x, neighbor_index_),
                                   {n_q, 9 * d});
    return tape.relu(tape.add_rowvec(
        tape.matmul(gathered, params_.at(name + ".w")), params_.at(name + ".b")));
  };
  Tensor x = mix(bev, "dec.mix1");
  x = mix(x, "dec.mix2");
  return tape.add_rowvec(tape.matmul(x, params_.at("dec.out.w")),
                         params_.at("dec.out.b"));
}

Tensor focal_loss(Tape& tape, const Tensor& logits, const Tensor& targets,
                  const LossConfig& cfg) {
  if (logits.shape() != targets.shape()) {
    throw std::invalid_argument("focal_loss: logits/targets shape mismatch");
  }
  if (cfg.gamma < 0.0 || cfg.alpha <= 0.0 || cfg.alpha >= 1.0) {
    throw std::invalid_argument("focal_loss: invalid gamma/alpha");
  }
  std::vector<double> alpha_t(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double y = targets.at(i);
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument("focal_loss: targets must be binary");
    }
    alpha_t[i] = y == 1.0 ? cfg.alpha : 1.0 - cfg.alpha;
  }
  Tensor alpha(targets.shape(), std::move(alpha_t));

  Tensor p = tape.sigmoid(logits);
  Tensor one_minus_t = tape.add_scalar(tape.neg(targets), 1.0);
  Tensor one_minus_p = tape.add_scalar(tape.neg(p), 1.0);
  Tensor pt = tape.add(tape.mul(targets, p), tape.mul(one_minus_t, one_minus_p));
  Tensor focal = tape.power(tape.add_scalar(tape.neg(pt), 1.0), cfg.gamma);
  Tensor nll = tape.neg(tape.log(pt));
  return tape.mean(tape.mul(alpha, tape.mul(focal, nll)));
}

double iou(const std::vector<std::uint8_t>& pred,
           const std::vector<std::uint8_t>& gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("iou: size mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> distance_banded_iou(const std::vector<std::uint8_t>& pred,
                                        const std::vector<std::uint8_t>& gt,
                                        const BevGrid& grid,
                                        const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("banded iou: need >= 2 edges");
  const std::size_t bands = edges.size() - 1;
  std::vector<std::size_t> inter(bands, 0), uni(bands, 0);
  for (int j = 0; j < grid.cells_y; ++j) {
    for (int i = 0; i < grid.cells_x; ++i) {
      const double dist = grid.cell_center(i, j).norm();
      const std::size_t q = static_cast<std::size_t>(grid.query_index(i, j));
      for (std::size_t b = 0; b < bands; ++b) {
        if (dist >= edges[b] && dist < edges[b + 1]) {
          const bool p = pred[q] != 0, g = gt[q] != 0;
          inter[b] += (p && g) ? 1 : 0;
          uni[b] += (p || g) ? 1 : 0;
          break;
        }
      }
    }
  }
  std::vector<double> out(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    out[b] = uni[b] == 0 ? 1.0
                         : static_cast<double>(inter[b]) / static_cast<double>(uni[b]);
  }
  return out;
}

}  // namespace eaf
