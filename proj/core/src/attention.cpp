#include "eaf/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace eaf {

namespace {
constexpr double kMaskLogit = -1e300;
}

void AttentionConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("attention: n_heads must divide d_model");
  }
}

WeightTensors make_weight_tensors(
    const std::vector<const AttentionField*>& fields, VisibilityMode mode,
    bool w_requires_grad) {
  if (fields.empty()) {
    throw std::invalid_argument("make_weight_tensors: no fields");
  }
  const std::size_t n_q = fields[0]->n_q;
  std::size_t total_k = 0;
  for (const auto* f : fields) {
    if (f->n_q != n_q) {
      throw std::invalid_argument("make_weight_tensors: query count mismatch");
    }
    total_k += f->n_k;
  }

  std::vector<double> w(n_q * total_k);
  std::size_t off = 0;
  for (const auto* f : fields) {
    for (std::size_t q = 0; q < n_q; ++q) {
      const double* src = f->weights.data() + q * f->n_k;
      std::copy(src, src + f->n_k, w.data() + q * total_k + off);
    }
    off += f->n_k;
  }

  WeightTensors out;
  out.fields = fields;
  out.w = Tensor({n_q, total_k}, std::move(w), w_requires_grad);

  if (mode == VisibilityMode::kMasked) {
    std::vector<double> mask(n_q * total_k, 0.0);
    bool any = false;
    for (std::size_t q = 0; q < n_q; ++q) {
      bool all_masked = true;
      for (const auto* f : fields) all_masked = all_masked && !f->query_visibility[q];
      if (all_masked) continue;  // keep zero logits, softmax stays uniform-safe
      off = 0;
      for (const auto* f : fields) {
        if (!f->query_visibility[q]) {
          any = true;
          for (std::size_t k = 0; k < f->n_k; ++k)
            mask[q * total_k + off + k] = kMaskLogit;
        }
        off += f->n_k;
      }
    }
    if (any) out.mask = Tensor({n_q, total_k}, std::move(mask), false);
  }
  return out;
}

Tensor weighted_attention(Tape& tape, const Tensor& w, const Tensor& q,
                          const Tensor& k, const Tensor& v, int n_heads,
                          const Tensor* mask) {
  const std::size_t n_q = q.rows(), d = q.cols();
  const std::size_t n_k = k.rows();
  if (k.cols() != d || v.cols() != d || v.rows() != n_k) {
    throw std::invalid_argument("weighted_attention: Q/K/V shape mismatch");
  }
  if (w.rows() != n_q || w.cols() != n_k) {
    throw std::invalid_argument("weighted_attention: W shape mismatch");
  }
  for (double x : w.data()) {
    if (x < 0.0 || x > 1.0) {
      throw std::invalid_argument("weighted_attention: W entry outside [0,1]");
    }
  }
  if (n_heads <= 0 || d % static_cast<std::size_t>(n_heads) != 0) {
    throw std::invalid_argument("weighted_attention: n_heads must divide d");
  }
  const std::size_t d_k = d / n_heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    const std::size_t c0 = h * d_k, c1 = c0 + d_k;
    Tensor qh = n_heads == 1 ? q : tape.slice_cols(q, c0, c1);
    Tensor kh = n_heads == 1 ? k : tape.slice_cols(k, c0, c1);
    Tensor vh = n_heads == 1 ? v : tape.slice_cols(v, c0, c1);
    Tensor logits = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dk);
    Tensor weighted = tape.mul(w, logits);
    if (mask != nullptr && mask->defined()) {
      weighted = tape.add(weighted, *mask);
    }
    heads.push_back(tape.matmul(tape.softmax_rows(weighted), vh));
  }
  return n_heads == 1 ? heads[0] : tape.concat_cols(heads);
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, double eps) {
  const std::size_t d = x.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  Tensor ones_col = Tensor::full({d, 1}, 1.0);
  Tensor ones_row = Tensor::full({1, d}, 1.0);
  // Row means broadcast back over columns via rank-1 matmuls.
  Tensor mu = tape.matmul(tape.scale(tape.matmul(x, ones_col), inv_d), ones_row);
  Tensor centered = tape.sub(x, mu);
  Tensor var = tape.matmul(
      tape.scale(tape.matmul(tape.mul(centered, centered), ones_col), inv_d),
      ones_row);
  Tensor inv_std = tape.power(tape.add_scalar(var, eps), -0.5);
  Tensor normalized = tape.mul(centered, inv_std);
  // gain/bias broadcast per row
  Tensor scaled = tape.mul(normalized, tape.matmul(Tensor::full({x.rows(), 1}, 1.0), gain));
  return tape.add_rowvec(scaled, bias);
}

Tensor cross_attention_block(Tape& tape, const Tensor& queries,
                             const std::vector<Tensor>& view_features,
                             const WeightTensors& weights,
                             const BlockParams& params,
                             const AttentionConfig& cfg) {
  cfg.validate();
  if (view_features.size() != weights.fields.size()) {
    throw std::invalid_argument("cross_attention_block: view/field count mismatch");
  }
  for (std::size_t i = 0; i < view_features.size(); ++i) {
    if (view_features[i].rows() != weights.fields[i]->n_k) {
      throw std::invalid_argument("cross_attention_block: feature/field size mismatch");
    }
  }
  Tensor feats = view_features.size() == 1 ? view_features[0]
                                           : tape.concat_rows(view_features);
  Tensor qp = tape.matmul(queries, params.wq);
  Tensor kp = tape.matmul(feats, params.wk);
  Tensor vp = tape.matmul(feats, params.wv);
  Tensor attn = weighted_attention(tape, weights.w, qp, kp, vp, cfg.n_heads,
                                   weights.mask.defined() ? &weights.mask : nullptr);
  attn = tape.matmul(attn, params.wo);
  Tensor x1 = tape.add(queries, attn);
  Tensor normed = layer_norm(tape, x1, params.ln_gain, params.ln_bias);
  Tensor hidden = tape.relu(
      tape.add_rowvec(tape.matmul(normed, params.ff1_w), params.ff1_b));
  Tensor ff = tape.add_rowvec(tape.matmul(hidden, params.ff2_w), params.ff2_b);
  return tape.add(x1, ff);
}

}  // namespace eaf
