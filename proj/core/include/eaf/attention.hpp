#pragma once

#include <vector>

#include "eaf/field.hpp"
#include "eaf/tensor.hpp"

namespace eaf {

struct AttentionConfig {
  int d_model = 32;
  int n_heads = 4;  // must divide d_model
  VisibilityMode visibility_mode = VisibilityMode::kLiteral;

  int d_k() const { return d_model / n_heads; }
  void validate() const;
};

/// Weight matrix and optional additive logit mask for one scale, with the
/// per-view fields concatenated column-wise in view order. W participates in
/// the tape as a leaf; its grad is read back for learnable lambda.
struct WeightTensors {
  Tensor w;                // n_q x (sum of n_k over views)
  Tensor mask;             // undefined unless masked visibility produced one
  std::vector<const AttentionField*> fields;  // column-block sources, in order
};

/// Builds the concatenated W (and -inf mask in masked mode) for the fields of
/// one scale. A query row masked in every view falls back to unmasked zero
/// logits so softmax stays finite.
WeightTensors make_weight_tensors(const std::vector<const AttentionField*>& fields,
                                  VisibilityMode mode, bool w_requires_grad);

/// softmax(W .* (Q K^T) / sqrt(d_k)) V, evaluated per head on column blocks
/// of Q/K/V with the same W, then re-concatenated. mask (optional) is added
/// to the weighted logits before softmax.
Tensor weighted_attention(Tape& tape, const Tensor& w, const Tensor& q,
                          const Tensor& k, const Tensor& v, int n_heads,
                          const Tensor* mask = nullptr);

/// Parameters of one encoder block. Shapes: wq/wk/wv/wo d x d,
/// ff1 d x h (+ bias 1 x h), ff2 h x d (+ bias 1 x d), ln gain/bias 1 x d.
struct BlockParams {
  Tensor wq, wk, wv, wo;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
  Tensor ln_gain, ln_bias;
};

/// Layer normalization across the feature dimension of each row, composed
/// from primitive ops so the gradient comes from the tape.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, double eps = 1e-6);

/// Cross-attention encoder block without positional encoding: keys/values
/// from all views share one joint softmax, spatial meaning enters only
/// through W. x1 = q + Attn(q); out = x1 + FF(LN(x1)).
Tensor cross_attention_block(Tape& tape, const Tensor& queries,
                             const std::vector<Tensor>& view_features,
                             const WeightTensors& weights,
                             const BlockParams& params,
                             const AttentionConfig& cfg);

}  // namespace eaf
