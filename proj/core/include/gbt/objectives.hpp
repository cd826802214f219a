#pragma once

#include <vector>

#include "gbt/embeddings.hpp"
#include "gbt/rng.hpp"

namespace gbt {

struct MaskingPolicy {
  double text_mask_prob = 0.15;
  double p_mask = 0.8;  // replace with [MASK]
  double p_random = 0.1;
  double p_keep = 0.1;
  double region_mask_prob = 0.15;
};

// Throws BadArgument unless probabilities are in range and the split sums to 1.
void validate_policy(const MaskingPolicy& p);

struct MlmLabel {
  int position = 0;  // row in the text batch
  int original_id = 0;
};

struct MrcLabel {
  int region_row = 0;  // row in the vision batch (never the [IMG] row)
};

// One text+image pair ready for the model, before masking.
struct Example {
  TextBatch text;
  VisionBatch vision;  // [IMG] row already prepended
  std::vector<double> global_img;
  bool itm_match = true;
};

struct MaskedExample {
  TextBatch text;
  VisionBatch vision;
  std::vector<double> global_img;
  bool itm_match = true;
  std::vector<MlmLabel> mlm;
  std::vector<MrcLabel> mrc;
};

// Masks ordinary tokens at text_mask_prob with the mask/random/keep split and
// zeroes region features at region_mask_prob. [CLS], [SEP] and the [IMG] row
// are never selected. Boxes and detector distributions of masked regions are
// kept; labels record what the model must reconstruct.
MaskedExample apply_masking(const Example& ex, const MaskingPolicy& policy, Rng& rng, int vocab);

// Per-example loss breakdown (weighted scalarization).
struct LossBreakdown {
  double mlm = 0.0;
  double mrc_kl = 0.0;
  double itm = 0.0;
  double total = 0.0;
  int n_mlm = 0;
  int n_mrc = 0;
};

// Mean cross-entropy over masked positions of softmax(h W_vocab^T + b);
// returns a literal zero branch when nothing is masked.
template <class S>
Var g_mlm_loss(GraphT<S>& g, Var hidden_l, const std::vector<MlmLabel>& labels) {
  if (labels.empty()) return g.constant(1, 1, S(0.0));
  std::vector<int> rows, targets;
  rows.reserve(labels.size());
  targets.reserve(labels.size());
  for (const auto& lab : labels) {
    rows.push_back(lab.position);
    targets.push_back(lab.original_id);
  }
  Var picked = g.gather_rows(hidden_l, rows);
  Var logits = g.add_row(g.matmul_nt(picked, g.param("head.mlm.w")), g.param("head.mlm.b"));
  return g.scale(g.cross_entropy_sum(logits, targets), S(1.0 / static_cast<double>(labels.size())));
}

// Mean KL(detector target || softmax(h W_cls^T)) over masked regions.
template <class S>
Var g_mrc_kl_loss(GraphT<S>& g, Var hidden_v, const std::vector<MrcLabel>& labels, const Mat& detector_dists) {
  if (labels.empty()) return g.constant(1, 1, S(0.0));
  std::vector<int> rows;
  rows.reserve(labels.size());
  for (const auto& lab : labels) rows.push_back(lab.region_row);
  BasicMat<S> targets(static_cast<int>(labels.size()), detector_dists.cols);
  for (size_t i = 0; i < labels.size(); ++i)
    for (int c = 0; c < detector_dists.cols; ++c)
      targets(static_cast<int>(i), c) = S(detector_dists(labels[i].region_row, c));
  Var picked = g.gather_rows(hidden_v, rows);
  Var logits = g.matmul_nt(picked, g.param("head.mrc.w"));
  return g.scale(g.kl_sum(logits, std::move(targets)), S(1.0 / static_cast<double>(labels.size())));
}

// (W_L h_cls + b_L) elementwise* (W_V h_img + b_V); h_cls/h_img are 1 x d rows.
template <class S>
Var g_multiplicative_pool(GraphT<S>& g, Var h_cls, Var h_img) {
  Var pl = g.add_row(g.matmul(h_cls, g.param("head.pool.l.w")), g.param("head.pool.l.b"));
  Var pv = g.add_row(g.matmul(h_img, g.param("head.pool.v.w")), g.param("head.pool.v.b"));
  return g.hadamard(pl, pv);
}

template <class S>
Var g_itm_logit(GraphT<S>& g, Var pooled) {
  return g.add_row(g.matmul(pooled, g.param("head.itm.w")), g.param("head.itm.b"));
}

// Binary cross-entropy of sigmoid(w . pooled + b) against the match label.
template <class S>
Var g_itm_loss(GraphT<S>& g, Var pooled, bool match) {
  return g.bce_with_logit(g_itm_logit(g, pooled), match);
}

}  // namespace gbt
