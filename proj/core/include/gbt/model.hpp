#pragma once

#include "gbt/bimodal.hpp"
#include "gbt/objectives.hpp"

namespace gbt {

struct ExampleLossVars {
  Var mlm, mrc, itm, total;
  int n_mlm = 0;
  int n_mrc = 0;
};

// Full forward pass for one masked example: embeddings, gated encoder, and
// the weighted scalarization of MLM + MRC-KL + ITM. MLM/MRC terms are only
// built for matched pairs (mismatched captions say nothing about the image).
template <class S>
ExampleLossVars build_example_loss(GraphT<S>& g, const ArchSpec& spec, const MaskedExample& ex,
                                   MaskPath path = MaskPath::additive) {
  Var h_l0 = g_embed_text(g, spec, ex.text, ex.global_img);
  Var h_v0 = g_embed_vision(g, spec, ex.vision);
  StreamPair h = encode_bimodal_g(g, h_l0, h_v0, spec, path);

  ExampleLossVars out;
  const bool use_masked = ex.itm_match;
  out.n_mlm = use_masked ? static_cast<int>(ex.mlm.size()) : 0;
  out.n_mrc = use_masked ? static_cast<int>(ex.mrc.size()) : 0;
  out.mlm = use_masked ? g_mlm_loss(g, h.l, ex.mlm) : g.constant(1, 1, S(0.0));
  out.mrc = use_masked ? g_mrc_kl_loss(g, h.v, ex.mrc, ex.vision.detector_dists) : g.constant(1, 1, S(0.0));

  Var h_cls = g.slice_rows(h.l, 0, 1);
  Var h_img = g.slice_rows(h.v, 0, 1);
  Var pooled = g_multiplicative_pool(g, h_cls, h_img);
  out.itm = g_itm_loss(g, pooled, ex.itm_match);

  Var total = g.scale(out.mlm, S(spec.weights.mlm));
  total = g.add(total, g.scale(out.mrc, S(spec.weights.mrc_kl)));
  total = g.add(total, g.scale(out.itm, S(spec.weights.itm)));
  out.total = total;
  return out;
}

template <class S>
LossBreakdown read_breakdown(const GraphT<S>& g, const ExampleLossVars& v) {
  LossBreakdown b;
  b.mlm = g.scalar(v.mlm);
  b.mrc_kl = g.scalar(v.mrc);
  b.itm = g.scalar(v.itm);
  b.total = g.scalar(v.total);
  b.n_mlm = v.n_mlm;
  b.n_mrc = v.n_mrc;
  return b;
}

// ITM logit for an unmasked example; > 0 means "match".
template <class S>
Var build_itm_logit(GraphT<S>& g, const ArchSpec& spec, const Example& ex, MaskPath path = MaskPath::additive) {
  Var h_l0 = g_embed_text(g, spec, ex.text, ex.global_img);
  Var h_v0 = g_embed_vision(g, spec, ex.vision);
  StreamPair h = encode_bimodal_g(g, h_l0, h_v0, spec, path);
  Var pooled = g_multiplicative_pool(g, g.slice_rows(h.l, 0, 1), g.slice_rows(h.v, 0, 1));
  return g_itm_logit(g, pooled);
}

}  // namespace gbt
