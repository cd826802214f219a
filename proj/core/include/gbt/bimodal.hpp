#pragma once

#include <string>
#include <utility>

#include "gbt/attention.hpp"

namespace gbt {

// How blocked score blocks are realized. The two paths are exactly
// equivalent: `additive` materializes blocked sub-matrices filled with the
// mask sentinel and lets the softmax zero them; `skip` never evaluates a
// blocked sub-matrix at all.
enum class MaskPath { additive, skip };

struct StreamPair {
  Var l, v;
};

// Assembled gated score matrix for one head and one query stream, additive
// path: [S_toL | S_toV] with blocked blocks filled by the mask sentinel.
// Key handles may be invalid for blocked blocks (they are never computed);
// widths of those blocks are given by n_l / n_v.
template <class S>
Var g_gated_scores(GraphT<S>& g, Var q, Var k_l, Var k_v, bool gate_to_l, bool gate_to_v, int n_l, int n_v) {
  if (gate_to_l && gate_to_v) throw InvalidGateConfig("query row fully blocked");
  const int nq = g.value(q).rows;
  Var s_l = gate_to_l ? g.constant(nq, n_l, S(kMaskSentinel)) : g.matmul_nt(q, k_l);
  Var s_v = gate_to_v ? g.constant(nq, n_v, S(kMaskSentinel)) : g.matmul_nt(q, k_v);
  return g.concat_cols(s_l, s_v);
}

namespace detail_bimodal {

// Attention output for one head and one query stream under its two gates.
template <class S>
Var head_output(GraphT<S>& g, MaskPath path, Var q, Var k_l, Var k_v, Var v_l, Var v_v,
                bool gate_to_l, bool gate_to_v, int d_q, int n_l, int n_v) {
  if (gate_to_l && gate_to_v) throw InvalidGateConfig("query row fully blocked");
  if (path == MaskPath::skip) {
    if (gate_to_l) return g.matmul(g.softmax_rows(g.matmul_nt(q, k_v), d_q), v_v);
    if (gate_to_v) return g.matmul(g.softmax_rows(g.matmul_nt(q, k_l), d_q), v_l);
  }
  Var scores = g_gated_scores(g, q, k_l, k_v, gate_to_l, gate_to_v, n_l, n_v);
  return g.matmul(g.softmax_rows(scores, d_q), g.concat_rows(v_l, v_v));
}

}  // namespace detail_bimodal

// Gated bimodal multi-head attention: one joint attention over both streams
// whose four score sub-matrices can be individually blocked. Each stream has
// its own projections (possibly aliased by ties); gates=0 with full tying is
// exactly single-stream MHA on the concatenation, and the dual-stream
// patterns arise from blocking the intra or inter blocks.
template <class S>
StreamPair g_bimodal_mha(GraphT<S>& g, Var x_l, Var x_v, const AttVars& al, const AttVars& av,
                         const GateSet& gates, int H, MaskPath path) {
  const int d = g.value(x_l).cols;
  if (d != g.value(x_v).cols)
    throw ShapeMismatch("stream widths differ: " + g.value(x_l).shape() + " vs " + g.value(x_v).shape());
  if (d % H != 0)
    throw HeadDivisibility("d=" + std::to_string(d) + " not divisible by H=" + std::to_string(H));
  if (gates.ll && gates.lv) throw InvalidGateConfig("language row fully blocked");
  if (gates.vl && gates.vv) throw InvalidGateConfig("vision row fully blocked");
  const int da = d / H;

  // Each query stream applies its *own* key/value maps to whatever it
  // attends, own modality or the other one. With full tying and open gates
  // this is literally single-stream attention on [X_L; X_V]; with the intra
  // blocks gated it reduces to the per-stream cross-attention blocks with
  // their own parameters. A blocked block's keys are never computed; its
  // values are needed only by the additive path, where their weights are
  // exactly zero.
  const int n_l = g.value(x_l).rows;
  const int n_v = g.value(x_v).rows;
  const bool values_eager = path == MaskPath::additive;

  Var q_l = g_linear(g, x_l, al.wq, al.bq);
  Var q_v = g_linear(g, x_v, av.wq, av.bq);
  Var k_ll = !gates.ll ? g_linear(g, x_l, al.wk, al.bk) : Var{};
  Var k_lv = !gates.lv ? g_linear(g, x_v, al.wk, al.bk) : Var{};
  Var v_ll = (!gates.ll || values_eager) ? g_linear(g, x_l, al.wv, al.bv) : Var{};
  Var v_lv = (!gates.lv || values_eager) ? g_linear(g, x_v, al.wv, al.bv) : Var{};
  Var k_vl = !gates.vl ? g_linear(g, x_l, av.wk, av.bk) : Var{};
  Var k_vv = !gates.vv ? g_linear(g, x_v, av.wk, av.bk) : Var{};
  Var v_vl = (!gates.vl || values_eager) ? g_linear(g, x_l, av.wv, av.bv) : Var{};
  Var v_vv = (!gates.vv || values_eager) ? g_linear(g, x_v, av.wv, av.bv) : Var{};

  Var heads_l, heads_v;
  for (int h = 0; h < H; ++h) {
    auto sl = [&](Var m) { return m.valid() ? g.slice_cols(m, h * da, da) : Var{}; };
    Var o_l = detail_bimodal::head_output(g, path, sl(q_l), sl(k_ll), sl(k_lv), sl(v_ll), sl(v_lv),
                                          gates.ll, gates.lv, da, n_l, n_v);
    Var o_v = detail_bimodal::head_output(g, path, sl(q_v), sl(k_vl), sl(k_vv), sl(v_vl), sl(v_vv),
                                          gates.vl, gates.vv, da, n_l, n_v);
    heads_l = h == 0 ? o_l : g.concat_cols(heads_l, o_l);
    heads_v = h == 0 ? o_v : g.concat_cols(heads_v, o_v);
  }
  return {g_linear(g, heads_l, al.wo, al.bo), g_linear(g, heads_v, av.wo, av.bo)};
}

// One gated bimodal sublayer: per-stream MAB residual + LN, then per-stream
// FFB when the sublayer has one. Single-stream-only sublayers (active l/v)
// run a plain encoder sublayer on that stream and pass the other through.
template <class S>
StreamPair g_gated_sublayer(GraphT<S>& g, Var x_l, Var x_v, const ArchSpec& spec, int index,
                            MaskPath path = MaskPath::additive) {
  const auto& sl = spec.sublayers.at(index);
  const S eps(spec.ln_eps);
  if (sl.active == Active::l)
    return {g_encoder_sublayer(g, x_l, sublayer_prefix(index, 'l'), spec.h, spec.activation, eps, sl.ffb), x_v};
  if (sl.active == Active::v)
    return {x_l, g_encoder_sublayer(g, x_v, sublayer_prefix(index, 'v'), spec.h, spec.activation, eps, sl.ffb)};

  AttVars al = load_att_vars(g, sublayer_prefix(index, 'l'));
  AttVars av = load_att_vars(g, sublayer_prefix(index, 'v'));
  StreamPair o = g_bimodal_mha(g, x_l, x_v, al, av, sl.gates, spec.h, path);
  Var h_l = g.layer_norm(g.add(x_l, o.l), al.ln_g, al.ln_b, eps);
  Var h_v = g.layer_norm(g.add(x_v, o.v), av.ln_g, av.ln_b, eps);
  if (!sl.ffb) return {h_l, h_v};
  FfbVars fl = load_ffb_vars(g, sublayer_prefix(index, 'l'));
  FfbVars fv = load_ffb_vars(g, sublayer_prefix(index, 'v'));
  return {g_ffb(g, h_l, fl, spec.activation, eps), g_ffb(g, h_v, fv, spec.activation, eps)};
}

// Full gated encoder over both streams.
template <class S>
StreamPair encode_bimodal_g(GraphT<S>& g, Var x_l, Var x_v, const ArchSpec& spec,
                            MaskPath path = MaskPath::additive) {
  StreamPair h{x_l, x_v};
  for (size_t i = 0; i < spec.sublayers.size(); ++i)
    h = g_gated_sublayer(g, h.l, h.v, spec, static_cast<int>(i), path);
  return h;
}

// Matrix-level wrapper.
std::pair<Mat, Mat> encode_bimodal(const Mat& X_L, const Mat& X_V, ParamStore& ps, const ArchSpec& spec,
                                   MaskPath path = MaskPath::additive);

}  // namespace gbt
