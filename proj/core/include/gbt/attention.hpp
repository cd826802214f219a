#pragma once

#include <string>

#include "gbt/arch.hpp"
#include "gbt/graph.hpp"
#include "gbt/mat.hpp"
#include "gbt/param_store.hpp"
#include "gbt/params.hpp"

namespace gbt {

// Scaled dot-product attention on plain matrices: softmax(Q K^T / sqrt(d_q)) V.
template <class S>
BasicMat<S> att(const BasicMat<S>& Q, const BasicMat<S>& K, const BasicMat<S>& V, int d_q) {
  if (K.rows != V.rows) throw ShapeMismatch("att: K rows " + K.shape() + " vs V rows " + V.shape());
  return mm(scaled_softmax(mm_nt(Q, K), d_q), V);
}

template <class S>
Var g_att(GraphT<S>& g, Var q, Var k, Var v, int d_q) {
  if (g.value(k).rows != g.value(v).rows)
    throw ShapeMismatch("att: K rows " + g.value(k).shape() + " vs V rows " + g.value(v).shape());
  return g.matmul(g.softmax_rows(g.matmul_nt(q, k), d_q), v);
}

// x W + b.
template <class S>
Var g_linear(GraphT<S>& g, Var x, Var w, Var b) {
  return g.add_row(g.matmul(x, w), b);
}

// Parameter handles of one attention block, loaded from "<prefix>att.*".
struct AttVars {
  Var wq, bq, wk, bk, wv, bv, wo, bo, ln_g, ln_b;
};

template <class S>
AttVars load_att_vars(GraphT<S>& g, const std::string& prefix) {
  AttVars a;
  a.wq = g.param(prefix + "att.wq");
  a.bq = g.param(prefix + "att.bq");
  a.wk = g.param(prefix + "att.wk");
  a.bk = g.param(prefix + "att.bk");
  a.wv = g.param(prefix + "att.wv");
  a.bv = g.param(prefix + "att.bv");
  a.wo = g.param(prefix + "att.wo");
  a.bo = g.param(prefix + "att.bo");
  a.ln_g = g.param(prefix + "att.ln.g");
  a.ln_b = g.param(prefix + "att.ln.b");
  return a;
}

struct FfbVars {
  Var w1, b1, w2, b2, ln_g, ln_b;
};

template <class S>
FfbVars load_ffb_vars(GraphT<S>& g, const std::string& prefix) {
  FfbVars f;
  f.w1 = g.param(prefix + "ffb.w1");
  f.b1 = g.param(prefix + "ffb.b1");
  f.w2 = g.param(prefix + "ffb.w2");
  f.b2 = g.param(prefix + "ffb.b2");
  f.ln_g = g.param(prefix + "ffb.ln.g");
  f.ln_b = g.param(prefix + "ffb.ln.b");
  return f;
}

// Multi-head attention MHA(X, Y): queries from X, keys and values from Y,
// heads = contiguous d/H column groups of the fused projections, outputs
// concatenated and projected by wo.
template <class S>
Var g_mha(GraphT<S>& g, Var x, Var y, const AttVars& a, int H) {
  const int d = g.value(x).cols;
  if (d % H != 0)
    throw HeadDivisibility("d=" + std::to_string(d) + " not divisible by H=" + std::to_string(H));
  const int da = d / H;
  Var q = g_linear(g, x, a.wq, a.bq);
  Var k = g_linear(g, y, a.wk, a.bk);
  Var v = g_linear(g, y, a.wv, a.bv);
  Var heads;
  for (int h = 0; h < H; ++h) {
    Var qh = g.slice_cols(q, h * da, da);
    Var kh = g.slice_cols(k, h * da, da);
    Var vh = g.slice_cols(v, h * da, da);
    Var oh = g_att(g, qh, kh, vh, da);
    heads = h == 0 ? oh : g.concat_cols(heads, oh);
  }
  return g_linear(g, heads, a.wo, a.bo);
}

// Multi-head attention block MAB(X, Y) = LN(X + MHA(X, Y)).
template <class S>
Var g_mab(GraphT<S>& g, Var x, Var y, const AttVars& a, int H, S eps) {
  return g.layer_norm(g.add(x, g_mha(g, x, y, a, H)), a.ln_g, a.ln_b, eps);
}

// Feed-forward block FFB(M) = LN(M + act(M W1 + b1) W2 + b2).
template <class S>
Var g_ffb(GraphT<S>& g, Var m, const FfbVars& f, const std::string& activation, S eps) {
  Var h = g_linear(g, m, f.w1, f.b1);
  if (activation == "relu") h = g.relu(h);
  else if (activation == "gelu") h = g.gelu(h);
  else throw BadArgument("unknown activation '" + activation + "'");
  Var out = g_linear(g, h, f.w2, f.b2);
  return g.layer_norm(g.add(m, out), f.ln_g, f.ln_b, eps);
}

// One single-stream encoder sublayer on parameters at `prefix`:
// FFB(MAB(X, X)), or just MAB when the sublayer has no feed-forward block.
template <class S>
Var g_encoder_sublayer(GraphT<S>& g, Var x, const std::string& prefix, int H, const std::string& activation,
                       S eps, bool with_ffb) {
  AttVars a = load_att_vars(g, prefix);
  Var m = g_mab(g, x, x, a, H, eps);
  if (!with_ffb) return m;
  FfbVars f = load_ffb_vars(g, prefix);
  return g_ffb(g, m, f, activation, eps);
}

// Literal single-stream encoder: the spec's sublayers applied to one token
// matrix, using the language-stream tensors throughout. This is the oracle
// side of the single-stream recovery equivalence.
template <class S>
Var g_encode_stack(GraphT<S>& g, Var x, const ArchSpec& spec) {
  Var h = x;
  for (size_t i = 0; i < spec.sublayers.size(); ++i)
    h = g_encoder_sublayer(g, h, sublayer_prefix(static_cast<int>(i), 'l'), spec.h, spec.activation,
                           S(spec.ln_eps), spec.sublayers[i].ffb);
  return h;
}

// Matrix-level conveniences used by tests and the CLI: run the graph form
// and return values.
Mat mha(const Mat& X, const Mat& Y, ParamStore& ps, const std::string& prefix, int H);
Mat mab(const Mat& X, const Mat& Y, ParamStore& ps, const std::string& prefix, int H, double eps);
Mat ffb(const Mat& M, ParamStore& ps, const std::string& prefix, const std::string& activation, double eps);
Mat encode_stack(const Mat& X, ParamStore& ps, const ArchSpec& spec);

}  // namespace gbt
