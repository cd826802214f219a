#include "gbt/params.hpp"

namespace gbt {

std::string sublayer_prefix(int index, char stream) {
  return "enc.s" + std::to_string(index) + "." + stream + ".";
}

namespace {

void declare_stream(ParamStore& ps, const ArchSpec& spec, int index, char stream, const SublayerSpec& sl) {
  const std::string p = sublayer_prefix(index, stream);
  const std::string l = sublayer_prefix(index, 'l');
  const bool tied_stream = stream == 'v' && sl.active == Active::both;

  auto mat = [&](const std::string& leaf, int r, int c, bool tied) {
    if (tied_stream && tied) ps.alias(p + leaf, l + leaf);
    else ps.create(p + leaf, r, c);
  };

  mat("att.wq", spec.d, spec.d, sl.ties.q);
  mat("att.bq", 1, spec.d, sl.ties.q);
  mat("att.wk", spec.d, spec.d, sl.ties.k);
  mat("att.bk", 1, spec.d, sl.ties.k);
  mat("att.wv", spec.d, spec.d, sl.ties.v);
  mat("att.bv", 1, spec.d, sl.ties.v);
  mat("att.wo", spec.d, spec.d, sl.ties.o);
  mat("att.bo", 1, spec.d, sl.ties.o);
  mat("att.ln.g", 1, spec.d, sl.ties.ln);
  mat("att.ln.b", 1, spec.d, sl.ties.ln);
  if (sl.ffb) {
    mat("ffb.w1", spec.d, spec.d_ff, sl.ties.ff);
    mat("ffb.b1", 1, spec.d_ff, sl.ties.ff);
    mat("ffb.w2", spec.d_ff, spec.d, sl.ties.ff);
    mat("ffb.b2", 1, spec.d, sl.ties.ff);
    mat("ffb.ln.g", 1, spec.d, sl.ties.ln);
    mat("ffb.ln.b", 1, spec.d, sl.ties.ln);
  }
}

}  // namespace

ParamStore declare_params(const ArchSpec& spec) {
  validate(spec);
  ParamStore ps;

  ps.create("embed.tok", spec.vocab, spec.d);
  ps.create("embed.pos", spec.max_t, spec.d);
  ps.create("embed.seg", 2, spec.d);
  ps.create("embed.ln.g", 1, spec.d);
  ps.create("embed.ln.b", 1, spec.d);
  if (spec.embed_variant == EmbedVariant::box5_global) ps.create("embed.gimg.w", spec.d_feat, spec.d);

  ps.create("vembed.feat.w", spec.d_feat, spec.d);
  if (spec.embed_variant != EmbedVariant::none) ps.create("vembed.box.w", 5, spec.d);
  ps.create("vembed.ln.g", 1, spec.d);
  ps.create("vembed.ln.b", 1, spec.d);

  for (size_t i = 0; i < spec.sublayers.size(); ++i) {
    const auto& sl = spec.sublayers[i];
    int idx = static_cast<int>(i);
    if (sl.active != Active::v) declare_stream(ps, spec, idx, 'l', sl);
    if (sl.active != Active::l) declare_stream(ps, spec, idx, 'v', sl);
  }

  ps.create("head.mlm.w", spec.vocab, spec.d);
  ps.create("head.mlm.b", 1, spec.vocab);
  ps.create("head.mrc.w", spec.n_classes, spec.d);
  const int dp = spec.pool_dim();
  ps.create("head.pool.l.w", spec.d, dp);
  ps.create("head.pool.l.b", 1, dp);
  ps.create("head.pool.v.w", spec.d, dp);
  ps.create("head.pool.v.b", 1, dp);
  ps.create("head.itm.w", dp, 1);
  ps.create("head.itm.b", 1, 1);
  return ps;
}

bool is_weight_tensor(const std::string& name) {
  auto dot = name.rfind('.');
  std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  if (leaf.empty()) return false;
  if (leaf[0] == 'b') return false;  // bias vectors start at zero
  if (leaf == "g") return false;     // layer-norm gains start at one
  return true;
}

void init_params(ParamStore& ps, const Rng& root, double sigma, double clip) {
  for (const auto& t : ps.tensors()) {
    auto dot = t->name.rfind('.');
    std::string leaf = dot == std::string::npos ? t->name : t->name.substr(dot + 1);
    if (leaf == "g") {
      for (auto& x : t->value.a) x = 1.0;
    } else if (!is_weight_tensor(t->name)) {
      for (auto& x : t->value.a) x = 0.0;
    } else {
      Rng r = root.substream("init/" + t->name);
      for (auto& x : t->value.a) x = r.trunc_normal(sigma, clip);
    }
  }
}

ParamCounts count_params(const ArchSpec& spec) {
  ParamStore ps = declare_params(spec);
  ParamCounts c;
  for (const auto& t : ps.tensors()) {
    size_t n = t->value.size();
    c.total += n;
    if (t->name.rfind("embed.", 0) == 0 || t->name.rfind("vembed.", 0) == 0) c.embeddings += n;
    else if (t->name.find(".att.") != std::string::npos) c.attention += n;
    else if (t->name.find(".ffb.") != std::string::npos) c.ffb += n;
    else if (t->name.rfind("head.", 0) == 0) c.heads += n;
  }
  c.n_tensors = ps.n_tensors();
  c.n_aliases = ps.n_aliases();
  return c;
}

}  // namespace gbt
