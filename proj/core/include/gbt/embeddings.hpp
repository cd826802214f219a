#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gbt/arch.hpp"
#include "gbt/graph.hpp"
#include "gbt/mat.hpp"

namespace gbt {

// Special token ids; ordinary words start at kFirstWordId.
inline constexpr int kClsId = 0;
inline constexpr int kSepId = 1;
inline constexpr int kMaskId = 2;
inline constexpr int kFirstWordId = 3;

struct TextBatch {
  std::vector<int> token_ids;    // [CLS] w ... w [SEP]
  std::vector<int> positions;    // usually 0..T-1
  std::vector<int> segment_ids;  // 0 = text

  int length() const { return static_cast<int>(token_ids.size()); }
};

// Builds a [CLS] ... [SEP] batch with iota positions and zero segments.
TextBatch make_text_batch(const std::vector<int>& word_ids);

struct VisionBatch {
  Mat features;        // K x d_feat
  Mat boxes;           // K x 4 pixel coords (x1, y1, x2, y2)
  double width = 0.0;  // image size in pixels
  double height = 0.0;
  Mat detector_dists;  // K x C rows summing to 1

  int regions() const { return features.rows; }
};

// Checks box and distribution invariants; throws InvalidBox /
// InvalidDistribution / ShapeMismatch / EmptyRegions.
void validate_vision(const VisionBatch& b);

// (x1/W, y1/H, x2/W, y2/H, area/(W*H)) rows.
Mat box5(const VisionBatch& b);

// Mean-pooled feature over regions plus the full-image box.
std::pair<std::vector<double>, std::array<double, 4>> make_img_token(const VisionBatch& b);

// New batch with the [IMG] token prepended as region 0 (uniform detector
// distribution; the [IMG] row is never masked or scored).
VisionBatch with_img_token(const VisionBatch& b);

// Mean of feature rows; the raw global image vector the vl-bert-style text
// embedding consumes.
std::vector<double> global_image_feature(const VisionBatch& b);

// Text embedding rows: LN(tok + pos + seg (+ proj(global_img))).
// global_img must be non-empty exactly when the variant requires it.
template <class S>
Var g_embed_text(GraphT<S>& g, const ArchSpec& spec, const TextBatch& b, const std::vector<double>& global_img) {
  if (b.token_ids.empty()) throw ShapeMismatch("empty text batch");
  if (b.positions.size() != b.token_ids.size() || b.segment_ids.size() != b.token_ids.size())
    throw ShapeMismatch("text batch field lengths differ");
  for (int id : b.token_ids)
    if (id < 0 || id >= spec.vocab) throw IdOutOfRange("token id " + std::to_string(id));
  for (int p : b.positions)
    if (p < 0 || p >= spec.max_t) throw IdOutOfRange("position " + std::to_string(p));
  for (int s : b.segment_ids)
    if (s < 0 || s >= 2) throw IdOutOfRange("segment id " + std::to_string(s));
  const bool wants_global = spec.embed_variant == EmbedVariant::box5_global;
  if (wants_global != !global_img.empty())
    throw BadArgument(wants_global ? "variant requires a global image feature" : "unexpected global image feature");

  Var tok = g.gather_rows(g.param("embed.tok"), b.token_ids);
  Var pos = g.gather_rows(g.param("embed.pos"), b.positions);
  Var seg = g.gather_rows(g.param("embed.seg"), b.segment_ids);
  Var sum = g.add(g.add(tok, pos), seg);
  if (wants_global) {
    if (static_cast<int>(global_img.size()) != spec.d_feat)
      throw ShapeMismatch("global image feature length " + std::to_string(global_img.size()));
    BasicMat<S> gi(1, spec.d_feat);
    for (int j = 0; j < spec.d_feat; ++j) gi.a[j] = S(global_img[j]);
    Var proj = g.matmul(g.input(std::move(gi)), g.param("embed.gimg.w"));
    sum = g.add_row(sum, proj);
  }
  return g.layer_norm(sum, g.param("embed.ln.g"), g.param("embed.ln.b"), S(spec.ln_eps));
}

// Vision embedding rows: LN(W_f feat + W_b box5), box term omitted for
// variant none. The batch should already carry the [IMG] row.
template <class S>
Var g_embed_vision(GraphT<S>& g, const ArchSpec& spec, const VisionBatch& b) {
  validate_vision(b);
  if (b.features.cols != spec.d_feat)
    throw ShapeMismatch("feature width " + std::to_string(b.features.cols) + " vs d_feat " +
                        std::to_string(spec.d_feat));
  BasicMat<S> feats(b.features.rows, b.features.cols);
  for (size_t i = 0; i < feats.a.size(); ++i) feats.a[i] = S(b.features.a[i]);
  Var sum = g.matmul(g.input(std::move(feats)), g.param("vembed.feat.w"));
  if (spec.embed_variant != EmbedVariant::none) {
    Mat b5 = box5(b);
    BasicMat<S> bs(b5.rows, b5.cols);
    for (size_t i = 0; i < bs.a.size(); ++i) bs.a[i] = S(b5.a[i]);
    sum = g.add(sum, g.matmul(g.input(std::move(bs)), g.param("vembed.box.w")));
  }
  return g.layer_norm(sum, g.param("vembed.ln.g"), g.param("vembed.ln.b"), S(spec.ln_eps));
}

// Matrix-level wrappers.
Mat embed_text(const TextBatch& b, const ArchSpec& spec, ParamStore& ps, const std::vector<double>& global_img = {});
Mat embed_vision(const VisionBatch& b, const ArchSpec& spec, ParamStore& ps);

// One image's stored record: the VisionBatch plus its id.
struct ImageRecord {
  uint64_t id = 0;
  VisionBatch batch;
};

// Visual feature record file, magic "VFR1", little-endian. See write_vfr.
std::vector<ImageRecord> read_vfr(const std::string& path);
void write_vfr(const std::string& path, const std::vector<ImageRecord>& images);

// image_id <TAB> caption lines.
struct Caption {
  uint64_t image_id = 0;
  std::string text;
};
std::vector<Caption> read_captions(const std::string& path);
void write_captions(const std::string& path, const std::vector<Caption>& captions);

// Whitespace tokenizer over the synthetic vocabulary: "w<k>" maps to id
// kFirstWordId + k. Throws ParseError on malformed words, IdOutOfRange when
// the id exceeds the vocabulary.
std::vector<int> tokenize(const std::string& caption, int vocab);
std::string word(int k);  // inverse for generation: word id k -> "w<k-3>"

}  // namespace gbt
