#include "gbt/synth.hpp"

#include <algorithm>
#include <filesystem>

namespace gbt {

void validate_synth(const SynthSpec& spec) {
  if (spec.n_pairs < 2) throw BadArgument("n_pairs must be >= 2");
  if (spec.K < 1) throw BadArgument("K must be >= 1");
  if (spec.d_feat < 1) throw BadArgument("d_feat must be >= 1");
  if (spec.C < 2) throw BadArgument("C must be >= 2");
  if (spec.correlation < 0.0 || spec.correlation > 1.0) throw BadArgument("correlation must be in [0, 1]");
  if (!(spec.width > 1.0) || !(spec.height > 1.0)) throw BadArgument("image size must exceed one pixel");
  if (spec.task != "class" && spec.task != "position") throw BadArgument("task must be 'class' or 'position'");
  const int quadrant_words = spec.task == "position" ? 4 : 0;
  if (spec.vocab < kFirstWordId + spec.C + quadrant_words)
    throw BadArgument("vocab too small for " + std::to_string(spec.C) + " class words");
}

namespace {

// Class prototypes are unit-scale so features are O(1) like real detector
// embeddings; per-region noise keeps classes identifiable but not trivial.
Mat class_prototypes(const SynthSpec& spec, const Rng& root) {
  Mat protos(spec.C, spec.d_feat);
  for (int c = 0; c < spec.C; ++c) {
    Rng r = root.substream("proto", static_cast<uint64_t>(c));
    for (int j = 0; j < spec.d_feat; ++j) protos(c, j) = r.normal();
  }
  return protos;
}

void fill_feature(Mat& features, int k, const Mat& protos, int cls, Rng& r) {
  for (int j = 0; j < features.cols; ++j) features(k, j) = protos(cls, j) + 0.1 * r.normal();
}

// Peaked detector distribution, stored so the float32 row still sums to 1
// within reading tolerance: the last entry absorbs the quantization error
// (and carries the peak itself when cls == C-1).
void fill_dist(Mat& dists, int k, int cls, int C) {
  const double rest = 0.2 / C;
  double sum_f32 = 0.0;
  for (int c = 0; c < C - 1; ++c) {
    float q = static_cast<float>(c == cls ? 0.8 + rest : rest);
    dists(k, c) = q;
    sum_f32 += q;
  }
  dists(k, C - 1) = static_cast<float>(1.0 - sum_f32);
}

void random_box(Mat& boxes, int k, double W, double H, Rng& r) {
  double x1 = r.next_unit() * (W - 2.0);
  double x2 = x1 + 1.0 + r.next_unit() * (W - x1 - 1.0);
  double y1 = r.next_unit() * (H - 2.0);
  double y2 = y1 + 1.0 + r.next_unit() * (H - y1 - 1.0);
  boxes(k, 0) = x1;
  boxes(k, 1) = y1;
  boxes(k, 2) = std::min(x2, W);
  boxes(k, 3) = std::min(y2, H);
}

// A jittered box inside quadrant q (0..3, row-major over the 2x2 grid).
void quadrant_box(Mat& boxes, int k, int q, double W, double H, Rng& r) {
  double qx = (q % 2) * (W / 2.0);
  double qy = (q / 2) * (H / 2.0);
  double x1 = qx + r.next_unit() * (W / 8.0);
  double y1 = qy + r.next_unit() * (H / 8.0);
  double x2 = qx + W / 2.0 - r.next_unit() * (W / 8.0);
  double y2 = qy + H / 2.0 - r.next_unit() * (H / 8.0);
  boxes(k, 0) = x1;
  boxes(k, 1) = y1;
  boxes(k, 2) = x2;
  boxes(k, 3) = y2;
}

}  // namespace

SynthData gen_synth(const SynthSpec& spec) {
  validate_synth(spec);
  const Rng root(spec.seed);
  const Mat protos = class_prototypes(spec, root);
  const bool positional = spec.task == "position";
  const int K = positional ? 4 : spec.K;

  SynthData data;
  data.images.reserve(spec.n_pairs);
  data.captions.reserve(spec.n_pairs);

  for (int i = 0; i < spec.n_pairs; ++i) {
    Rng r = root.substream("image", static_cast<uint64_t>(i));
    ImageRecord img;
    img.id = static_cast<uint64_t>(i);
    auto& b = img.batch;
    b.width = spec.width;
    b.height = spec.height;
    b.features = Mat(K, spec.d_feat);
    b.boxes = Mat(K, 4);
    b.detector_dists = Mat(K, spec.C);

    std::vector<int> caption_words;
    if (positional) {
      // assignment[q] = class shown in quadrant q
      std::vector<int> assignment = {0, 1, 2, 3};
      for (int q = 3; q > 0; --q) std::swap(assignment[q], assignment[r.below(static_cast<uint64_t>(q + 1))]);
      for (int q = 0; q < 4; ++q) {
        int cls = assignment[q];
        fill_feature(b.features, q, protos, cls, r);
        fill_dist(b.detector_dists, q, cls, spec.C);
        quadrant_box(b.boxes, q, q, spec.width, spec.height, r);
        caption_words.push_back(kFirstWordId + cls);
        caption_words.push_back(kFirstWordId + spec.C + q);
      }
    } else {
      std::vector<int> classes(K);
      for (int k = 0; k < K; ++k) {
        classes[k] = static_cast<int>(r.below(static_cast<uint64_t>(spec.C)));
        fill_feature(b.features, k, protos, classes[k], r);
        fill_dist(b.detector_dists, k, classes[k], spec.C);
        random_box(b.boxes, k, spec.width, spec.height, r);
      }
      for (int k = 0; k < K; ++k) {
        bool faithful = r.next_unit() < spec.correlation;
        int cls = faithful ? classes[k] : static_cast<int>(r.below(static_cast<uint64_t>(spec.C)));
        caption_words.push_back(kFirstWordId + cls);
      }
      // caption order should not encode region order
      for (int k = static_cast<int>(caption_words.size()) - 1; k > 0; --k)
        std::swap(caption_words[k], caption_words[r.below(static_cast<uint64_t>(k + 1))]);
    }

    validate_vision(b);
    std::string text;
    for (size_t w = 0; w < caption_words.size(); ++w) {
      if (w) text += ' ';
      text += word(caption_words[w]);
    }
    data.captions.push_back({img.id, std::move(text)});
    data.images.push_back(std::move(img));
  }
  return data;
}

void write_synth(const SynthData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_vfr(vfr_path(dir), data.images);
  write_captions(captions_path(dir), data.captions);
}

}  // namespace gbt
