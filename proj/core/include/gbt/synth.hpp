#pragma once

#include <string>
#include <vector>

#include "gbt/embeddings.hpp"
#include "gbt/rng.hpp"

namespace gbt {

// Synthetic paired image-text data. Two correlation rules:
//  - "class": each region gets a class, its feature is a noisy class
//    prototype, and the caption lists one word per region class. Matched
//    pairs share a class multiset with the image, so any embed variant can
//    learn ITM. `correlation` is the probability a caption word reflects its
//    region (0 makes captions independent of the image).
//  - "position": every image shows the same four classes, one per image
//    quadrant, with a per-image random class-to-quadrant assignment; the
//    caption spells out (class word, quadrant word) pairs. Matched vs
//    mismatched is then decidable only through box geometry, which separates
//    box5-style embeddings from boxless ones. K is fixed at 4.
struct SynthSpec {
  int n_pairs = 1000;
  int vocab = 1000;
  int K = 8;
  int d_feat = 32;
  int C = 16;
  double correlation = 1.0;
  std::string task = "class";
  uint64_t seed = 0;
  double width = 224.0;
  double height = 224.0;
};

void validate_synth(const SynthSpec& spec);

struct SynthData {
  std::vector<ImageRecord> images;
  std::vector<Caption> captions;  // aligned with images by index
};

// Deterministic in spec.seed.
SynthData gen_synth(const SynthSpec& spec);

// Writes <dir>/data.vfr and <dir>/captions.tsv (byte-deterministic).
void write_synth(const SynthData& data, const std::string& dir);

inline std::string vfr_path(const std::string& dir) { return dir + "/data.vfr"; }
inline std::string captions_path(const std::string& dir) { return dir + "/captions.tsv"; }

}  // namespace gbt
