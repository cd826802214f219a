#include <cmath>

#include "gbt/objectives.hpp"

namespace gbt {

void validate_policy(const MaskingPolicy& p) {
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in01(p.text_mask_prob) || !in01(p.region_mask_prob) || !in01(p.p_mask) || !in01(p.p_random) || !in01(p.p_keep))
    throw BadArgument("masking probabilities must be in [0, 1]");
  if (std::fabs(p.p_mask + p.p_random + p.p_keep - 1.0) > 1e-12)
    throw BadArgument("mask/random/keep split must sum to 1");
}

MaskedExample apply_masking(const Example& ex, const MaskingPolicy& policy, Rng& rng, int vocab) {
  validate_policy(policy);
  if (vocab <= kFirstWordId) throw BadArgument("vocab has no ordinary words");
  MaskedExample out;
  out.text = ex.text;
  out.vision = ex.vision;
  out.global_img = ex.global_img;
  out.itm_match = ex.itm_match;

  for (size_t t = 0; t < out.text.token_ids.size(); ++t) {
    int id = out.text.token_ids[t];
    if (id == kClsId || id == kSepId) continue;
    if (rng.next_unit() >= policy.text_mask_prob) continue;
    out.mlm.push_back({static_cast<int>(t), id});
    double u = rng.next_unit();
    if (u < policy.p_mask) {
      out.text.token_ids[t] = kMaskId;
    } else if (u < policy.p_mask + policy.p_random) {
      out.text.token_ids[t] = kFirstWordId + static_cast<int>(rng.below(static_cast<uint64_t>(vocab - kFirstWordId)));
    }  // else keep
  }

  // Row 0 is the [IMG] token.
  for (int k = 1; k < out.vision.regions(); ++k) {
    if (rng.next_unit() >= policy.region_mask_prob) continue;
    out.mrc.push_back({k});
    for (int j = 0; j < out.vision.features.cols; ++j) out.vision.features(k, j) = 0.0;
  }
  return out;
}

}  // namespace gbt
