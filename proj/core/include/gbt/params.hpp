#pragma once

#include <cstddef>
#include <string>

#include "gbt/arch.hpp"
#include "gbt/param_store.hpp"
#include "gbt/rng.hpp"

namespace gbt {

// Canonical prefix of a sublayer's tensors, e.g. "enc.s3.l." for the
// language stream of sublayer 3.
std::string sublayer_prefix(int index, char stream);

// Creates every tensor the spec requires, zero-valued, with tied
// vision-stream names installed as aliases of their language counterparts.
ParamStore declare_params(const ArchSpec& spec);

// Truncated Normal(0, 0.02) at +-2 sigma for matrices and tables, zeros for
// bias vectors, ones for layer-norm gains. Each tensor draws from the
// substream "init/<canonical name>", so initialization is independent of
// declaration order and of tying.
void init_params(ParamStore& ps, const Rng& root, double sigma = 0.02, double clip = 2.0);

struct ParamCounts {
  size_t total = 0;
  size_t embeddings = 0;
  size_t attention = 0;
  size_t ffb = 0;
  size_t heads = 0;
  size_t encoder() const { return attention + ffb; }
  size_t n_tensors = 0;
  size_t n_aliases = 0;
};

// Distinct post-aliasing scalar counts, grouped.
ParamCounts count_params(const ArchSpec& spec);

// True for tensors that receive the truncated-normal init (and weight decay).
bool is_weight_tensor(const std::string& canonical_name);

}  // namespace gbt
