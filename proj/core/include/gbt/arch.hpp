#pragma once

#include <string>
#include <vector>

namespace gbt {

enum class EmbedVariant { box5, none, box5_global };

std::string to_string(EmbedVariant v);
EmbedVariant embed_variant_from_string(const std::string& s);

// Which stream(s) a sublayer runs on. "l"/"v" sublayers update one stream
// and pass the other through untouched.
enum class Active { both, l, v };

std::string to_string(Active a);
Active active_from_string(const std::string& s);

// Attention gates; true means the corresponding score block is blocked.
struct GateSet {
  bool ll = false, lv = false, vl = false, vv = false;
  bool operator==(const GateSet&) const = default;
};

// Cross-stream parameter ties; true means the vision-stream tensor aliases
// the language-stream tensor of the same sublayer.
struct TieSet {
  bool q = false, k = false, v = false, o = false, ff = false, ln = false;
  bool operator==(const TieSet&) const = default;
  bool any() const { return q || k || v || o || ff || ln; }
  bool all() const { return q && k && v && o && ff && ln; }
};

struct SublayerSpec {
  GateSet gates;
  TieSet ties;
  bool ffb = true;
  Active active = Active::both;
  bool operator==(const SublayerSpec&) const = default;
};

struct ObjectiveWeights {
  double mlm = 1.0, mrc_kl = 1.0, itm = 1.0;
  bool operator==(const ObjectiveWeights&) const = default;
};

struct PoolingSpec {
  std::string kind = "multiplicative";
  int dim = 0;  // 0 = use d
  bool operator==(const PoolingSpec&) const = default;
};

struct ArchSpec {
  std::string name = "custom";
  int d = 64;
  int h = 4;
  int d_ff = 256;
  int vocab = 1000;
  int n_classes = 16;
  int d_feat = 32;
  int max_t = 64;
  EmbedVariant embed_variant = EmbedVariant::box5;
  std::string activation = "relu";
  double ln_eps = 1e-5;
  std::vector<SublayerSpec> sublayers;
  PoolingSpec pooling;
  ObjectiveWeights weights;
  bool operator==(const ArchSpec&) const = default;

  int head_dim() const { return d / h; }
  int pool_dim() const { return pooling.dim > 0 ? pooling.dim : d; }
};

// Throws HeadDivisibility / InvalidGateConfig / InvalidTieConfig /
// BadArgument; messages name the offending sublayer index.
void validate(const ArchSpec& spec);

enum class Scale { toy, full };

// The five studied layer patterns. Toy depths: single-stream presets use 4
// sublayers, vilbert 4 (inter, intra) pairs, lxmert 2 language-only + 2
// vision-only + 2 cross groups. Full depths (12 / 12 pairs / 9-5-5) exist
// for parameter audits only.
ArchSpec preset(const std::string& name, Scale scale = Scale::toy);

const std::vector<std::string>& preset_names();

// Strict JSON config: unknown keys rejected, defaults made explicit in the
// returned spec, then validated. The two-argument form fills absent keys
// from `base` instead of the built-in defaults, so a partial config can
// override a preset key by key.
ArchSpec parse_arch_config(const std::string& text);
ArchSpec parse_arch_config(const std::string& text, const ArchSpec& base);

// Inverse of parse_arch_config up to formatting: parse(print(s)) == s.
std::string print_arch_config(const ArchSpec& spec);

}  // namespace gbt
