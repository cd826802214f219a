#include "gbt/arch.hpp"

#include <json.hpp>

#include "gbt/errors.hpp"

namespace gbt {

using nlohmann::json;

std::string to_string(EmbedVariant v) {
  switch (v) {
    case EmbedVariant::box5: return "box5";
    case EmbedVariant::none: return "none";
    case EmbedVariant::box5_global: return "box5_global";
  }
  throw BadArgument("bad EmbedVariant");
}

EmbedVariant embed_variant_from_string(const std::string& s) {
  if (s == "box5") return EmbedVariant::box5;
  if (s == "none") return EmbedVariant::none;
  if (s == "box5_global") return EmbedVariant::box5_global;
  throw ParseError("unknown embed_variant '" + s + "'");
}

std::string to_string(Active a) {
  switch (a) {
    case Active::both: return "both";
    case Active::l: return "l";
    case Active::v: return "v";
  }
  throw BadArgument("bad Active");
}

Active active_from_string(const std::string& s) {
  if (s == "both") return Active::both;
  if (s == "l") return Active::l;
  if (s == "v") return Active::v;
  throw ParseError("unknown active '" + s + "'");
}

void validate(const ArchSpec& spec) {
  if (spec.d <= 0 || spec.h <= 0) throw BadArgument("d and h must be positive");
  if (spec.d % spec.h != 0)
    throw HeadDivisibility("d=" + std::to_string(spec.d) + " not divisible by h=" + std::to_string(spec.h));
  if (spec.d_ff <= 0) throw BadArgument("d_ff must be positive");
  if (spec.vocab < 4) throw BadArgument("vocab must cover the special tokens (>= 4)");
  if (spec.n_classes < 2) throw BadArgument("n_classes must be >= 2");
  if (spec.d_feat <= 0) throw BadArgument("d_feat must be positive");
  if (spec.max_t < 3) throw BadArgument("max_t must be >= 3");
  if (!(spec.ln_eps > 0.0)) throw BadArgument("ln_eps must be > 0");
  if (spec.activation != "relu" && spec.activation != "gelu")
    throw ParseError("unknown activation '" + spec.activation + "'");
  if (spec.pooling.kind != "multiplicative")
    throw ParseError("unknown pooling kind '" + spec.pooling.kind + "'");
  if (spec.pooling.dim < 0) throw BadArgument("pooling dim must be >= 0");
  if (spec.weights.mlm < 0 || spec.weights.mrc_kl < 0 || spec.weights.itm < 0)
    throw BadArgument("objective weights must be >= 0");

  for (size_t i = 0; i < spec.sublayers.size(); ++i) {
    const auto& sl = spec.sublayers[i];
    const std::string where = "sublayer " + std::to_string(i);
    switch (sl.active) {
      case Active::both:
        if (sl.gates.ll && sl.gates.lv)
          throw InvalidGateConfig(where + ": language row fully blocked (ll and lv both 1)");
        if (sl.gates.vl && sl.gates.vv)
          throw InvalidGateConfig(where + ": vision row fully blocked (vl and vv both 1)");
        break;
      case Active::l:
        if (!sl.gates.lv) throw InvalidGateConfig(where + ": language-only sublayer must gate lv");
        if (sl.gates.ll) throw InvalidGateConfig(where + ": language row fully blocked (ll and lv both 1)");
        if (sl.ties.any()) throw InvalidTieConfig(where + ": single-stream sublayer cannot tie");
        break;
      case Active::v:
        if (!sl.gates.vl) throw InvalidGateConfig(where + ": vision-only sublayer must gate vl");
        if (sl.gates.vv) throw InvalidGateConfig(where + ": vision row fully blocked (vl and vv both 1)");
        if (sl.ties.any()) throw InvalidTieConfig(where + ": single-stream sublayer cannot tie");
        break;
    }
  }
}

namespace {

SublayerSpec single_stream_sublayer() {
  SublayerSpec sl;
  sl.gates = {false, false, false, false};
  sl.ties = {true, true, true, true, true, true};
  sl.ffb = true;
  sl.active = Active::both;
  return sl;
}

SublayerSpec inter_sublayer(TieSet ties, bool ffb) {
  SublayerSpec sl;
  sl.gates = {true, false, false, true};
  sl.ties = ties;
  sl.ffb = ffb;
  sl.active = Active::both;
  return sl;
}

SublayerSpec intra_sublayer(bool ffb) {
  SublayerSpec sl;
  sl.gates = {false, true, true, false};
  sl.ties = {};
  sl.ffb = ffb;
  sl.active = Active::both;
  return sl;
}

SublayerSpec mono_sublayer(Active which) {
  SublayerSpec sl;
  sl.ties = {};
  sl.ffb = true;
  sl.active = which;
  sl.gates = which == Active::l ? GateSet{false, true, true, true} : GateSet{true, true, true, false};
  return sl;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"uniter", "visualbert", "vl-bert", "vilbert", "lxmert"};
  return names;
}

ArchSpec preset(const std::string& name, Scale scale) {
  ArchSpec spec;
  spec.name = name;
  const bool full = scale == Scale::full;
  if (name == "uniter" || name == "visualbert" || name == "vl-bert") {
    int depth = full ? 12 : 4;
    for (int i = 0; i < depth; ++i) spec.sublayers.push_back(single_stream_sublayer());
    if (name == "visualbert") spec.embed_variant = EmbedVariant::none;
    else if (name == "vl-bert") spec.embed_variant = EmbedVariant::box5_global;
    else spec.embed_variant = EmbedVariant::box5;
  } else if (name == "vilbert") {
    int pairs = full ? 12 : 4;
    for (int i = 0; i < pairs; ++i) {
      spec.sublayers.push_back(inter_sublayer({}, true));
      spec.sublayers.push_back(intra_sublayer(true));
    }
    spec.embed_variant = EmbedVariant::box5;
  } else if (name == "lxmert") {
    int mono = full ? 9 : 2;
    int vis = full ? 5 : 2;
    int cross = full ? 5 : 2;
    for (int i = 0; i < mono; ++i) spec.sublayers.push_back(mono_sublayer(Active::l));
    for (int i = 0; i < vis; ++i) spec.sublayers.push_back(mono_sublayer(Active::v));
    for (int i = 0; i < cross; ++i) {
      spec.sublayers.push_back(inter_sublayer({true, true, true, true, false, false}, true));
      spec.sublayers.push_back(intra_sublayer(false));
    }
    spec.embed_variant = EmbedVariant::box5;
  } else {
    throw UnknownPreset(name);
  }
  validate(spec);
  return spec;
}

namespace {

[[noreturn]] void bad_key(const std::string& path, const std::string& key) {
  throw ParseError("unknown key '" + key + "' in " + path);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) bad_key(path, key);
  }
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ParseError(path + "." + key + " must be an integer");
  return v.get<int>();
}

double get_num(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ParseError(path + "." + key + " must be a number");
  return v.get<double>();
}

std::string get_str(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ParseError(path + "." + key + " must be a string");
  return v.get<std::string>();
}

bool gate_bit(const json& v, const std::string& path) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    int b = v.get<int>();
    if (b == 0 || b == 1) return b == 1;
  }
  throw ParseError(path + " entries must be 0/1 or booleans");
}

}  // namespace

ArchSpec parse_arch_config(const std::string& text) {
  ArchSpec base;
  for (int i = 0; i < 4; ++i) base.sublayers.push_back(single_stream_sublayer());
  return parse_arch_config(text, base);
}

ArchSpec parse_arch_config(const std::string& text, const ArchSpec& base) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!root.is_object()) throw ParseError("config root must be an object");
  check_keys(root, "config",
             {"name", "dims", "data", "embed_variant", "activation", "ln_eps", "sublayers", "pooling", "objectives"});

  ArchSpec spec = base;
  spec.sublayers.clear();
  spec.name = get_str(root, "config", "name", base.name);

  if (root.contains("dims")) {
    const auto& dims = root.at("dims");
    if (!dims.is_object()) throw ParseError("dims must be an object");
    check_keys(dims, "dims", {"d", "h", "ff"});
    spec.d = get_int(dims, "dims", "d", spec.d);
    spec.h = get_int(dims, "dims", "h", spec.h);
    spec.d_ff = get_int(dims, "dims", "ff", spec.d_ff);
  }
  if (root.contains("data")) {
    const auto& data = root.at("data");
    if (!data.is_object()) throw ParseError("data must be an object");
    check_keys(data, "data", {"vocab", "classes", "d_feat", "max_t"});
    spec.vocab = get_int(data, "data", "vocab", spec.vocab);
    spec.n_classes = get_int(data, "data", "classes", spec.n_classes);
    spec.d_feat = get_int(data, "data", "d_feat", spec.d_feat);
    spec.max_t = get_int(data, "data", "max_t", spec.max_t);
  }
  spec.embed_variant = embed_variant_from_string(get_str(root, "config", "embed_variant", to_string(base.embed_variant)));
  spec.activation = get_str(root, "config", "activation", base.activation);
  spec.ln_eps = get_num(root, "config", "ln_eps", spec.ln_eps);

  if (root.contains("sublayers")) {
    const auto& arr = root.at("sublayers");
    if (!arr.is_array()) throw ParseError("sublayers must be an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "sublayers[" + std::to_string(i) + "]";
      const auto& s = arr.at(i);
      if (!s.is_object()) throw ParseError(path + " must be an object");
      check_keys(s, path, {"gates", "ties", "ffb", "active"});
      SublayerSpec sl;
      if (s.contains("gates")) {
        const auto& g = s.at("gates");
        if (!g.is_array() || g.size() != 4) throw ParseError(path + ".gates must be [ll, lv, vl, vv]");
        sl.gates.ll = gate_bit(g.at(0), path + ".gates");
        sl.gates.lv = gate_bit(g.at(1), path + ".gates");
        sl.gates.vl = gate_bit(g.at(2), path + ".gates");
        sl.gates.vv = gate_bit(g.at(3), path + ".gates");
      }
      if (s.contains("ties")) {
        const auto& t = s.at("ties");
        if (!t.is_array() || t.size() != 6) throw ParseError(path + ".ties must be [q, k, v, o, ff, ln]");
        sl.ties.q = gate_bit(t.at(0), path + ".ties");
        sl.ties.k = gate_bit(t.at(1), path + ".ties");
        sl.ties.v = gate_bit(t.at(2), path + ".ties");
        sl.ties.o = gate_bit(t.at(3), path + ".ties");
        sl.ties.ff = gate_bit(t.at(4), path + ".ties");
        sl.ties.ln = gate_bit(t.at(5), path + ".ties");
      }
      if (s.contains("ffb")) {
        if (!s.at("ffb").is_boolean()) throw ParseError(path + ".ffb must be a boolean");
        sl.ffb = s.at("ffb").get<bool>();
      }
      sl.active = active_from_string(get_str(s, path, "active", "both"));
      spec.sublayers.push_back(sl);
    }
  } else {
    spec.sublayers = base.sublayers;
  }

  if (root.contains("pooling")) {
    const auto& p = root.at("pooling");
    if (p.is_string()) {
      spec.pooling.kind = p.get<std::string>();
    } else if (p.is_object()) {
      check_keys(p, "pooling", {"kind", "dim"});
      spec.pooling.kind = get_str(p, "pooling", "kind", "multiplicative");
      spec.pooling.dim = get_int(p, "pooling", "dim", 0);
    } else {
      throw ParseError("pooling must be a string or object");
    }
  }
  if (root.contains("objectives")) {
    const auto& o = root.at("objectives");
    if (!o.is_object()) throw ParseError("objectives must be an object");
    check_keys(o, "objectives", {"weights"});
    if (o.contains("weights")) {
      const auto& w = o.at("weights");
      if (!w.is_object()) throw ParseError("objectives.weights must be an object");
      check_keys(w, "objectives.weights", {"mlm", "mrc_kl", "itm"});
      spec.weights.mlm = get_num(w, "objectives.weights", "mlm", spec.weights.mlm);
      spec.weights.mrc_kl = get_num(w, "objectives.weights", "mrc_kl", spec.weights.mrc_kl);
      spec.weights.itm = get_num(w, "objectives.weights", "itm", spec.weights.itm);
    }
  }

  validate(spec);
  return spec;
}

std::string print_arch_config(const ArchSpec& spec) {
  json root;
  root["name"] = spec.name;
  root["dims"] = {{"d", spec.d}, {"h", spec.h}, {"ff", spec.d_ff}};
  root["data"] = {{"vocab", spec.vocab}, {"classes", spec.n_classes}, {"d_feat", spec.d_feat}, {"max_t", spec.max_t}};
  root["embed_variant"] = to_string(spec.embed_variant);
  root["activation"] = spec.activation;
  root["ln_eps"] = spec.ln_eps;
  json arr = json::array();
  for (const auto& sl : spec.sublayers) {
    json s;
    s["gates"] = {sl.gates.ll ? 1 : 0, sl.gates.lv ? 1 : 0, sl.gates.vl ? 1 : 0, sl.gates.vv ? 1 : 0};
    s["ties"] = {sl.ties.q ? 1 : 0, sl.ties.k ? 1 : 0, sl.ties.v ? 1 : 0,
                 sl.ties.o ? 1 : 0, sl.ties.ff ? 1 : 0, sl.ties.ln ? 1 : 0};
    s["ffb"] = sl.ffb;
    s["active"] = to_string(sl.active);
    arr.push_back(s);
  }
  root["sublayers"] = arr;
  root["pooling"] = {{"kind", spec.pooling.kind}, {"dim", spec.pooling.dim}};
  root["objectives"] = {{"weights", {{"mlm", spec.weights.mlm}, {"mrc_kl", spec.weights.mrc_kl}, {"itm", spec.weights.itm}}}};
  return root.dump(2) + "\n";
}

}  // namespace gbt
