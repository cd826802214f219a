#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gbt/analysis.hpp"
#include "gbt/arch.hpp"
#include "gbt/attention.hpp"
#include "gbt/bimodal.hpp"
#include "gbt/checkpoint.hpp"
#include "gbt/gradcheck.hpp"
#include "gbt/model.hpp"
#include "gbt/params.hpp"
#include "gbt/synth.hpp"
#include "gbt/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string preset_name;
  uint64_t seed = 0;
  bool json_out = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gbt::IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

gbt::ArchSpec resolve_arch(const Common& c) {
  if (!c.config_path.empty()) {
    const std::string text = read_file(c.config_path);
    if (!c.preset_name.empty()) return gbt::parse_arch_config(text, gbt::preset(c.preset_name));
    return gbt::parse_arch_config(text);
  }
  if (!c.preset_name.empty()) return gbt::preset(c.preset_name);
  throw gbt::BadArgument("pass --preset or --config");
}

json config_json(const gbt::ArchSpec& spec) { return json::parse(gbt::print_arch_config(spec)); }

void print_effective_config(const gbt::ArchSpec& spec) {
  std::cout << "effective config:\n" << gbt::print_arch_config(spec);
}

gbt::Mat random_rows(int rows, int cols, gbt::Rng& rng) {
  gbt::Mat m(rows, cols);
  for (auto& x : m.a) x = rng.normal();
  return m;
}

gbt::Mat vconcat(const gbt::Mat& top, const gbt::Mat& bottom) {
  gbt::Mat out(top.rows + bottom.rows, top.cols);
  for (int i = 0; i < top.rows; ++i)
    for (int j = 0; j < top.cols; ++j) out(i, j) = top(i, j);
  for (int i = 0; i < bottom.rows; ++i)
    for (int j = 0; j < top.cols; ++j) out(top.rows + i, j) = bottom(i, j);
  return out;
}

// Classical reference composition for the patterns the presets use: plain
// single-stream sublayers on the concatenation, cross-attention pairs, and
// per-stream self-attention. Returns nothing when a sublayer matches none of
// those (an arbitrary gate pattern has no classical counterpart).
std::optional<std::pair<gbt::Mat, gbt::Mat>> reference_encode(gbt::Mat x_l, gbt::Mat x_v, gbt::ParamStore& ps,
                                                              const gbt::ArchSpec& spec) {
  using gbt::Active;
  const gbt::GateSet kOpen{false, false, false, false};
  const gbt::GateSet kInter{true, false, false, true};
  const gbt::GateSet kIntra{false, true, true, false};
  for (size_t i = 0; i < spec.sublayers.size(); ++i) {
    const auto& sl = spec.sublayers[i];
    const std::string pl = gbt::sublayer_prefix(static_cast<int>(i), 'l');
    const std::string pv = gbt::sublayer_prefix(static_cast<int>(i), 'v');
    if (sl.active == Active::l) {
      x_l = gbt::mab(x_l, x_l, ps, pl, spec.h, spec.ln_eps);
      if (sl.ffb) x_l = gbt::ffb(x_l, ps, pl, spec.activation, spec.ln_eps);
    } else if (sl.active == Active::v) {
      x_v = gbt::mab(x_v, x_v, ps, pv, spec.h, spec.ln_eps);
      if (sl.ffb) x_v = gbt::ffb(x_v, ps, pv, spec.activation, spec.ln_eps);
    } else if (sl.gates == kOpen && sl.ties.all()) {
      gbt::Mat joint = vconcat(x_l, x_v);
      joint = gbt::mab(joint, joint, ps, pl, spec.h, spec.ln_eps);
      if (sl.ffb) joint = gbt::ffb(joint, ps, pl, spec.activation, spec.ln_eps);
      for (int r = 0; r < x_l.rows; ++r)
        for (int c = 0; c < x_l.cols; ++c) x_l(r, c) = joint(r, c);
      for (int r = 0; r < x_v.rows; ++r)
        for (int c = 0; c < x_v.cols; ++c) x_v(r, c) = joint(x_l.rows + r, c);
    } else if (sl.gates == kInter || sl.gates == kIntra) {
      const gbt::Mat& src_l = sl.gates == kInter ? x_v : x_l;
      const gbt::Mat& src_v = sl.gates == kInter ? x_l : x_v;
      gbt::Mat nl = gbt::mab(x_l, src_l, ps, pl, spec.h, spec.ln_eps);
      gbt::Mat nv = gbt::mab(x_v, src_v, ps, pv, spec.h, spec.ln_eps);
      if (sl.ffb) {
        nl = gbt::ffb(nl, ps, pl, spec.activation, spec.ln_eps);
        nv = gbt::ffb(nv, ps, pv, spec.activation, spec.ln_eps);
      }
      x_l = std::move(nl);
      x_v = std::move(nv);
    } else {
      return std::nullopt;
    }
  }
  return std::make_pair(std::move(x_l), std::move(x_v));
}

// Synthetic fixture matched to the architecture's data dimensions.
gbt::Dataset arch_fixture(const gbt::ArchSpec& spec, int n_pairs, uint64_t seed) {
  gbt::SynthSpec ss;
  ss.n_pairs = n_pairs;
  ss.vocab = spec.vocab;
  ss.d_feat = spec.d_feat;
  ss.C = spec.n_classes;
  ss.K = 6;
  ss.seed = seed;
  return gbt::prepare_dataset(gbt::gen_synth(ss), spec.vocab);
}

json summary_json(const gbt::GroupSummary& g) {
  return json{{"model", g.model}, {"runs", g.runs}, {"min", g.min}, {"max", g.max}, {"mean", g.mean}, {"sd", g.sd}};
}

int run_presets(const Common& c, bool full) {
  const gbt::Scale scale = full ? gbt::Scale::full : gbt::Scale::toy;
  json out = json::array();
  for (const auto& name : gbt::preset_names()) {
    gbt::ArchSpec spec = gbt::preset(name, scale);
    gbt::ParamCounts counts = gbt::count_params(spec);
    out.push_back({{"name", name},
                   {"sublayers", spec.sublayers.size()},
                   {"embed_variant", gbt::to_string(spec.embed_variant)},
                   {"params", counts.total}});
  }
  if (c.json_out) {
    std::cout << json{{"command", "presets"}, {"scale", full ? "full" : "toy"}, {"presets", out}}.dump(2) << "\n";
    return 0;
  }
  std::cout << "presets (" << (full ? "full" : "toy") << " scale):\n";
  for (const auto& p : out)
    std::cout << "  " << p["name"].get<std::string>() << ": " << p["sublayers"] << " sublayers, embed "
              << p["embed_variant"].get<std::string>() << ", " << p["params"] << " params\n";
  return 0;
}

int run_params(const Common& c, bool full) {
  gbt::ArchSpec spec;
  if (!c.preset_name.empty() && c.config_path.empty() && full)
    spec = gbt::preset(c.preset_name, gbt::Scale::full);
  else
    spec = resolve_arch(c);
  gbt::ParamCounts counts = gbt::count_params(spec);
  json j = {{"command", "params"},
            {"config", config_json(spec)},
            {"counts",
             {{"total", counts.total},
              {"embeddings", counts.embeddings},
              {"attention", counts.attention},
              {"ffb", counts.ffb},
              {"heads", counts.heads},
              {"encoder", counts.encoder()},
              {"tensors", counts.n_tensors},
              {"aliases", counts.n_aliases}}}};
  if (c.json_out) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  print_effective_config(spec);
  std::cout << "parameters (" << spec.name << "):\n"
            << "  embeddings " << counts.embeddings << "\n"
            << "  attention  " << counts.attention << "\n"
            << "  ffb        " << counts.ffb << "\n"
            << "  heads      " << counts.heads << "\n"
            << "  encoder    " << counts.encoder() << "\n"
            << "  total      " << counts.total << "\n"
            << "  tensors    " << counts.n_tensors << " (+" << counts.n_aliases << " aliases)\n";
  return 0;
}

int run_encode(const Common& c, const std::string& data_dir) {
  gbt::ArchSpec spec = resolve_arch(c);
  gbt::ParamStore ps = gbt::declare_params(spec);
  gbt::init_params(ps, gbt::Rng(c.seed));
  gbt::Dataset data = data_dir.empty() ? arch_fixture(spec, 4, c.seed) : gbt::load_dataset(data_dir, spec.vocab);
  gbt::Example ex = gbt::make_example(data, spec, 0, 0);

  gbt::Graph g(&ps);
  gbt::Var h_l0 = gbt::g_embed_text(g, spec, ex.text, ex.global_img);
  gbt::Var h_v0 = gbt::g_embed_vision(g, spec, ex.vision);
  gbt::StreamPair h = gbt::encode_bimodal_g(g, h_l0, h_v0, spec, gbt::MaskPath::additive);
  const gbt::Mat& out_l = g.value(h.l);
  const gbt::Mat& out_v = g.value(h.v);

  gbt::Graph g2(&ps);
  gbt::StreamPair h2 = gbt::encode_bimodal_g(g2, gbt::g_embed_text(g2, spec, ex.text, ex.global_img),
                                             gbt::g_embed_vision(g2, spec, ex.vision), spec, gbt::MaskPath::skip);
  const double path_dev = std::max(gbt::max_abs_diff(out_l, g2.value(h2.l)), gbt::max_abs_diff(out_v, g2.value(h2.v)));

  auto fingerprint = [](const gbt::Mat& m) {
    double sum = 0.0, sumsq = 0.0;
    for (double x : m.a) {
      sum += x;
      sumsq += x * x;
    }
    return json{{"rows", m.rows}, {"cols", m.cols}, {"sum", sum}, {"sumsq", sumsq}};
  };
  json j = {{"command", "encode"}, {"config", config_json(spec)}, {"seed", c.seed},
            {"l", fingerprint(out_l)},  {"v", fingerprint(out_v)},  {"mask_path_deviation", path_dev}};
  if (c.json_out) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  print_effective_config(spec);
  std::cout << "encoded pair 0: L " << out_l.shape() << " V " << out_v.shape() << "\n"
            << "  L sum " << j["l"]["sum"].get<double>() << " sumsq " << j["l"]["sumsq"].get<double>() << "\n"
            << "  V sum " << j["v"]["sum"].get<double>() << " sumsq " << j["v"]["sumsq"].get<double>() << "\n"
            << "  additive vs skip max |diff| = " << path_dev << "\n";
  return 0;
}

int run_check_equivalence(const Common& c, double tolerance) {
  gbt::ArchSpec spec = resolve_arch(c);
  gbt::ParamStore ps = gbt::declare_params(spec);
  gbt::init_params(ps, gbt::Rng(c.seed));
  gbt::Rng rng = gbt::Rng(c.seed).substream("inputs");
  gbt::Mat x_l = random_rows(10, spec.d, rng);
  gbt::Mat x_v = random_rows(6, spec.d, rng);

  auto [add_l, add_v] = gbt::encode_bimodal(x_l, x_v, ps, spec, gbt::MaskPath::additive);
  auto [skip_l, skip_v] = gbt::encode_bimodal(x_l, x_v, ps, spec, gbt::MaskPath::skip);
  const double path_dev = std::max(gbt::max_abs_diff(add_l, skip_l), gbt::max_abs_diff(add_v, skip_v));

  auto ref = reference_encode(x_l, x_v, ps, spec);
  std::optional<double> recovery_dev;
  if (ref)
    recovery_dev = std::max(gbt::max_abs_diff(add_l, ref->first), gbt::max_abs_diff(add_v, ref->second));

  const double max_dev = std::max(path_dev, recovery_dev.value_or(0.0));
  const bool pass = max_dev <= tolerance;
  json j = {{"command", "check-equivalence"},
            {"config", config_json(spec)},
            {"seed", c.seed},
            {"tolerance", tolerance},
            {"mask_path_deviation", path_dev},
            {"recovery_deviation", ref ? json(*recovery_dev) : json(nullptr)},
            {"max_deviation", max_dev},
            {"pass", pass}};
  if (c.json_out) {
    std::cout << j.dump(2) << "\n";
  } else {
    print_effective_config(spec);
    std::cout << "additive vs skip max |diff| = " << path_dev << "\n";
    if (ref)
      std::cout << "gated vs reference max |diff| = " << *recovery_dev << "\n";
    else
      std::cout << "no classical reference for this gate pattern; mask-path check only\n";
    std::cout << "max deviation " << max_dev << " (tolerance " << tolerance << ") -> "
              << (pass ? "ok" : "FAIL") << "\n";
  }
  return pass ? 0 : 1;
}

int run_grad_check(const Common& c, double tolerance, int probes) {
  gbt::ArchSpec spec = resolve_arch(c);
  gbt::ParamStore ps = gbt::declare_params(spec);
  gbt::init_params(ps, gbt::Rng(c.seed));

  gbt::Dataset data = arch_fixture(spec, 4, c.seed);
  gbt::Example ex = gbt::make_example(data, spec, 0, 0);
  gbt::MaskedExample masked;
  gbt::Rng root(c.seed);
  for (uint64_t attempt = 0;; ++attempt) {
    gbt::Rng mrng = root.substream("masking", attempt);
    masked = gbt::apply_masking(ex, gbt::MaskingPolicy{}, mrng, spec.vocab);
    if (!masked.mlm.empty() && !masked.mrc.empty()) break;  // audit all three loss terms
  }

  auto build = [&](auto& g) { return gbt::build_example_loss(g, spec, masked).total; };
  gbt::FdReport rep = gbt::finite_diff_check(ps, build, probes, 1e-6, root.substream("probes"));
  const bool pass = rep.max_rel_err < tolerance;
  json j = {{"command", "grad-check"},
            {"config", config_json(spec)},
            {"seed", c.seed},
            {"tolerance", tolerance},
            {"probes", probes},
            {"h", 1e-6},
            {"max_rel_err", rep.max_rel_err},
            {"worst",
             {{"tensor", rep.worst.tensor},
              {"index", rep.worst.index},
              {"analytic", rep.worst.analytic},
              {"numeric", rep.worst.numeric}}},
            {"pass", pass}};
  if (c.json_out) {
    std::cout << j.dump(2) << "\n";
  } else {
    print_effective_config(spec);
    std::cout << "max relative error " << rep.max_rel_err << " over " << probes << " probes (tolerance "
              << tolerance << ")\n"
              << "worst: " << rep.worst.tensor << "[" << rep.worst.index << "] analytic " << rep.worst.analytic
              << " numeric " << rep.worst.numeric << "\n"
              << (pass ? "ok" : "FAIL") << "\n";
  }
  return pass ? 0 : 1;
}

int run_gen_data(const Common& c, const gbt::SynthSpec& ss_in, const std::string& out_dir) {
  gbt::SynthSpec ss = ss_in;
  ss.seed = c.seed;
  gbt::validate_synth(ss);
  fs::create_directories(out_dir);
  gbt::SynthData data = gbt::gen_synth(ss);
  gbt::write_synth(data, out_dir);
  json j = {{"command", "gen-data"},
            {"out", out_dir},
            {"spec",
             {{"n_pairs", ss.n_pairs},
              {"vocab", ss.vocab},
              {"regions", ss.K},
              {"d_feat", ss.d_feat},
              {"classes", ss.C},
              {"correlation", ss.correlation},
              {"task", ss.task},
              {"seed", ss.seed}}},
            {"files", {gbt::vfr_path(out_dir), gbt::captions_path(out_dir)}}};
  if (c.json_out)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << "wrote " << data.images.size() << " pairs (task " << ss.task << ", correlation "
              << ss.correlation << ") to " << out_dir << "\n";
  return 0;
}

int run_pretrain(const Common& c, const std::string& data_dir, const std::string& out_dir,
                 const gbt::TrainConfig& cfg_in) {
  gbt::ArchSpec spec = resolve_arch(c);
  gbt::TrainConfig cfg = cfg_in;
  cfg.seed = c.seed;
  gbt::Dataset data = gbt::load_dataset(data_dir, spec.vocab);
  gbt::ParamStore ps = gbt::declare_params(spec);
  gbt::init_params(ps, gbt::Rng(c.seed));

  std::vector<gbt::StepRecord> history = gbt::train(spec, ps, data, cfg);

  fs::create_directories(out_dir);
  const std::string ckpt = out_dir + "/checkpoint.gbck";
  const std::string hist = out_dir + "/history.jsonl";
  const std::string conf = out_dir + "/config.json";
  gbt::save_checkpoint(ps, ckpt);
  gbt::write_history(hist, history);
  {
    std::ofstream out(conf, std::ios::binary);
    if (!out) throw gbt::IoError("cannot write " + conf);
    out << gbt::print_arch_config(spec);
  }
  const gbt::StepRecord& last = history.back();
  json j = {{"command", "pretrain"},
            {"config", config_json(spec)},
            {"seed", c.seed},
            {"steps", history.size()},
            {"final", {{"total", last.loss.total}, {"mlm", last.loss.mlm}, {"mrc_kl", last.loss.mrc_kl}, {"itm", last.loss.itm}}},
            {"files", {ckpt, hist, conf}}};
  if (c.json_out) {
    std::cout << j.dump(2) << "\n";
  } else {
    print_effective_config(spec);
    std::cout << "trained " << history.size() << " steps; final total loss " << last.loss.total << "\n"
              << "wrote " << ckpt << ", " << hist << ", " << conf << "\n";
  }
  return 0;
}

int run_evaluate(const Common& c_in, const std::string& data_dir, const std::string& out_dir, int max_pairs) {
  Common c = c_in;
  if (c.config_path.empty() && c.preset_name.empty()) {
    const std::string conf = out_dir + "/config.json";
    if (!fs::exists(conf)) throw gbt::BadArgument("pass --preset/--config or point --out at a pretrain directory");
    c.config_path = conf;
  }
  gbt::ArchSpec spec = resolve_arch(c);
  gbt::ParamStore ps = gbt::declare_params(spec);
  gbt::load_checkpoint(ps, out_dir + "/checkpoint.gbck");
  gbt::Dataset data = gbt::load_dataset(data_dir, spec.vocab);
  const double acc = gbt::evaluate_itm(spec, ps, data, c.seed, max_pairs);
  const int pairs = max_pairs > 0 ? std::min(max_pairs, data.size()) : data.size();
  json j = {{"command", "evaluate"}, {"config", config_json(spec)}, {"seed", c.seed},
            {"pairs", pairs},        {"itm_accuracy", acc}};
  if (c.json_out) {
    std::cout << j.dump(2) << "\n";
  } else {
    print_effective_config(spec);
    std::cout << "itm accuracy " << acc << " over " << pairs << " image-caption pairs (balanced)\n";
  }
  return 0;
}

int run_analyze(const Common& c, const std::string& input, double alpha, const std::string& out_dir,
                bool allow_mc, uint64_t mc_draws) {
  gbt::ScoreTable table = gbt::read_score_table(input);
  std::vector<gbt::GroupSummary> summary = gbt::summarize(table);

  bool testable = table.n_models() >= 2;
  for (const auto& s : table.scores)
    if (s.size() < 2) testable = false;

  json j = {{"command", "analyze"}, {"input", input}, {"alpha", alpha}};
  json sj = json::array();
  for (const auto& s : summary) sj.push_back(summary_json(s));
  j["summary"] = sj;

  std::optional<gbt::AnovaResult> anova;
  std::optional<gbt::Comparison> cmp;
  if (testable) {
    anova = gbt::one_way_anova(table.scores);
    gbt::CompareOptions opt;
    opt.allow_mc = allow_mc;
    opt.mc_draws = mc_draws;
    opt.seed = c.seed;
    cmp = gbt::compare_models(table, alpha, opt);
    j["anova"] = {{"F", anova->degenerate && anova->F > 1e300 ? json("inf") : json(anova->F)},
                  {"p", anova->p},
                  {"degenerate", anova->degenerate},
                  {"df1", anova->df1},
                  {"df2", anova->df2}};
    j["pairs"] = {{"models", cmp->models},
                  {"p", cmp->p},
                  {"significant", cmp->significant},
                  {"per_pair_alpha", cmp->per_pair_alpha},
                  {"n_pairs", cmp->n_pairs},
                  {"monte_carlo", cmp->mc}};
  } else {
    j["anova"] = nullptr;
    j["pairs"] = nullptr;
    j["note"] = "tests skipped: every model needs at least two runs";
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    {
      std::ofstream out(out_dir + "/summary.csv", std::ios::binary);
      out << "model,runs,min,max,mean,sd\n";
      for (const auto& s : summary)
        out << s.model << "," << s.runs << "," << s.min << "," << s.max << "," << s.mean << "," << s.sd << "\n";
    }
    if (cmp) {
      std::ofstream out(out_dir + "/significance.csv", std::ios::binary);
      out << "model";
      for (const auto& m : cmp->models) out << "," << m;
      out << "\n";
      for (size_t i = 0; i < cmp->models.size(); ++i) {
        out << cmp->models[i];
        for (size_t k = 0; k < cmp->models.size(); ++k) out << "," << (cmp->significant[i][k] ? 1 : 0);
        out << "\n";
      }
      std::ofstream pj(out_dir + "/pvalues.json", std::ios::binary);
      pj << json{{"models", cmp->models}, {"p", cmp->p}, {"per_pair_alpha", cmp->per_pair_alpha}}.dump(2) << "\n";
    }
  }

  if (c.json_out) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << "model            runs   min        max        mean       sd\n";
  for (const auto& s : summary) {
    std::ostringstream row;
    row.setf(std::ios::left);
    row.width(17);
    row << s.model;
    std::cout << row.str() << s.runs << "      " << s.min << "  " << s.max << "  " << s.mean << "  " << s.sd
              << "\n";
  }
  if (!testable) {
    std::cout << "tests skipped: every model needs at least two runs\n";
    return 0;
  }
  std::cout << "anova: F = ";
  if (anova->degenerate && anova->F > 1e300)
    std::cout << "inf";
  else
    std::cout << anova->F;
  std::cout << ", p = " << anova->p << " (df " << anova->df1 << ", " << anova->df2 << ")"
            << (anova->degenerate ? " [degenerate: zero within-group variance]" : "") << "\n";
  std::cout << "pairwise exact tests, per-pair alpha " << cmp->per_pair_alpha << " (" << cmp->n_pairs
            << " pairs):\n";
  for (size_t i = 0; i < cmp->models.size(); ++i)
    for (size_t k = i + 1; k < cmp->models.size(); ++k)
      std::cout << "  " << cmp->models[i] << " vs " << cmp->models[k] << ": p = " << cmp->p[i][k]
                << (cmp->significant[i][k] ? "  SIGNIFICANT" : "") << (cmp->mc[i][k] ? "  [monte-carlo]" : "")
                << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gated bimodal transformer toolkit"};
  app.require_subcommand(1);

  Common c;
  double tolerance = 1e-10;
  double grad_tolerance = 1e-5;
  int probes = 200;
  std::string data_dir, out_dir, input;
  double alpha = 0.001;
  bool full = false;
  bool allow_mc = false;
  uint64_t mc_draws = 100000;
  int max_pairs = 0;
  gbt::SynthSpec ss;
  gbt::TrainConfig tc;

  auto add_common = [&](CLI::App* sub, bool with_arch) {
    if (with_arch) {
      sub->add_option("--config", c.config_path, "architecture config JSON");
      sub->add_option("--preset", c.preset_name, "preset name");
    }
    sub->add_option("--seed", c.seed, "deterministic seed");
    sub->add_flag("--json", c.json_out, "machine-readable output");
  };

  CLI::App* sub_presets = app.add_subcommand("presets", "list the built-in layer patterns");
  add_common(sub_presets, false);
  sub_presets->add_flag("--full", full, "paper-scale depths instead of toy");

  CLI::App* sub_params = app.add_subcommand("params", "parameter counts by group");
  add_common(sub_params, true);
  sub_params->add_flag("--full", full, "paper-scale depths instead of toy");

  CLI::App* sub_encode = app.add_subcommand("encode", "run the encoder on one pair");
  add_common(sub_encode, true);
  sub_encode->add_option("--data", data_dir, "dataset directory (default: small built-in fixture)");

  CLI::App* sub_check = app.add_subcommand("check-equivalence", "gated layer vs classical reference");
  add_common(sub_check, true);
  sub_check->add_option("--tolerance", tolerance, "max allowed deviation");

  CLI::App* sub_grad = app.add_subcommand("grad-check", "finite-difference gradient audit");
  add_common(sub_grad, true);
  sub_grad->add_option("--tolerance", grad_tolerance, "max allowed relative error");
  sub_grad->add_option("--probes", probes, "number of probed parameter coordinates");

  CLI::App* sub_gen = app.add_subcommand("gen-data", "write a synthetic image-caption dataset");
  add_common(sub_gen, false);
  sub_gen->add_option("--out", out_dir, "output directory")->required();
  sub_gen->add_option("--pairs", ss.n_pairs, "number of pairs");
  sub_gen->add_option("--task", ss.task, "class | position");
  sub_gen->add_option("--correlation", ss.correlation, "caption-image correlation in [0, 1]");
  sub_gen->add_option("--regions", ss.K, "regions per image");
  sub_gen->add_option("--classes", ss.C, "detector classes");
  sub_gen->add_option("--vocab", ss.vocab, "vocabulary size");
  sub_gen->add_option("--d-feat", ss.d_feat, "region feature width");

  CLI::App* sub_pre = app.add_subcommand("pretrain", "toy pretraining on a synthetic dataset");
  add_common(sub_pre, true);
  sub_pre->add_option("--data", data_dir, "dataset directory")->required();
  sub_pre->add_option("--out", out_dir, "run directory for checkpoint/history/config")->required();
  sub_pre->add_option("--steps", tc.max_steps, "total steps (0: use --epochs)");
  sub_pre->add_option("--epochs", tc.epochs, "epochs when --steps is 0");
  sub_pre->add_option("--batch", tc.batch_size, "batch size");
  sub_pre->add_option("--lr", tc.lr, "peak learning rate");
  sub_pre->add_option("--warmup", tc.warmup, "warmup fraction of total steps");
  sub_pre->add_option("--decay", tc.weight_decay, "decoupled weight decay");
  sub_pre->add_option("--clip", tc.clip_norm, "global gradient norm clip (0 disables)");
  sub_pre->add_option("--mismatch", tc.mismatch_rate, "probability of a mismatched caption");
  sub_pre->add_flag("--heads-only", tc.heads_only, "update only the pooler and ITM head");

  CLI::App* sub_eval = app.add_subcommand("evaluate", "balanced ITM accuracy of a checkpoint");
  add_common(sub_eval, true);
  sub_eval->add_option("--data", data_dir, "dataset directory")->required();
  sub_eval->add_option("--out", out_dir, "run directory holding checkpoint.gbck")->required();
  sub_eval->add_option("--max-pairs", max_pairs, "evaluate at most this many pairs (0: all)");

  CLI::App* sub_an = app.add_subcommand("analyze", "ANOVA and pairwise exact tests on a score table");
  add_common(sub_an, false);
  sub_an->add_option("--input", input, "CSV with header model,run,score")->required();
  sub_an->add_option("--alpha", alpha, "family-wise significance level");
  sub_an->add_option("--out", out_dir, "directory for summary/significance/p-value files");
  sub_an->add_flag("--allow-mc", allow_mc, "Monte Carlo fallback above the exact enumeration cap");
  sub_an->add_option("--mc-draws", mc_draws, "relabelings sampled in Monte Carlo mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sub_presets) return run_presets(c, full);
    if (*sub_params) return run_params(c, full);
    if (*sub_encode) return run_encode(c, data_dir);
    if (*sub_check) return run_check_equivalence(c, tolerance);
    if (*sub_grad) return run_grad_check(c, grad_tolerance, probes);
    if (*sub_gen) return run_gen_data(c, ss, out_dir);
    if (*sub_pre) return run_pretrain(c, data_dir, out_dir, tc);
    if (*sub_eval) return run_evaluate(c, data_dir, out_dir, max_pairs);
    if (*sub_an) return run_analyze(c, input, alpha, out_dir, allow_mc, mc_draws);
  } catch (const gbt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
