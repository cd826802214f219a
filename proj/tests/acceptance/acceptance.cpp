// Acceptance gate: one self-contained check per release criterion, each
// printing a single PASS/FAIL line (plus indented detail). Exit code 0 only
// when every requested criterion passes. Tolerances are pinned here on
// purpose; loosening them is a release decision, not a test fix.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gbt/analysis.hpp"
#include "gbt/bimodal.hpp"
#include "gbt/checkpoint.hpp"
#include "gbt/gradcheck.hpp"
#include "gbt/model.hpp"
#include "gbt/train.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using namespace gbt;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Mat random_mat(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  for (double& x : m.a) x = rng.normal();
  return m;
}

Mat vstack(const Mat& a, const Mat& b) {
  Mat out(a.rows + b.rows, a.cols);
  std::copy(a.a.begin(), a.a.end(), out.a.begin());
  std::copy(b.a.begin(), b.a.end(), out.a.begin() + static_cast<long>(a.a.size()));
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. A fully tied, ungated stack must equal the single-stream encoder run on
//    the concatenated token sequence, to well below accumulation noise.

bool criterion1() {
  const auto t0 = Clock::now();
  const ArchSpec spec = preset("uniter");
  double worst = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    ParamStore ps = declare_params(spec);
    init_params(ps, Rng(seed));
    Rng in = Rng(seed).substream("inputs");
    const Mat x_l = random_mat(8, spec.d, in);
    const Mat x_v = random_mat(6, spec.d, in);
    const auto [h_l, h_v] = encode_bimodal(x_l, x_v, ps, spec);
    const Mat joint = encode_stack(vstack(x_l, x_v), ps, spec);
    worst = std::max(worst, max_abs_diff(vstack(h_l, h_v), joint));
  }
  const double dt = seconds_since(t0);
  const bool ok = worst < 1e-10 && dt < 10.0;
  std::printf("criterion 1 %s: single-stream recovery over 20 seeds, max |diff| %.3e (< 1e-10), %.2f s (< 10 s)\n",
              ok ? "PASS" : "FAIL", worst, dt);
  return ok;
}

// ---------------------------------------------------------------------------
// 2. Blocking the within-stream score blocks must reproduce the classic
//    cross-attention layer pair; blocking the cross blocks must reproduce two
//    independent self-attention layers. Checked against hand-built blocks.

ArchSpec one_sublayer_spec(GateSet gates) {
  ArchSpec spec;
  spec.sublayers = {SublayerSpec{gates, TieSet{}, true, Active::both}};
  validate(spec);
  return spec;
}

bool criterion2() {
  const std::string pl = sublayer_prefix(0, 'l');
  const std::string pv = sublayer_prefix(0, 'v');
  double worst_cross = 0.0, worst_self = 0.0;

  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng in = Rng(seed).substream("inputs");

    ArchSpec cross = one_sublayer_spec(GateSet{true, false, false, true});
    ParamStore cps = declare_params(cross);
    init_params(cps, Rng(seed));
    Mat x_l = random_mat(7, cross.d, in);
    Mat x_v = random_mat(5, cross.d, in);
    auto [cl, cv] = encode_bimodal(x_l, x_v, cps, cross);
    Mat el = ffb(mab(x_l, x_v, cps, pl, cross.h, cross.ln_eps), cps, pl, cross.activation, cross.ln_eps);
    Mat ev = ffb(mab(x_v, x_l, cps, pv, cross.h, cross.ln_eps), cps, pv, cross.activation, cross.ln_eps);
    worst_cross = std::max({worst_cross, max_abs_diff(cl, el), max_abs_diff(cv, ev)});

    ArchSpec self = one_sublayer_spec(GateSet{false, true, true, false});
    ParamStore sps = declare_params(self);
    init_params(sps, Rng(seed));
    auto [sl, sv] = encode_bimodal(x_l, x_v, sps, self);
    Mat fl = ffb(mab(x_l, x_l, sps, pl, self.h, self.ln_eps), sps, pl, self.activation, self.ln_eps);
    Mat fv = ffb(mab(x_v, x_v, sps, pv, self.h, self.ln_eps), sps, pv, self.activation, self.ln_eps);
    worst_self = std::max({worst_self, max_abs_diff(sl, fl), max_abs_diff(sv, fv)});
  }

  const bool ok = worst_cross < 1e-12 && worst_self < 1e-12;
  std::printf("criterion 2 %s: dual-stream recovery over 20 seeds, cross max |diff| %.3e, self max |diff| %.3e (< 1e-12)\n",
              ok ? "PASS" : "FAIL", worst_cross, worst_self);
  return ok;
}

// ---------------------------------------------------------------------------
// 3. The additive-sentinel and submatrix-skipping mask paths must agree for
//    every (active, gates) combination the validator accepts.

bool criterion3() {
  std::vector<SublayerSpec> valid;
  for (Active active : {Active::both, Active::l, Active::v}) {
    for (int bits = 0; bits < 16; ++bits) {
      SublayerSpec sl;
      sl.gates = GateSet{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0};
      sl.active = active;
      ArchSpec spec;
      spec.sublayers = {sl};
      try {
        validate(spec);
      } catch (const Error&) {
        continue;
      }
      valid.push_back(sl);
    }
  }

  double worst = 0.0;
  for (const SublayerSpec& sl : valid) {
    ArchSpec spec;
    spec.sublayers = {sl};
    for (uint64_t seed = 0; seed < 5; ++seed) {
      ParamStore ps = declare_params(spec);
      init_params(ps, Rng(seed));
      Rng in = Rng(seed).substream("inputs");
      const Mat x_l = random_mat(6, spec.d, in);
      const Mat x_v = random_mat(4, spec.d, in);
      const auto [al, av] = encode_bimodal(x_l, x_v, ps, spec, MaskPath::additive);
      const auto [kl, kv] = encode_bimodal(x_l, x_v, ps, spec, MaskPath::skip);
      worst = std::max({worst, max_abs_diff(al, kl), max_abs_diff(av, kv)});
    }
  }

  const bool ok = valid.size() == 17 && worst < 1e-12;
  std::printf("criterion 3 %s: additive vs skip over %zu valid gate configs x 5 seeds, max |diff| %.3e (< 1e-12)\n",
              ok ? "PASS" : "FAIL", valid.size(), worst);
  return ok;
}

// ---------------------------------------------------------------------------
// 4. Central-difference audit of the full model gradient for every preset.

bool criterion4() {
  const auto t0 = Clock::now();
  bool ok = true;
  double worst = 0.0;
  for (const std::string& name : preset_names()) {
    const ArchSpec spec = preset(name);
    SynthSpec ss;
    ss.n_pairs = 4;
    ss.vocab = spec.vocab;
    ss.K = 6;
    ss.d_feat = spec.d_feat;
    ss.C = spec.n_classes;
    const Dataset data = prepare_dataset(gen_synth(ss), spec.vocab);
    ParamStore ps = declare_params(spec);
    init_params(ps, Rng(7));

    const Example ex = make_example(data, spec, 0, 0);
    Rng mask_rng = Rng(11).substream("mask");
    MaskedExample mex = apply_masking(ex, MaskingPolicy{}, mask_rng, spec.vocab);
    while (mex.mlm.empty() || mex.mrc.empty()) mex = apply_masking(ex, MaskingPolicy{}, mask_rng, spec.vocab);

    const FdReport rep = finite_diff_check(
        ps, [&](auto& g) { return build_example_loss(g, spec, mex).total; }, 200, 1e-6, Rng(13));
    worst = std::max(worst, rep.max_rel_err);
    const bool pok = rep.max_rel_err < 1e-5;
    ok = ok && pok;
    std::printf("  %-10s max rel err %.3e at %s[%d]\n", name.c_str(), rep.max_rel_err,
                rep.worst.tensor.c_str(), rep.worst.index);
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < 300.0;
  std::printf("criterion 4 %s: gradient audit, 200 probes per preset, h=1e-6, max rel err %.3e (< 1e-5), %.1f s (< 300 s)\n",
              ok ? "PASS" : "FAIL", worst, dt);
  return ok;
}

// ---------------------------------------------------------------------------
// 5. exact_perm_test against an independent brute-force enumeration, and the
//    ANOVA tail probability against a long-double power-series oracle.

struct BruteCount {
  uint64_t extreme = 0;
  uint64_t total = 0;
};

BruteCount brute_perm(const std::vector<double>& a, const std::vector<double>& b) {
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  std::vector<double> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());

  double sum_a = 0.0, sum_b = 0.0;
  for (double x : a) sum_a += x;
  for (double x : b) sum_b += x;
  const double obs = std::fabs(sum_a / na - sum_b / nb);
  const double threshold = obs - 1e-12 * std::max(1.0, obs);

  std::vector<int> sel(pool.size(), 0);
  std::fill(sel.end() - na, sel.end(), 1);

  BruteCount c;
  do {
    double sa = 0.0, sb = 0.0;
    for (size_t i = 0; i < pool.size(); ++i) (sel[i] ? sa : sb) += pool[i];
    if (std::fabs(sa / na - sb / nb) >= threshold) ++c.extreme;
    ++c.total;
  } while (std::next_permutation(sel.begin(), sel.end()));
  return c;
}

long double betainc_oracle(long double x, long double a, long double b) {
  if (x <= 0.0L) return 0.0L;
  if (x >= 1.0L) return 1.0L;
  if (x > (a + 1.0L) / (a + b + 2.0L)) return 1.0L - betainc_oracle(1.0L - x, b, a);
  const long double lpre =
      a * logl(x) + b * log1pl(-x) - logl(a) - (lgammal(a) + lgammal(b) - lgammal(a + b));
  long double sum = 1.0L, term = 1.0L;
  for (int n = 0; n < 200000; ++n) {
    term *= (a + b + n) * x / (a + 1.0L + n);
    sum += term;
    if (term < sum * 1e-22L) break;
  }
  return expl(lpre) * sum;
}

long double f_tail_oracle(double f, int df1, int df2) {
  const long double x = df2 / (df2 + static_cast<long double>(df1) * f);
  return betainc_oracle(x, df2 / 2.0L, df1 / 2.0L);
}

bool criterion5() {
  uint64_t mismatches = 0, fixtures = 0;
  Rng rng = Rng(2024).substream("perm-fixtures");
  for (int na = 1; na <= 6; ++na) {
    for (int nb = 1; nb <= 6; ++nb) {
      for (int rep = 0; rep < 4; ++rep) {
        std::vector<double> a(na), b(nb);
        if (rep == 2) {
          // all-tie fixture: obs = 0, every relabeling is extreme
          for (double& x : a) x = 5.0;
          for (double& x : b) x = 5.0;
        } else {
          // quarter-grid values make cross-group ties frequent
          for (double& x : a) x = 0.25 * static_cast<double>(rng.below(40));
          for (double& x : b) x = 0.25 * static_cast<double>(rng.below(40)) + (rep == 3 ? 6.0 : 0.0);
        }
        const PermResult r = exact_perm_test(a, b);
        const BruteCount c = brute_perm(a, b);
        const double p_brute = static_cast<double>(c.extreme) / static_cast<double>(c.total);
        if (r.extreme != c.extreme || r.total != c.total || r.p != p_brute || !r.exact) ++mismatches;
        ++fixtures;
      }
    }
  }
  const bool perm_ok = mismatches == 0;

  double worst_p = 0.0;
  Rng arng = Rng(77).substream("anova-fixtures");
  for (int f = 0; f < 50; ++f) {
    const int k = 2 + static_cast<int>(arng.below(4));
    const double offset_scale = (f % 3 == 0) ? 0.0 : (f % 3 == 1 ? 0.5 : 3.0);
    std::vector<std::vector<double>> groups(static_cast<size_t>(k));
    for (int gi = 0; gi < k; ++gi) {
      const int n = 2 + static_cast<int>(arng.below(7));
      groups[static_cast<size_t>(gi)].resize(static_cast<size_t>(n));
      for (double& x : groups[static_cast<size_t>(gi)]) x = arng.normal() + offset_scale * gi;
    }
    const AnovaResult r = one_way_anova(groups);
    const long double oracle = f_tail_oracle(r.F, r.df1, r.df2);
    worst_p = std::max(worst_p, std::fabs(r.p - static_cast<double>(oracle)));
  }
  const bool anova_ok = worst_p < 1e-9;

  const bool ok = perm_ok && anova_ok;
  std::printf("criterion 5 %s: perm test vs brute force, %llu/%llu fixtures exact; ANOVA p vs series oracle, max |dp| %.3e (< 1e-9)\n",
              ok ? "PASS" : "FAIL", static_cast<unsigned long long>(fixtures - mismatches),
              static_cast<unsigned long long>(fixtures), worst_p);
  return ok;
}

// ---------------------------------------------------------------------------
// 6. Pretraining on the default correlated dataset must reach the accuracy
//    bars within the step budget; uncorrelated data must stay at chance.

double pretrain_and_eval(const ArchSpec& spec, const fs::path& data_dir, int max_steps, uint64_t seed) {
  const Dataset data = load_dataset(data_dir.string(), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(seed));
  TrainConfig cfg;
  cfg.max_steps = max_steps;
  cfg.seed = seed;
  train(spec, ps, data, cfg);
  return evaluate_itm(spec, ps, data, seed);
}

bool criterion6(const fs::path& tmp) {
  const fs::path dir = tmp / "c6_data";
  SynthSpec ss;
  write_synth(gen_synth(ss), dir.string());

  bool ok = true;
  for (const std::string& name : preset_names()) {
    const auto t0 = Clock::now();
    const double bar = name == "uniter" ? 0.9 : 0.85;
    const double acc = pretrain_and_eval(preset(name), dir, 2000, 0);
    const double dt = seconds_since(t0);
    const bool pok = acc > bar && dt < 900.0;
    ok = ok && pok;
    std::printf("  %-10s itm accuracy %.4f (> %.2f), %.0f s (< 900 s) %s\n", name.c_str(), acc, bar, dt,
                pok ? "ok" : "FAIL");
  }

  const fs::path zdir = tmp / "c6_zero";
  SynthSpec zs;
  zs.correlation = 0.0;
  write_synth(gen_synth(zs), zdir.string());
  const double zacc = pretrain_and_eval(preset("uniter"), zdir, 2000, 0);
  const bool zok = zacc >= 0.4 && zacc <= 0.6;
  ok = ok && zok;
  std::printf("  zero-correlation control: accuracy %.4f (in [0.4, 0.6]) %s\n", zacc, zok ? "ok" : "FAIL");

  std::printf("criterion 6 %s: 2000-step pretraining reaches the accuracy bars on correlated data and chance on uncorrelated data\n",
              ok ? "PASS" : "FAIL");
  return ok;
}

// ---------------------------------------------------------------------------
// 7. Long-run masking frequencies: selection rate and the mask/random/keep
//    split, measured over more than 1e5 selected tokens.

bool criterion7() {
  const int vocab = 1000;
  const int n_words = 62;
  std::vector<int> words(n_words);
  Rng wr = Rng(5).substream("words");
  for (int& w : words) w = kFirstWordId + static_cast<int>(wr.below(static_cast<uint64_t>(vocab - kFirstWordId)));

  VisionBatch vb;
  vb.width = 100.0;
  vb.height = 100.0;
  vb.features = Mat(2, 4);
  for (double& x : vb.features.a) x = 0.5;
  vb.boxes = Mat(2, 4);
  vb.boxes.a = {0.0, 0.0, 50.0, 50.0, 25.0, 25.0, 100.0, 100.0};
  vb.detector_dists = Mat(2, 3);
  vb.detector_dists.a = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  Example ex;
  ex.text = make_text_batch(words);
  ex.vision = with_img_token(vb);
  ex.itm_match = true;

  const MaskingPolicy policy;
  Rng rng = Rng(99).substream("c7");
  uint64_t candidates = 0, selected = 0, to_mask = 0, to_keep = 0, to_random = 0;
  const int n_examples = 11000;
  for (int i = 0; i < n_examples; ++i) {
    const MaskedExample mex = apply_masking(ex, policy, rng, vocab);
    candidates += static_cast<uint64_t>(n_words);
    for (const MlmLabel& lab : mex.mlm) {
      ++selected;
      const int now = mex.text.token_ids[static_cast<size_t>(lab.position)];
      if (now == kMaskId) ++to_mask;
      else if (now == lab.original_id) ++to_keep;
      else ++to_random;
    }
  }

  const double rate = static_cast<double>(selected) / static_cast<double>(candidates);
  const double f_mask = static_cast<double>(to_mask) / static_cast<double>(selected);
  const double f_keep = static_cast<double>(to_keep) / static_cast<double>(selected);
  const double f_random = static_cast<double>(to_random) / static_cast<double>(selected);

  const bool ok = selected >= 100000 && std::fabs(rate - 0.15) < 0.02 && std::fabs(f_mask - 0.8) < 0.01 &&
                  std::fabs(f_keep - 0.1) < 0.01 && std::fabs(f_random - 0.1) < 0.01;
  std::printf("criterion 7 %s: %llu selections, rate %.4f (0.15 +- 0.02), split %.4f/%.4f/%.4f (0.8/0.1/0.1 +- 0.01)\n",
              ok ? "PASS" : "FAIL", static_cast<unsigned long long>(selected), rate, f_mask, f_random, f_keep);
  return ok;
}

// ---------------------------------------------------------------------------
// 8. Bitwise training determinism: checkpoint and history files from two
//    identically seeded runs must match byte for byte.

bool criterion8(const fs::path& tmp) {
  const fs::path dir = tmp / "c8_data";
  SynthSpec ss;
  ss.n_pairs = 200;
  write_synth(gen_synth(ss), dir.string());

  const ArchSpec spec = preset("uniter");
  const Dataset data = load_dataset(dir.string(), spec.vocab);

  std::vector<fs::path> ckpts, hists;
  for (int run = 0; run < 2; ++run) {
    ParamStore ps = declare_params(spec);
    init_params(ps, Rng(0));
    TrainConfig cfg;
    cfg.max_steps = 300;
    cfg.seed = 0;
    const std::vector<StepRecord> history = train(spec, ps, data, cfg);
    const fs::path ck = tmp / ("c8_run" + std::to_string(run) + ".gbck");
    const fs::path hi = tmp / ("c8_run" + std::to_string(run) + ".jsonl");
    save_checkpoint(ps, ck.string());
    write_history(hi.string(), history);
    ckpts.push_back(ck);
    hists.push_back(hi);
  }

  const std::string c0 = slurp(ckpts[0]);
  const bool ck_ok = !c0.empty() && c0 == slurp(ckpts[1]);
  const std::string h0 = slurp(hists[0]);
  const bool hi_ok = !h0.empty() && h0 == slurp(hists[1]);
  const bool ok = ck_ok && hi_ok;
  std::printf("criterion 8 %s: two 300-step runs with identical seeds, checkpoints byte-identical: %s, histories byte-identical: %s\n",
              ok ? "PASS" : "FAIL", ck_ok ? "yes" : "NO", hi_ok ? "yes" : "NO");
  return ok;
}

// ---------------------------------------------------------------------------
// 9. On the position task the caption can only be verified through box
//    geometry, so the box5 embedding must clearly beat the bare one.

bool criterion9(const fs::path& tmp) {
  const int steps = 1000;
  double sum_none = 0.0, sum_box5 = 0.0;
  std::printf("  seed   none   box5\n");
  for (uint64_t seed = 0; seed < 5; ++seed) {
    SynthSpec ss;
    ss.task = "position";
    ss.seed = seed;
    const fs::path dir = tmp / ("c9_data_" + std::to_string(seed));
    write_synth(gen_synth(ss), dir.string());

    ArchSpec none_spec = preset("uniter");
    none_spec.embed_variant = EmbedVariant::none;
    validate(none_spec);
    const double acc_none = pretrain_and_eval(none_spec, dir, steps, seed);

    ArchSpec box_spec = preset("uniter");
    box_spec.embed_variant = EmbedVariant::box5;
    const double acc_box5 = pretrain_and_eval(box_spec, dir, steps, seed);

    sum_none += acc_none;
    sum_box5 += acc_box5;
    std::printf("  %4llu  %.4f %.4f\n", static_cast<unsigned long long>(seed), acc_none, acc_box5);
  }
  const double mean_none = sum_none / 5.0;
  const double mean_box5 = sum_box5 / 5.0;
  const bool ok = mean_box5 - mean_none >= 0.10;
  std::printf("criterion 9 %s: position task over 5 seeds, mean accuracy box5 %.4f vs none %.4f, gap %.4f (>= 0.10)\n",
              ok ? "PASS" : "FAIL", mean_box5, mean_none, mean_box5 - mean_none);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  int criterion = 0;
  fs::path tmp = "acceptance_tmp";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) criterion = std::atoi(argv[++i]);
    else if (arg == "--tmp" && i + 1 < argc) tmp = argv[++i];
    else {
      std::fprintf(stderr, "usage: %s [--criterion N] [--tmp DIR]\n", argv[0]);
      return 2;
    }
  }
  if (criterion < 0 || criterion > 9) {
    std::fprintf(stderr, "criterion must be 1..9 (0 = all)\n");
    return 2;
  }

  fs::create_directories(tmp);

  const std::map<int, std::function<bool()>> checks = {
      {1, criterion1},
      {2, criterion2},
      {3, criterion3},
      {4, criterion4},
      {5, criterion5},
      {6, [&] { return criterion6(tmp); }},
      {7, criterion7},
      {8, [&] { return criterion8(tmp); }},
      {9, [&] { return criterion9(tmp); }},
  };

  bool all_ok = true;
  try {
    for (const auto& [n, check] : checks) {
      if (criterion != 0 && n != criterion) continue;
      all_ok = check() && all_ok;
    }
  } catch (const Error& e) {
    std::printf("acceptance run aborted: %s\n", e.what());
    return 1;
  }
  return all_ok ? 0 : 1;
}
