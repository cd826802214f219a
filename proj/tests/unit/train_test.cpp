#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "gbt/checkpoint.hpp"
#include "gbt/train.hpp"

using namespace gbt;

namespace {

SynthSpec tiny_synth(uint64_t seed) {
  SynthSpec ss;
  ss.n_pairs = 48;
  ss.vocab = 50;
  ss.K = 4;
  ss.d_feat = 8;
  ss.C = 8;
  ss.seed = seed;
  return ss;
}

ArchSpec tiny_arch() {
  ArchSpec spec = preset("uniter");
  spec.d = 16;
  spec.h = 2;
  spec.d_ff = 32;
  spec.vocab = 60;
  spec.n_classes = 8;
  spec.d_feat = 8;
  spec.sublayers.resize(2);
  validate(spec);
  return spec;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("train");

TEST_CASE("validate_synth rejects broken specs") {
  SynthSpec ss = tiny_synth(0);
  CHECK_NOTHROW(validate_synth(ss));
  ss.n_pairs = 0;
  CHECK_THROWS_AS(validate_synth(ss), BadArgument);
  ss = tiny_synth(0);
  ss.correlation = 1.5;
  CHECK_THROWS_AS(validate_synth(ss), BadArgument);
  ss = tiny_synth(0);
  ss.task = "detection";
  CHECK_THROWS_AS(validate_synth(ss), BadArgument);
}

TEST_CASE("gen_synth is deterministic and well-formed") {
  SynthSpec ss = tiny_synth(5);
  SynthData a = gen_synth(ss);
  SynthData b = gen_synth(ss);
  REQUIRE(a.images.size() == 48);
  REQUIRE(a.captions.size() == 48);
  for (size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i].id == b.images[i].id);
    CHECK(max_abs_diff(a.images[i].batch.features, b.images[i].batch.features) == 0.0);
    CHECK(a.captions[i].text == b.captions[i].text);
    CHECK_NOTHROW(validate_vision(a.images[i].batch));
    CHECK(a.images[i].batch.regions() == 4);
    CHECK(a.images[i].batch.features.cols == 8);
    CHECK(a.images[i].batch.detector_dists.cols == 8);
    CHECK_FALSE(a.captions[i].text.empty());
  }
}

TEST_CASE("write_synth emits byte-identical files for identical data") {
  namespace fs = std::filesystem;
  SynthData data = gen_synth(tiny_synth(6));
  fs::create_directories("train_test_w1");
  fs::create_directories("train_test_w2");
  write_synth(data, "train_test_w1");
  write_synth(data, "train_test_w2");
  CHECK(slurp(vfr_path("train_test_w1")) == slurp(vfr_path("train_test_w2")));
  CHECK(slurp(captions_path("train_test_w1")) == slurp(captions_path("train_test_w2")));
  fs::remove_all("train_test_w1");
  fs::remove_all("train_test_w2");
}

TEST_CASE("load_dataset reproduces the in-memory preparation up to float32 storage") {
  namespace fs = std::filesystem;
  SynthSpec ss = tiny_synth(7);
  SynthData data = gen_synth(ss);
  fs::create_directories("train_test_load");
  write_synth(data, "train_test_load");

  Dataset mem = prepare_dataset(data, 60);
  Dataset disk = load_dataset("train_test_load", 60);
  REQUIRE(mem.size() == disk.size());
  for (int i = 0; i < mem.size(); ++i) {
    CHECK(mem.captions[i] == disk.captions[i]);
    CHECK(max_abs_diff(mem.prepared[i].features, disk.prepared[i].features) < 1e-5);
    CHECK(max_abs_diff(mem.prepared[i].boxes, disk.prepared[i].boxes) < 1e-4);
    CHECK(mem.prepared[i].regions() == 5);  // [IMG] + 4
    REQUIRE(mem.global[i].size() == disk.global[i].size());
    for (size_t j = 0; j < mem.global[i].size(); ++j)
      CHECK(std::abs(mem.global[i][j] - disk.global[i][j]) < 1e-5);
  }
  fs::remove_all("train_test_load");
}

TEST_CASE("make_example pairs captions and flags mismatches") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(8)), spec.vocab);
  Example same = make_example(data, spec, 3, 3);
  CHECK(same.itm_match);
  CHECK(same.global_img.empty());
  Example cross = make_example(data, spec, 3, 9);
  CHECK_FALSE(cross.itm_match);
  CHECK(cross.text.token_ids.front() == kClsId);
  CHECK(cross.vision.regions() == 5);

  ArchSpec gspec = tiny_arch();
  gspec.embed_variant = EmbedVariant::box5_global;
  Example with_global = make_example(data, gspec, 1, 1);
  CHECK(with_global.global_img.size() == 8);
}

TEST_CASE("validate_train rejects broken configs") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate_train(cfg));
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate_train(cfg), BadArgument);
  cfg = TrainConfig{};
  cfg.lr = -1.0;
  CHECK_THROWS_AS(validate_train(cfg), BadArgument);
  cfg = TrainConfig{};
  cfg.warmup = 1.5;
  CHECK_THROWS_AS(validate_train(cfg), BadArgument);
  cfg = TrainConfig{};
  cfg.mismatch_rate = -0.2;
  CHECK_THROWS_AS(validate_train(cfg), BadArgument);
}

TEST_CASE("the schedule warms up to the peak and decays to zero") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(9)), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(1));

  TrainConfig cfg;
  cfg.max_steps = 40;
  cfg.batch_size = 4;
  cfg.warmup = 0.25;
  cfg.seed = 2;
  auto hist = train(spec, ps, data, cfg);
  REQUIRE(hist.size() == 40);

  double peak = 0.0;
  for (const auto& r : hist) peak = std::max(peak, r.lr);
  CHECK(peak <= cfg.lr * (1.0 + 1e-12));
  CHECK(peak > 0.9 * cfg.lr);
  // Monotone rise over the warmup, monotone fall after it.
  for (int i = 1; i < 10; ++i) CHECK(hist[i].lr >= hist[i - 1].lr);
  for (int i = 11; i < 40; ++i) CHECK(hist[i].lr <= hist[i - 1].lr);
  CHECK(hist.back().lr < 0.2 * cfg.lr);
  for (int i = 0; i < 40; ++i) CHECK(hist[i].step == i + 1);
}

TEST_CASE("two hundred steps on separable data reduce the loss") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(10)), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(3));

  TrainConfig cfg;
  cfg.max_steps = 200;
  cfg.batch_size = 8;
  cfg.seed = 4;
  auto hist = train(spec, ps, data, cfg);
  REQUIRE(hist.size() == 200);

  auto avg_total = [&](int begin, int end) {
    double s = 0.0;
    for (int i = begin; i < end; ++i) s += hist[i].loss.total;
    return s / (end - begin);
  };
  CHECK(avg_total(190, 200) < avg_total(0, 10));
}

TEST_CASE("training is deterministic in the seed") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(11)), spec.vocab);

  auto run = [&]() {
    ParamStore ps = declare_params(spec);
    init_params(ps, Rng(5));
    TrainConfig cfg;
    cfg.max_steps = 30;
    cfg.batch_size = 4;
    cfg.seed = 6;
    auto hist = train(spec, ps, data, cfg);
    return std::make_pair(std::move(ps), std::move(hist));
  };

  auto [ps1, h1] = run();
  auto [ps2, h2] = run();
  REQUIRE(h1.size() == h2.size());
  for (size_t i = 0; i < h1.size(); ++i) {
    CHECK(h1[i].lr == h2[i].lr);
    CHECK(h1[i].loss.total == h2[i].loss.total);
    CHECK(h1[i].loss.n_mlm == h2[i].loss.n_mlm);
  }
  for (const auto& t : ps1.tensors()) {
    const auto& other = ps2.get(t->name).value;
    for (size_t i = 0; i < t->value.a.size(); ++i) CHECK(t->value.a[i] == other.a[i]);
  }
}

TEST_CASE("mismatch_rate one never builds reconstruction terms") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(12)), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(7));

  TrainConfig cfg;
  cfg.max_steps = 5;
  cfg.batch_size = 4;
  cfg.mismatch_rate = 1.0;
  cfg.seed = 8;
  auto hist = train(spec, ps, data, cfg);
  for (const auto& r : hist) {
    CHECK(r.loss.n_mlm == 0);
    CHECK(r.loss.n_mrc == 0);
    CHECK(r.loss.mlm == 0.0);
    CHECK(r.loss.itm > 0.0);
  }
}

TEST_CASE("heads_only freezes everything but the pooler and itm head") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(13)), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(9));

  ParamStore before = declare_params(spec);
  init_params(before, Rng(9));

  TrainConfig cfg;
  cfg.max_steps = 20;
  cfg.batch_size = 4;
  cfg.heads_only = true;
  cfg.seed = 10;
  train(spec, ps, data, cfg);

  double head_delta = 0.0;
  for (const auto& t : ps.tensors()) {
    const auto& orig = before.get(t->name).value;
    const bool head = t->name.rfind("head.pool.", 0) == 0 || t->name.rfind("head.itm.", 0) == 0;
    double delta = 0.0;
    for (size_t i = 0; i < t->value.a.size(); ++i)
      delta = std::max(delta, std::fabs(t->value.a[i] - orig.a[i]));
    if (head) head_delta = std::max(head_delta, delta);
    else CHECK(delta == 0.0);
  }
  CHECK(head_delta > 0.0);
}

TEST_CASE("an absurd learning rate raises DivergedLoss") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(14)), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(11));

  TrainConfig cfg;
  cfg.max_steps = 50;
  cfg.batch_size = 4;
  cfg.lr = 1e8;
  cfg.clip_norm = 0.0;  // disable clipping so the blowup is immediate
  cfg.seed = 12;
  CHECK_THROWS_AS(train(spec, ps, data, cfg), DivergedLoss);
}

TEST_CASE("untrained zero heads score exactly one half") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(15)), spec.vocab);
  ParamStore ps = declare_params(spec);  // all zeros: every logit is 0
  CHECK(evaluate_itm(spec, ps, data, 99) == 0.5);
}

TEST_CASE("evaluate_itm is deterministic in its seed and bounded") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(16)), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(13));
  double a = evaluate_itm(spec, ps, data, 7);
  double b = evaluate_itm(spec, ps, data, 7);
  CHECK(a == b);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
  double partial = evaluate_itm(spec, ps, data, 7, 10);
  CHECK(partial >= 0.0);
  CHECK(partial <= 1.0);
}

TEST_CASE("history files are stable JSON lines") {
  ArchSpec spec = tiny_arch();
  Dataset data = prepare_dataset(gen_synth(tiny_synth(17)), spec.vocab);
  ParamStore ps = declare_params(spec);
  init_params(ps, Rng(14));
  TrainConfig cfg;
  cfg.max_steps = 6;
  cfg.batch_size = 4;
  cfg.seed = 15;
  auto hist = train(spec, ps, data, cfg);

  write_history("train_test_h1.jsonl", hist);
  write_history("train_test_h2.jsonl", hist);
  std::string h1 = slurp("train_test_h1.jsonl");
  CHECK(h1 == slurp("train_test_h2.jsonl"));
  CHECK(std::count(h1.begin(), h1.end(), '\n') == 6);
  CHECK(h1.find("\"step\":") != std::string::npos);
  CHECK(h1.find("\"total\":") != std::string::npos);
  std::remove("train_test_h1.jsonl");
  std::remove("train_test_h2.jsonl");
}

TEST_SUITE_END();
