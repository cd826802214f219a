#include "gbt/train.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gbt/threads.hpp"

namespace gbt {

void validate_train(const TrainConfig& cfg) {
  if (cfg.epochs < 0 || (cfg.epochs == 0 && cfg.max_steps == 0)) throw BadArgument("no steps to run");
  if (cfg.batch_size < 1) throw BadArgument("batch_size must be >= 1");
  if (cfg.max_steps < 0) throw BadArgument("max_steps must be >= 0");
  if (cfg.lr < 0.0) throw BadArgument("lr must be >= 0");
  if (cfg.warmup < 0.0 || cfg.warmup > 1.0) throw BadArgument("warmup must be in [0, 1]");
  if (cfg.weight_decay < 0.0 || cfg.clip_norm < 0.0) throw BadArgument("decay and clip must be >= 0");
  if (cfg.mismatch_rate < 0.0 || cfg.mismatch_rate > 1.0) throw BadArgument("mismatch_rate must be in [0, 1]");
  validate_policy(cfg.masking);
}

Dataset prepare_dataset(SynthData data, int vocab) {
  if (data.images.size() != data.captions.size()) throw ShapeMismatch("images and captions differ in count");
  Dataset out;
  out.images = std::move(data.images);
  out.captions.reserve(out.images.size());
  out.prepared.reserve(out.images.size());
  out.global.reserve(out.images.size());
  for (size_t i = 0; i < out.images.size(); ++i) {
    if (data.captions[i].image_id != out.images[i].id)
      throw ParseError("caption " + std::to_string(i) + " is for image " + std::to_string(data.captions[i].image_id) +
                       ", expected " + std::to_string(out.images[i].id));
    out.captions.push_back(tokenize(data.captions[i].text, vocab));
    out.prepared.push_back(with_img_token(out.images[i].batch));
    out.global.push_back(global_image_feature(out.images[i].batch));
  }
  return out;
}

Dataset load_dataset(const std::string& dir, int vocab) {
  SynthData data;
  data.images = read_vfr(vfr_path(dir));
  data.captions = read_captions(captions_path(dir));
  return prepare_dataset(std::move(data), vocab);
}

Example make_example(const Dataset& data, const ArchSpec& spec, int image, int caption) {
  if (image < 0 || image >= data.size() || caption < 0 || caption >= data.size())
    throw IdOutOfRange("pair (" + std::to_string(image) + ", " + std::to_string(caption) + ")");
  Example ex;
  ex.text = make_text_batch(data.captions[caption]);
  ex.vision = data.prepared[image];
  if (spec.embed_variant == EmbedVariant::box5_global) ex.global_img = data.global[image];
  ex.itm_match = image == caption;
  return ex;
}

namespace {

struct AdamW {
  const TrainConfig& cfg;
  std::vector<Mat> m, v;
  std::vector<bool> trainable, decayed;
  int t = 0;

  AdamW(const ParamStore& ps, const TrainConfig& c) : cfg(c) {
    for (const auto& tns : ps.tensors()) {
      m.emplace_back(tns->value.rows, tns->value.cols);
      v.emplace_back(tns->value.rows, tns->value.cols);
      bool head = tns->name.rfind("head.pool.", 0) == 0 || tns->name.rfind("head.itm.", 0) == 0;
      trainable.push_back(!cfg.heads_only || head);
      decayed.push_back(is_weight_tensor(tns->name));
    }
  }

  void step(ParamStore& ps, double lr) {
    ++t;
    // global-norm clip over trainable gradients
    double sq = 0.0;
    size_t i = 0;
    for (const auto& tns : ps.tensors()) {
      if (trainable[i])
        for (double g : tns->grad.a) sq += g * g;
      ++i;
    }
    double norm = std::sqrt(sq);
    double gscale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    i = 0;
    for (const auto& tns : ps.tensors()) {
      if (trainable[i]) {
        double wd = decayed[i] ? cfg.weight_decay : 0.0;
        for (size_t j = 0; j < tns->value.a.size(); ++j) {
          double g = tns->grad.a[j] * gscale;
          double& mj = m[i].a[j];
          double& vj = v[i].a[j];
          mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * g;
          vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * g * g;
          double update = (mj / bc1) / (std::sqrt(vj / bc2) + cfg.adam_eps);
          tns->value.a[j] -= lr * (update + wd * tns->value.a[j]);
        }
      }
      ++i;
    }
  }
};

double schedule(double lr, int step, int total, double warmup_frac) {
  int warm = static_cast<int>(std::lround(warmup_frac * total));
  if (warm > 0 && step <= warm) return lr * step / warm;
  if (total <= warm) return lr;
  return lr * (total - step) / static_cast<double>(total - warm);
}

}  // namespace

std::vector<StepRecord> train(const ArchSpec& spec, ParamStore& ps, const Dataset& data, const TrainConfig& cfg) {
  validate(spec);
  validate_train(cfg);
  if (data.size() < 2) throw BadArgument("need at least two pairs to sample mismatches");

  const int n = data.size();
  const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const int total_steps = cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * steps_per_epoch;

  Rng root(cfg.seed);
  Rng order_rng = root.substream("order");
  Rng pair_rng = root.substream("pairs");
  Rng mask_rng = root.substream("masking");

  AdamW opt(ps, cfg);
  std::vector<StepRecord> history;
  history.reserve(static_cast<size_t>(total_steps));

  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  int cursor = n;  // forces a shuffle on first use

  for (int step = 1; step <= total_steps; ++step) {
    ps.zero_grads();
    LossBreakdown mean;
    for (int bi = 0; bi < cfg.batch_size; ++bi) {
      if (cursor >= n) {
        for (int i = n - 1; i > 0; --i)
          std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(order_rng.below(static_cast<uint64_t>(i + 1)))]);
        cursor = 0;
      }
      const int img = order[static_cast<size_t>(cursor++)];
      int cap = img;
      if (pair_rng.next_unit() < cfg.mismatch_rate) {
        cap = static_cast<int>(pair_rng.below(static_cast<uint64_t>(n - 1)));
        if (cap >= img) ++cap;  // never the image's own caption
      }
      Example ex = make_example(data, spec, img, cap);
      // every example is masked the same way; only the MLM/MRC loss terms are
      // skipped for mismatched pairs, so the ITM head cannot read the label
      // off masking artifacts
      MaskedExample masked = apply_masking(ex, cfg.masking, mask_rng, spec.vocab);
      Graph g(&ps);
      ExampleLossVars vars = build_example_loss(g, spec, masked);
      LossBreakdown lb = read_breakdown(g, vars);
      if (!std::isfinite(lb.total))
        throw DivergedLoss("total loss is not finite at step " + std::to_string(step));
      g.backward(vars.total, 1.0 / cfg.batch_size);
      mean.mlm += lb.mlm / cfg.batch_size;
      mean.mrc_kl += lb.mrc_kl / cfg.batch_size;
      mean.itm += lb.itm / cfg.batch_size;
      mean.total += lb.total / cfg.batch_size;
      mean.n_mlm += lb.n_mlm;
      mean.n_mrc += lb.n_mrc;
    }
    double lr_t = schedule(cfg.lr, step, total_steps, cfg.warmup);
    opt.step(ps, lr_t);
    for (const auto& t : ps.tensors())
      for (double v : t->value.a)
        if (!std::isfinite(v) || std::fabs(v) > 1e5)
          throw DivergedLoss("parameter " + t->name + " left the stable range at step " + std::to_string(step));
    history.push_back({step, lr_t, mean});
  }
  return history;
}

double evaluate_itm(const ArchSpec& spec, ParamStore& ps, const Dataset& data, uint64_t seed, int max_pairs) {
  if (data.size() < 2) throw BadArgument("need at least two pairs");
  const int n = max_pairs > 0 ? std::min(max_pairs, data.size()) : data.size();
  Rng rng = Rng(seed).substream("eval");
  std::vector<int> partner(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int j = static_cast<int>(rng.below(static_cast<uint64_t>(data.size() - 1)));
    if (j >= i) ++j;
    partner[static_cast<size_t>(i)] = j;
  }
  std::vector<int> correct(static_cast<size_t>(n), 0);
  parallel_chunks(n, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      Graph gm(&ps);
      double logit_match = gm.scalar(build_itm_logit(gm, spec, make_example(data, spec, i, i)));
      Graph gx(&ps);
      double logit_mismatch = gx.scalar(build_itm_logit(gx, spec, make_example(data, spec, i, partner[static_cast<size_t>(i)])));
      correct[static_cast<size_t>(i)] = (logit_match > 0.0 ? 1 : 0) + (logit_mismatch <= 0.0 ? 1 : 0);
    }
  });
  int right = 0;
  for (int c : correct) right += c;
  return static_cast<double>(right) / (2.0 * n);
}

void write_history(const std::string& path, const std::vector<StepRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& rec : history) {
    nlohmann::json j = {{"step", rec.step},       {"lr", rec.lr},          {"mlm", rec.loss.mlm},
                        {"mrc_kl", rec.loss.mrc_kl}, {"itm", rec.loss.itm},  {"total", rec.loss.total},
                        {"n_mlm", rec.loss.n_mlm},   {"n_mrc", rec.loss.n_mrc}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace gbt
