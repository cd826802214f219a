#pragma once

#include <string>
#include <vector>

#include "gbt/arch.hpp"
#include "gbt/model.hpp"
#include "gbt/params.hpp"
#include "gbt/synth.hpp"

namespace gbt {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  int max_steps = 0;  // 0: epochs * steps-per-epoch
  double lr = 1e-3;
  double warmup = 0.1;  // proportion of total steps
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  double mismatch_rate = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool heads_only = false;  // fine-tuning mode: update pooler + ITM head only
  MaskingPolicy masking;
  uint64_t seed = 0;
};

void validate_train(const TrainConfig& cfg);

// Image-caption pairs plus per-image precomputation ([IMG] row, global
// feature) shared by training and evaluation.
struct Dataset {
  std::vector<ImageRecord> images;          // raw records (no [IMG] row)
  std::vector<std::vector<int>> captions;   // tokenized, aligned with images
  std::vector<VisionBatch> prepared;        // with [IMG] prepended
  std::vector<std::vector<double>> global;  // mean-pooled features

  int size() const { return static_cast<int>(images.size()); }
};

Dataset prepare_dataset(SynthData data, int vocab);
Dataset load_dataset(const std::string& dir, int vocab);

// Pair image i with caption j (j == i for a matched pair).
Example make_example(const Dataset& data, const ArchSpec& spec, int image, int caption);

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  LossBreakdown loss;  // batch means; n_mlm/n_mrc are batch totals
};

// AdamW with linear warmup / linear decay, global-norm gradient clipping,
// decoupled weight decay on weight tensors only. Deterministic in cfg.seed.
// Throws DivergedLoss (with the step index) if the total loss leaves the
// finite range or any parameter grows past a sanity bound after an update.
std::vector<StepRecord> train(const ArchSpec& spec, ParamStore& ps, const Dataset& data, const TrainConfig& cfg);

// Balanced matched/mismatched ITM accuracy at threshold 0.5 over up to
// max_pairs images (0 = all). Mismatches draw a caption from another image.
double evaluate_itm(const ArchSpec& spec, ParamStore& ps, const Dataset& data, uint64_t seed, int max_pairs = 0);

// JSON-lines history, one record per step, byte-deterministic.
void write_history(const std::string& path, const std::vector<StepRecord>& history);

}  // namespace gbt
