#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chunkcheck/metrics.hpp"
#include "chunkcheck/model.hpp"
#include "chunkcheck/synthesis.hpp"
#include "chunkcheck/tokenizer.hpp"

namespace chunkcheck {

struct TrainConfig {
  double learning_rate = 2e-6;
  double weight_decay = 0.1;
  std::size_t warmup_steps = 1000;
  std::size_t epochs = 100;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  std::optional<std::size_t> train_subset_size;  // "first N" in file order
  double grad_clip = 1.0;  // global-norm clip; <= 0 disables
  bool cosine_decay = false;  // constant LR after warmup by default
  double dropout = 0.0;
  double threshold = 0.5;
  bool parallel_batch = false;  // per-example forward/backward via OpenMP

  void validate() const;
};

// Warmup ramp lr*s/warmup, then constant (or cosine to 0 over total_steps).
double lr_at_step(const TrainConfig& cfg, std::size_t step,
                  std::size_t total_steps);

// Adam with decoupled weight decay over an ordered parameter registry.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  double global_grad_norm() const;
  void clip_grad_norm(double max_norm);
  // One update. decay is the per-step multiplicative weight decay, applied
  // independently of lr; pass lr * coefficient for the usual coupling.
  void step(double lr, double decay);
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct EncodedExample {
  std::string id;
  ChunkedPair pair;
  double label = 0.0;
};

std::vector<EncodedExample> encode_dataset(
    const std::vector<LabeledExample>& examples, const Vocab& vocab,
    const ChunkPlan& plan);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // cumulative optimizer steps
  double train_loss = 0.0;
  MetricsReport dev;
  std::string to_json() const;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based; 0 when no dev set
  double best_dev_score = 0.0;  // ROC AUC, or balanced accuracy if one-class
};

// Mean-BCE training with per-epoch dev metrics. When checkpoint_dir is
// non-empty the best-dev checkpoint is written there (and the final weights
// when no dev set is given). Throws on non-finite loss, naming the batch.
TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& dev_set,
                  const TrainConfig& cfg,
                  const std::string& checkpoint_dir = "");

// Mean sigmoid scores, in dataset order.
std::vector<double> score_dataset(const Model& model,
                                  const std::vector<EncodedExample>& dataset,
                                  bool parallel = false);

MetricsReport evaluate(const Model& model,
                       const std::vector<EncodedExample>& dataset,
                       double threshold = 0.5);

void save_history(const std::string& path,
                  const std::vector<EpochRecord>& history);

// Checkpoint directory: manifest.json + weights.bin (little-endian IEEE-754
// doubles in registry order). Round-trips byte-identically.
void save_checkpoint(const Model& model, const std::string& dir,
                     std::size_t step = 0, const std::string& metrics_json = "");
Model load_checkpoint(const std::string& dir);

// Wall-clock throughput over timed batches after warmup; batch size 4 by
// default.
LatencyReport latency_bench(const Model& model,
                            const std::vector<EncodedExample>& dataset,
                            std::size_t batch_size = 4,
                            std::size_t warmup_iters = 2,
                            std::size_t timed_iters = 5);

}  // namespace chunkcheck
