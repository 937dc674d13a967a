#include "chunkcheck/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chunkcheck {

namespace {

constexpr int kCheckpointVersion = 1;

std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
  return {
      {"plan",
       {{"chunk_size", cfg.plan.chunk_size},
        {"k_ctx", cfg.plan.k_ctx},
        {"k_resp", cfg.plan.k_resp}}},
      {"encoder",
       {{"layers", cfg.encoder.layers},
        {"heads", cfg.encoder.heads},
        {"dim", cfg.encoder.dim},
        {"ffn_dim", cfg.encoder.ffn_dim},
        {"max_positions", cfg.encoder.max_positions},
        {"vocab_size", cfg.encoder.vocab_size},
        {"dropout", cfg.encoder.dropout}}},
      {"aggregator",
       {{"dim", cfg.aggregator.dim},
        {"heads", cfg.aggregator.heads},
        {"k_ctx", cfg.aggregator.k_ctx},
        {"k_resp", cfg.aggregator.k_resp},
        {"dropout", cfg.aggregator.dropout},
        {"mean_pool", cfg.aggregator.mean_pool},
        {"attention_ffn", cfg.aggregator.attention_ffn}}}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  const auto& p = j.at("plan");
  cfg.plan.chunk_size = p.at("chunk_size").get<std::size_t>();
  cfg.plan.k_ctx = p.at("k_ctx").get<std::size_t>();
  cfg.plan.k_resp = p.at("k_resp").get<std::size_t>();
  const auto& e = j.at("encoder");
  cfg.encoder.layers = e.at("layers").get<std::size_t>();
  cfg.encoder.heads = e.at("heads").get<std::size_t>();
  cfg.encoder.dim = e.at("dim").get<std::size_t>();
  cfg.encoder.ffn_dim = e.at("ffn_dim").get<std::size_t>();
  cfg.encoder.max_positions = e.at("max_positions").get<std::size_t>();
  cfg.encoder.vocab_size = e.at("vocab_size").get<std::size_t>();
  cfg.encoder.dropout = e.at("dropout").get<double>();
  const auto& a = j.at("aggregator");
  cfg.aggregator.dim = a.at("dim").get<std::size_t>();
  cfg.aggregator.heads = a.at("heads").get<std::size_t>();
  cfg.aggregator.k_ctx = a.at("k_ctx").get<std::size_t>();
  cfg.aggregator.k_resp = a.at("k_resp").get<std::size_t>();
  cfg.aggregator.dropout = a.at("dropout").get<double>();
  cfg.aggregator.mean_pool = a.at("mean_pool").get<bool>();
  cfg.aggregator.attention_ffn = a.at("attention_ffn").get<bool>();
  return cfg;
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0)
    throw std::invalid_argument("TrainConfig: learning rate must be > 0");
  if (batch_size < 1)
    throw std::invalid_argument("TrainConfig: batch size must be >= 1");
  if (weight_decay < 0)
    throw std::invalid_argument("TrainConfig: weight decay must be >= 0");
  if (threshold <= 0 || threshold >= 1)
    throw std::invalid_argument("TrainConfig: threshold must be in (0,1)");
}

double lr_at_step(const TrainConfig& cfg, std::size_t step,
                  std::size_t total_steps) {
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
    return cfg.learning_rate * static_cast<double>(step) /
           static_cast<double>(cfg.warmup_steps);
  if (!cfg.cosine_decay || total_steps <= cfg.warmup_steps)
    return cfg.learning_rate;
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) /
      static_cast<double>(total_steps - cfg.warmup_steps);
  return cfg.learning_rate * 0.5 *
         (1.0 + std::cos(std::min(progress, 1.0) * 3.14159265358979323846));
}

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, double beta1,
             double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void AdamW::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

double AdamW::global_grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, t] : params_) {
    if (t.grad().empty()) continue;
    for (double g : t.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

void AdamW::clip_grad_norm(double max_norm) {
  const double norm = global_grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (auto& [name, t] : params_) {
    if (t.grad().empty()) continue;
    for (double& g : t.grad()) g *= s;
  }
}

void AdamW::step(double lr, double decay) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& w = params_[p].second;
    auto& data = w.data();
    auto& m = m_[p];
    auto& v = v_[p];
    const bool has_grad = !w.grad().empty();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = has_grad ? w.grad()[i] : 0.0;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      // decay is decoupled from both the moments and lr
      data[i] -= lr * mhat / (std::sqrt(vhat) + eps_) + decay * data[i];
    }
  }
}

std::vector<EncodedExample> encode_dataset(
    const std::vector<LabeledExample>& examples, const Vocab& vocab,
    const ChunkPlan& plan) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    EncodedExample enc;
    enc.id = ex.id;
    enc.pair = make_pair(encode(vocab, ex.context), encode(vocab, ex.response),
                         plan);
    enc.label = ex.hallucinated ? 1.0 : 0.0;
    out.push_back(std::move(enc));
  }
  return out;
}

std::string EpochRecord::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["step"] = step;
  j["train_loss"] = train_loss;
  j["dev"] = dev.counts.total() > 0
                 ? nlohmann::json::parse(dev.to_json())
                 : nlohmann::json();
  return j.dump();
}

namespace {

// One example's contribution: forward, scaled BCE, backward into tape-local
// buffers. Grad folding is left to the caller so batch order stays fixed.
double example_backward(const Model& model, const EncodedExample& ex,
                        double inv_batch, double dropout_rate,
                        std::uint64_t rng_seed, Tape& tape) {
  for (const auto& [name, t] : model.registry()) tape.watch(t);
  std::mt19937_64 rng(rng_seed);
  ForwardOptions opt;
  opt.dropout_rate = dropout_rate;
  if (dropout_rate > 0) opt.rng = &rng;
  Tensor logit = model.forward_logit(ex.pair, &tape, opt);
  Tensor loss = bce_with_logits(logit, ex.label, &tape);
  Tensor scaled = scale(loss, inv_batch, &tape);
  tape.backward(scaled);
  return loss.item();
}

}  // namespace

TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& dev_set,
                  const TrainConfig& cfg, const std::string& checkpoint_dir) {
  cfg.validate();
  if (train_set.empty())
    throw std::invalid_argument("train: empty training set");

  std::size_t n = train_set.size();
  if (cfg.train_subset_size) n = std::min(n, *cfg.train_subset_size);
  if (n == 0) throw std::invalid_argument("train: subset size is zero");

  AdamW opt(model.registry());
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  std::size_t global_step = 0;
  std::uint64_t dropout_counter = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 shuffle_rng(mix(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t epoch_examples = 0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, n - start);
      const double inv = 1.0 / static_cast<double>(bsz);
      opt.zero_grad();

      std::vector<Tape> tapes(bsz);
      std::vector<double> losses(bsz, 0.0);
      std::vector<std::uint64_t> seeds(bsz);
      for (std::size_t b = 0; b < bsz; ++b)
        seeds[b] = mix(cfg.seed ^ 0x5bf03635ULL, dropout_counter++);

      if (cfg.parallel_batch) {
#pragma omp parallel for schedule(dynamic)
        for (std::size_t b = 0; b < bsz; ++b)
          losses[b] = example_backward(model, train_set[order[start + b]], inv,
                                       cfg.dropout, seeds[b], tapes[b]);
      } else {
        for (std::size_t b = 0; b < bsz; ++b)
          losses[b] = example_backward(model, train_set[order[start + b]], inv,
                                       cfg.dropout, seeds[b], tapes[b]);
      }
      // fixed fold order keeps results identical across thread counts
      for (std::size_t b = 0; b < bsz; ++b) tapes[b].accumulate_leaf_grads();

      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l * inv;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(start / cfg.batch_size) +
            " (first example id " + train_set[order[start]].id + ")");
      epoch_loss += batch_loss * static_cast<double>(bsz);
      epoch_examples += bsz;

      if (cfg.grad_clip > 0) opt.clip_grad_norm(cfg.grad_clip);
      ++global_step;
      const double lr = lr_at_step(cfg, global_step, total_steps);
      // weight_decay follows the usual lr-coupled convention
      opt.step(lr, lr * cfg.weight_decay);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = global_step;
    rec.train_loss = epoch_loss / static_cast<double>(epoch_examples);

    if (!dev_set.empty()) {
      rec.dev = evaluate(model, dev_set, cfg.threshold);
      const double score = rec.dev.roc_auc.value_or(rec.dev.balanced_accuracy);
      if (result.best_epoch == 0 || score > result.best_dev_score) {
        result.best_epoch = epoch;
        result.best_dev_score = score;
        if (!checkpoint_dir.empty())
          save_checkpoint(model, checkpoint_dir, global_step, rec.dev.to_json());
      }
    }
    result.history.push_back(std::move(rec));
  }

  if (dev_set.empty() && !checkpoint_dir.empty())
    save_checkpoint(model, checkpoint_dir, global_step);
  return result;
}

std::vector<double> score_dataset(const Model& model,
                                  const std::vector<EncodedExample>& dataset,
                                  bool parallel) {
  std::vector<double> scores(dataset.size(), 0.0);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Tensor logit = model.forward_logit(dataset[i].pair, nullptr);
    scores[i] = 1.0 / (1.0 + std::exp(-logit.item()));
  }
  return scores;
}

MetricsReport evaluate(const Model& model,
                       const std::vector<EncodedExample>& dataset,
                       double threshold) {
  std::vector<double> scores = score_dataset(model, dataset);
  std::vector<int> labels;
  labels.reserve(dataset.size());
  for (const auto& ex : dataset) labels.push_back(ex.label > 0.5 ? 1 : 0);
  return compute_metrics(scores, labels, threshold);
}

void save_history(const std::string& path,
                  const std::vector<EpochRecord>& history) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write history file: " + path);
  for (const auto& rec : history) f << rec.to_json() << '\n';
}

void save_checkpoint(const Model& model, const std::string& dir,
                     std::size_t step, const std::string& metrics_json) {
  std::filesystem::create_directories(dir);
  const auto registry = model.registry();

  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["step"] = step;
  manifest["config"] = config_to_json(model.cfg);
  manifest["metrics"] = metrics_json.empty()
                            ? nlohmann::json()
                            : nlohmann::json::parse(metrics_json);
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : registry) {
    tensors.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"offset", offset},
                       {"count", t.size()}});
    offset += t.size();
  }
  manifest["tensors"] = tensors;
  manifest["total_values"] = offset;

  {
    std::ofstream mf(std::filesystem::path(dir) / "manifest.json",
                     std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write checkpoint manifest");
    mf << manifest.dump(2) << '\n';
  }
  {
    std::ofstream bf(std::filesystem::path(dir) / "weights.bin",
                     std::ios::binary);
    if (!bf) throw std::runtime_error("cannot write checkpoint weights");
    for (const auto& [name, t] : registry)
      bf.write(reinterpret_cast<const char*>(t.data().data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
}

Model load_checkpoint(const std::string& dir) {
  std::ifstream mf(std::filesystem::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("checkpoint manifest not found in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.at("format_version").get<int>() != kCheckpointVersion)
    throw std::runtime_error(
        "checkpoint format version mismatch: got " +
        manifest.at("format_version").dump() + ", expected " +
        std::to_string(kCheckpointVersion));

  Model model = Model::init(config_from_json(manifest.at("config")), 0);
  auto registry = model.registry();
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != registry.size())
    throw std::runtime_error("checkpoint tensor list does not match model");

  std::ifstream bf(std::filesystem::path(dir) / "weights.bin",
                   std::ios::binary);
  if (!bf) throw std::runtime_error("checkpoint weights not found in " + dir);
  bf.seekg(0, std::ios::end);
  const std::size_t bytes = static_cast<std::size_t>(bf.tellg());
  bf.seekg(0);
  if (bytes != manifest.at("total_values").get<std::size_t>() * sizeof(double))
    throw std::runtime_error("checkpoint weights truncated or corrupted");

  for (std::size_t i = 0; i < registry.size(); ++i) {
    const auto& entry = tensors[i];
    auto& [name, t] = registry[i];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("count").get<std::size_t>() != t.size())
      throw std::runtime_error("checkpoint tensor mismatch at " + name);
    bf.seekg(static_cast<std::streamoff>(
        entry.at("offset").get<std::size_t>() * sizeof(double)));
    bf.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!bf) throw std::runtime_error("checkpoint read failed at " + name);
  }
  return model;
}

LatencyReport latency_bench(const Model& model,
                            const std::vector<EncodedExample>& dataset,
                            std::size_t batch_size, std::size_t warmup_iters,
                            std::size_t timed_iters) {
  if (dataset.size() < batch_size)
    throw std::invalid_argument("latency_bench: dataset smaller than batch");
  if (timed_iters < 1)
    throw std::invalid_argument("latency_bench: timed_iters must be >= 1");

  std::size_t cursor = 0;
  auto run_batch = [&] {
    for (std::size_t b = 0; b < batch_size; ++b) {
      model.forward_logit(dataset[cursor].pair, nullptr);
      cursor = (cursor + 1) % dataset.size();
    }
  };
  for (std::size_t i = 0; i < warmup_iters; ++i) run_batch();

  std::vector<double> rates;
  for (std::size_t i = 0; i < timed_iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run_batch();
    const auto t1 = std::chrono::steady_clock::now();
    const double secs =
        std::chrono::duration<double>(t1 - t0).count();
    rates.push_back(static_cast<double>(batch_size) / std::max(secs, 1e-12));
  }
  LatencyReport r;
  r.batch_size = batch_size;
  r.timed_iters = timed_iters;
  for (double x : rates) r.samples_per_sec += x;
  r.samples_per_sec /= static_cast<double>(rates.size());
  double var = 0.0;
  for (double x : rates) var += (x - r.samples_per_sec) * (x - r.samples_per_sec);
  r.stddev = std::sqrt(var / static_cast<double>(rates.size()));
  return r;
}

}  // namespace chunkcheck
