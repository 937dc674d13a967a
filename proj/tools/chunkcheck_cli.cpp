#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chunkcheck/llm.hpp"
#include "chunkcheck/metrics.hpp"
#include "chunkcheck/model.hpp"
#include "chunkcheck/ngram.hpp"
#include "chunkcheck/synthesis.hpp"
#include "chunkcheck/tokenizer.hpp"
#include "chunkcheck/train.hpp"

namespace {

using namespace chunkcheck;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

// Thrown after inputs are loaded; maps to the runtime exit code.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  TrainConfig train;
  ModelConfig model;
  std::size_t vocab_size = 5000;
  double split_train = 0.8, split_dev = 0.1, split_test = 0.1;
  std::uint64_t split_seed = 0;
  std::uint64_t model_seed = 0;
};

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config file: " + path);
  nlohmann::json j = nlohmann::json::parse(f);

  maybe(j, "learning_rate", cfg.train.learning_rate);
  maybe(j, "weight_decay", cfg.train.weight_decay);
  maybe(j, "warmup_steps", cfg.train.warmup_steps);
  maybe(j, "epochs", cfg.train.epochs);
  maybe(j, "batch_size", cfg.train.batch_size);
  maybe(j, "seed", cfg.train.seed);
  maybe(j, "grad_clip", cfg.train.grad_clip);
  maybe(j, "cosine_decay", cfg.train.cosine_decay);
  maybe(j, "dropout", cfg.train.dropout);
  maybe(j, "threshold", cfg.train.threshold);
  maybe(j, "parallel_batch", cfg.train.parallel_batch);
  if (j.contains("train_subset_size"))
    cfg.train.train_subset_size = j.at("train_subset_size").get<std::size_t>();

  maybe(j, "chunk_size", cfg.model.plan.chunk_size);
  maybe(j, "k_ctx", cfg.model.plan.k_ctx);
  maybe(j, "k_resp", cfg.model.plan.k_resp);
  maybe(j, "dim", cfg.model.encoder.dim);
  maybe(j, "layers", cfg.model.encoder.layers);
  maybe(j, "heads", cfg.model.encoder.heads);
  maybe(j, "ffn_dim", cfg.model.encoder.ffn_dim);
  maybe(j, "encoder_dropout", cfg.model.encoder.dropout);
  maybe(j, "aggregator_dropout", cfg.model.aggregator.dropout);
  maybe(j, "mean_pool", cfg.model.aggregator.mean_pool);
  maybe(j, "attention_ffn", cfg.model.aggregator.attention_ffn);

  maybe(j, "vocab_size", cfg.vocab_size);
  maybe(j, "split_train", cfg.split_train);
  maybe(j, "split_dev", cfg.split_dev);
  maybe(j, "split_test", cfg.split_test);
  maybe(j, "split_seed", cfg.split_seed);
  maybe(j, "model_seed", cfg.model_seed);
  return cfg;
}

ClientConfig load_client_config(const std::string& path) {
  ClientConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read client config: " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  maybe(j, "base_url", cfg.base_url);
  maybe(j, "model", cfg.model);
  maybe(j, "temperature", cfg.temperature);
  maybe(j, "timeout_seconds", cfg.timeout_seconds);
  maybe(j, "max_retries", cfg.max_retries);
  maybe(j, "max_in_flight", cfg.max_in_flight);
  maybe(j, "api_key_env", cfg.api_key_env);
  maybe(j, "backoff_base_seconds", cfg.backoff_base_seconds);
  maybe(j, "judge_doc_token_budget", cfg.judge_doc_token_budget);
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  f << content;
  if (!content.empty() && content.back() != '\n') f << '\n';
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read file: " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

Vocab build_dataset_vocab(const std::vector<LabeledExample>& examples,
                          std::size_t max_size) {
  std::vector<std::string> corpus;
  for (const auto& ex : examples) {
    corpus.push_back(ex.context);
    corpus.push_back(ex.response);
  }
  return build_vocab(corpus, max_size);
}

std::pair<Model, Vocab> load_model_dir(const std::string& dir) {
  Model model = load_checkpoint(dir);
  Vocab vocab = load_vocab(dir + "/vocab.txt");
  return {std::move(model), std::move(vocab)};
}

void print_metrics_table(const MetricsReport& r) {
  std::cerr << "  precision          " << r.precision << "\n"
            << "  recall             " << r.recall << "\n"
            << "  balanced accuracy  " << r.balanced_accuracy << "\n"
            << "  mcc                " << r.mcc << "\n"
            << "  roc auc            "
            << (r.roc_auc ? std::to_string(*r.roc_auc) : std::string("n/a"))
            << "\n"
            << "  confusion          tp=" << r.counts.tp
            << " fp=" << r.counts.fp << " tn=" << r.counts.tn
            << " fn=" << r.counts.fn << "\n";
}

// --- subcommands ---

int cmd_synth(const std::string& pairs_path, std::size_t toy_n,
              const std::string& out_path, double p, std::uint64_t seed,
              const std::string& injector, const std::string& client_cfg_path,
              const std::string& save_pairs_path) {
  std::vector<DocumentPair> pairs;
  SynthesisOptions opt;
  opt.corruption_prob = p;
  opt.seed = seed;
  if (injector == "llm") {
    opt.injector = InjectorKind::kLlm;
    ClientConfig ccfg = load_client_config(client_cfg_path);
    ccfg.temperature = 0.7;
    opt.chat = [ccfg](const std::string& sys, const std::string& user) {
      return chat(ccfg, sys, user);
    };
  }

  if (toy_n > 0)
    pairs = make_toy_corpus(toy_n, seed);
  else
    pairs = load_pairs(pairs_path);
  if (!save_pairs_path.empty()) save_pairs(save_pairs_path, pairs);

  auto examples = synthesize_dataset(pairs, opt);
  save_dataset(out_path, examples);

  std::size_t hallucinated = 0, baseless = 0, contradictory = 0, fallbacks = 0;
  for (const auto& ex : examples) {
    if (!ex.hallucinated) continue;
    ++hallucinated;
    if (ex.fallback) ++fallbacks;
    (ex.type == HallucinationType::kBaseless ? baseless : contradictory)++;
  }
  nlohmann::json stats = {
      {"examples", examples.size()},
      {"hallucinated", hallucinated},
      {"hallucinated_fraction",
       examples.empty() ? 0.0 : double(hallucinated) / double(examples.size())},
      {"baseless", baseless},
      {"contradictory", contradictory},
      {"fallbacks", fallbacks}};
  std::cout << stats.dump(2) << "\n";
  std::cerr << "wrote " << examples.size() << " examples to " << out_path
            << " (" << hallucinated << " hallucinated: " << baseless
            << " baseless, " << contradictory << " contradictory, " << fallbacks
            << " fallbacks)\n";
  return kExitOk;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& out_dir) {
  RunConfig cfg = load_run_config(config_path);
  auto examples = load_dataset(data_path);
  DatasetSplit split = split_dataset(examples, cfg.split_train, cfg.split_dev,
                                     cfg.split_test, cfg.split_seed);
  Vocab vocab = build_dataset_vocab(split.train, cfg.vocab_size);
  cfg.model.encoder.vocab_size = static_cast<std::size_t>(vocab.size());
  cfg.model.sync();
  cfg.model.validate();
  cfg.train.validate();

  auto train_set = encode_dataset(split.train, vocab, cfg.model.plan);
  auto dev_set = encode_dataset(split.dev, vocab, cfg.model.plan);
  std::cerr << "training on " << train_set.size() << " examples, "
            << dev_set.size() << " dev\n";

  Model model = Model::init(cfg.model, cfg.model_seed);
  TrainResult result;
  try {
    result = train(model, train_set, dev_set, cfg.train, out_dir);
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }
  save_vocab(vocab, out_dir + "/vocab.txt");
  save_history(out_dir + "/history.jsonl", result.history);
  if (!result.history.empty())
    std::cerr << "best epoch " << result.best_epoch << " (dev score "
              << result.best_dev_score << "), final train loss "
              << result.history.back().train_loss << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& data_path, const std::string& ckpt_dir,
             const std::string& report_path, double threshold) {
  auto [model, vocab] = load_model_dir(ckpt_dir);
  auto examples = load_dataset(data_path);
  auto dataset = encode_dataset(examples, vocab, model.cfg.plan);

  MetricsReport report;
  try {
    report = evaluate(model, dataset, threshold);
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }
  if (!report.roc_auc)
    std::cerr << "warning: one class present, roc_auc reported as null\n";
  write_text(report_path, report.to_json());
  print_metrics_table(report);
  return kExitOk;
}

int cmd_score(const std::string& ckpt_dir, const std::string& context_path,
              const std::string& response_path, double threshold, bool sweep,
              const std::string& attention_csv) {
  auto [model, vocab] = load_model_dir(ckpt_dir);
  const std::vector<int> ctx = encode(vocab, read_text(context_path));
  const std::vector<int> resp = encode(vocab, read_text(response_path));

  AggregationOutput out;
  try {
    out = model.score(ctx, resp);
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }

  nlohmann::json j = {
      {"probability", out.probability},
      {"logit", out.logit},
      {"threshold", threshold},
      {"label", predict(out, threshold) == Label::kHallucinated ? "hallucinated"
                                                                : "faithful"}};
  if (sweep) {
    nlohmann::json sweeps = nlohmann::json::array();
    for (double t : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9})
      sweeps.push_back({{"threshold", t},
                        {"label", predict(out, t) == Label::kHallucinated
                                      ? "hallucinated"
                                      : "faithful"}});
    j["sweep"] = sweeps;
  }
  std::cout << j.dump(2) << "\n";

  if (!attention_csv.empty()) {
    std::string csv;
    const Tensor& a = out.attention;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) {
        if (c) csv += ',';
        csv += std::to_string(a.at(r, c));
      }
      csv += '\n';
    }
    write_text(attention_csv, csv);
  }
  return kExitOk;
}

int cmd_bench(const std::string& ckpt_dir, const std::string& data_path,
              std::size_t batch, const std::string& report_path) {
  auto [model, vocab] = load_model_dir(ckpt_dir);
  auto examples = load_dataset(data_path);
  auto dataset = encode_dataset(examples, vocab, model.cfg.plan);

  LatencyReport r;
  try {
    r = latency_bench(model, dataset, batch);
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }
  nlohmann::json j = {{"samples_per_sec", r.samples_per_sec},
                      {"stddev", r.stddev},
                      {"batch_size", r.batch_size},
                      {"timed_iters", r.timed_iters}};
  if (!report_path.empty()) write_text(report_path, j.dump(2));
  std::cout << j.dump(2) << "\n";
  std::cerr << "throughput " << r.samples_per_sec << " samples/sec (batch "
            << batch << ")\n";
  return kExitOk;
}

int cmd_judge(const std::string& data_path, const std::string& client_cfg_path,
              const std::string& report_path) {
  ClientConfig cfg = load_client_config(client_cfg_path);
  auto examples = load_dataset(data_path);

  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& ex : examples) pairs.emplace_back(ex.context, ex.response);

  std::vector<JudgeResult> verdicts;
  try {
    verdicts = judge_batch(cfg, pairs);
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }

  std::vector<int> preds, labels;
  nlohmann::json per_example = nlohmann::json::array();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const int pred = verdicts[i].label == Label::kHallucinated ? 1 : 0;
    preds.push_back(pred);
    labels.push_back(examples[i].hallucinated ? 1 : 0);
    per_example.push_back({{"id", examples[i].id},
                           {"verdict", pred ? "hallucinated" : "faithful"},
                           {"truncated", verdicts[i].truncated}});
  }
  std::vector<double> scores(preds.begin(), preds.end());
  MetricsReport metrics = compute_metrics(scores, labels);

  nlohmann::json j = {{"verdicts", per_example},
                      {"metrics", nlohmann::json::parse(metrics.to_json())}};
  write_text(report_path, j.dump(2));
  print_metrics_table(metrics);
  return kExitOk;
}

int cmd_verify(const std::string& originals_path,
               const std::string& injected_path, std::size_t order, double k,
               const std::string& report_path) {
  auto originals = read_lines(originals_path);
  auto injected = read_lines(injected_path);

  PerplexityReport report;
  try {
    NGramLM lm = train_lm(originals, order, k);
    report = verify_corpus(lm, originals, injected);
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }
  if (!report_path.empty()) write_text(report_path, report.to_json());
  std::cout << report.to_json() << "\n";
  std::cerr << "mean perplexity " << report.original.mean_ppl << " -> "
            << report.injected.mean_ppl << " (delta " << report.delta << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-context hallucination detector pipeline"};
  app.require_subcommand(1);

  // synth
  std::string synth_pairs, synth_out, synth_injector = "rule";
  std::string synth_client_cfg, synth_save_pairs;
  std::size_t synth_toy = 0;
  double synth_p = 0.5;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Synthesize a labeled dataset");
  synth->add_option("--pairs", synth_pairs, "DocumentPair JSONL input");
  synth->add_option("--toy-corpus", synth_toy, "generate N toy pairs instead");
  synth->add_option("--out", synth_out, "output dataset JSONL")->required();
  synth->add_option("--p", synth_p, "corruption probability");
  synth->add_option("--seed", synth_seed, "RNG seed");
  synth->add_option("--injector", synth_injector, "rule or llm")
      ->check(CLI::IsMember({"rule", "llm"}));
  synth->add_option("--client-config", synth_client_cfg,
                    "LLM client config (injector=llm)");
  synth->add_option("--save-pairs", synth_save_pairs,
                    "also write the uncorrupted pairs");

  // train
  std::string train_data, train_cfg, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train the detector");
  train_cmd->add_option("--data", train_data, "dataset JSONL")->required();
  train_cmd->add_option("--config", train_cfg, "training config JSON");
  train_cmd->add_option("--out", train_out, "checkpoint directory")->required();

  // eval
  std::string eval_data, eval_ckpt, eval_report;
  double eval_threshold = 0.5;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--data", eval_data, "dataset JSONL")->required();
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint directory")->required();
  eval_cmd->add_option("--report", eval_report, "metrics JSON out")->required();
  eval_cmd->add_option("--threshold", eval_threshold, "decision threshold");

  // score
  std::string score_ckpt, score_ctx, score_resp, score_attention;
  double score_threshold = 0.5;
  bool score_sweep = false;
  auto* score_cmd = app.add_subcommand("score", "Score one context/response");
  score_cmd->add_option("--ckpt", score_ckpt, "checkpoint directory")
      ->required();
  score_cmd->add_option("--context", score_ctx, "context text file")
      ->required();
  score_cmd->add_option("--response", score_resp, "response text file")
      ->required();
  score_cmd->add_option("--threshold", score_threshold, "decision threshold");
  score_cmd->add_flag("--sweep", score_sweep, "emit labels across thresholds");
  score_cmd->add_option("--attention-csv", score_attention,
                        "dump aggregator attention weights");

  // bench
  std::string bench_ckpt, bench_data, bench_report;
  std::size_t bench_batch = 4;
  auto* bench_cmd = app.add_subcommand("bench", "Measure inference throughput");
  bench_cmd->add_option("--ckpt", bench_ckpt, "checkpoint directory")
      ->required();
  bench_cmd->add_option("--data", bench_data, "dataset JSONL")->required();
  bench_cmd->add_option("--batch", bench_batch, "batch size");
  bench_cmd->add_option("--report", bench_report, "report JSON out");

  // judge
  std::string judge_data, judge_client_cfg, judge_report;
  auto* judge_cmd = app.add_subcommand("judge", "LLM-judge baseline");
  judge_cmd->add_option("--data", judge_data, "dataset JSONL")->required();
  judge_cmd->add_option("--client-config", judge_client_cfg,
                        "LLM client config JSON")
      ->required();
  judge_cmd->add_option("--report", judge_report, "report JSON out")
      ->required();

  // verify
  std::string verify_orig, verify_inj, verify_report;
  std::size_t verify_order = 3;
  double verify_k = 0.01;
  auto* verify_cmd =
      app.add_subcommand("verify", "Perplexity check of injected texts");
  verify_cmd->add_option("--originals", verify_orig, "one text per line")
      ->required();
  verify_cmd->add_option("--injected", verify_inj, "one text per line")
      ->required();
  verify_cmd->add_option("--order", verify_order, "n-gram order");
  verify_cmd->add_option("--k", verify_k, "add-k smoothing");
  verify_cmd->add_option("--report", verify_report, "report JSON out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      if (synth_pairs.empty() && synth_toy == 0)
        throw std::invalid_argument("synth: give --pairs or --toy-corpus");
      return cmd_synth(synth_pairs, synth_toy, synth_out, synth_p, synth_seed,
                       synth_injector, synth_client_cfg, synth_save_pairs);
    }
    if (train_cmd->parsed()) return cmd_train(train_data, train_cfg, train_out);
    if (eval_cmd->parsed())
      return cmd_eval(eval_data, eval_ckpt, eval_report, eval_threshold);
    if (score_cmd->parsed())
      return cmd_score(score_ckpt, score_ctx, score_resp, score_threshold,
                       score_sweep, score_attention);
    if (bench_cmd->parsed())
      return cmd_bench(bench_ckpt, bench_data, bench_batch, bench_report);
    if (judge_cmd->parsed())
      return cmd_judge(judge_data, judge_client_cfg, judge_report);
    if (verify_cmd->parsed())
      return cmd_verify(verify_orig, verify_inj, verify_order, verify_k,
                        verify_report);
  } catch (const RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
