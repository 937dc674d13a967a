#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace chunkcheck {

// Positive class = hallucinated throughout.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels);

// Zero denominators map to 0 so degenerate classifiers stay comparable.
std::pair<double, double> precision_recall(const ConfusionCounts& c);
double balanced_accuracy(const ConfusionCounts& c);
double mcc(const ConfusionCounts& c);

// Rank-based (Mann-Whitney) with average ranks for ties. Throws if only one
// class is present.
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

// (FPR, TPR) per distinct threshold, for plotting.
std::vector<std::pair<double, double>> roc_curve(
    const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricsReport {
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double balanced_accuracy = 0.0;
  double mcc = 0.0;
  std::optional<double> roc_auc;  // absent when only one class is present
  std::optional<double> latency_samples_per_sec;
  std::optional<double> latency_stddev;

  std::string to_json() const;
};

MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels,
                              double threshold = 0.5);

struct LatencyReport {
  double samples_per_sec = 0.0;  // mean across timed iterations
  double stddev = 0.0;
  std::size_t batch_size = 0;
  std::size_t timed_iters = 0;
};

}  // namespace chunkcheck
