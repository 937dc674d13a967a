#include "chunkcheck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace chunkcheck {

ConfusionCounts confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw std::invalid_argument(
        "confusion: prediction/label lengths must match and be >= 1");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] != 0, y = labels[i] != 0;
    if (p && y)
      ++c.tp;
    else if (p && !y)
      ++c.fp;
    else if (!p && !y)
      ++c.tn;
    else
      ++c.fn;
  }
  return c;
}

std::pair<double, double> precision_recall(const ConfusionCounts& c) {
  const double prec =
      c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
  const double rec =
      c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  return {prec, rec};
}

double balanced_accuracy(const ConfusionCounts& c) {
  const double tpr =
      c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  const double tnr =
      c.tn + c.fp == 0 ? 0.0 : static_cast<double>(c.tn) / (c.tn + c.fp);
  return 0.5 * (tpr + tnr);
}

double mcc(const ConfusionCounts& c) {
  const double tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
  const double denom =
      (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("roc_auc: score/label lengths must match");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += y != 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc_auc: both classes must be present");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[idx[t]] != 0) rank_sum_pos += avg_rank;
    i = j;
  }
  return (rank_sum_pos - 0.5 * n_pos * (n_pos + 1)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<std::pair<double, double>> roc_curve(
    const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("roc_curve: score/label lengths must match");
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += y != 0;
  const std::size_t n_neg = scores.size() - n_pos;
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<std::pair<double, double>> curve = {{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[idx[t]] != 0)
        ++tp;
      else
        ++fp;
    }
    curve.emplace_back(n_neg ? static_cast<double>(fp) / n_neg : 0.0,
                       n_pos ? static_cast<double>(tp) / n_pos : 0.0);
    i = j;
  }
  return curve;
}

MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels,
                              double threshold) {
  std::vector<int> preds(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    preds[i] = scores[i] >= threshold ? 1 : 0;
  MetricsReport r;
  r.counts = confusion(preds, labels);
  std::tie(r.precision, r.recall) = precision_recall(r.counts);
  r.balanced_accuracy = balanced_accuracy(r.counts);
  r.mcc = mcc(r.counts);
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += y != 0;
  if (n_pos > 0 && n_pos < labels.size()) r.roc_auc = roc_auc(scores, labels);
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["counts"] = {{"tp", counts.tp},
                 {"fp", counts.fp},
                 {"tn", counts.tn},
                 {"fn", counts.fn}};
  j["precision"] = precision;
  j["recall"] = recall;
  j["balanced_accuracy"] = balanced_accuracy;
  j["mcc"] = mcc;
  if (roc_auc)
    j["roc_auc"] = *roc_auc;
  else
    j["roc_auc"] = nullptr;
  if (latency_samples_per_sec) {
    j["latency_samples_per_sec"] = *latency_samples_per_sec;
    j["latency_stddev"] = latency_stddev.value_or(0.0);
  }
  return j.dump(2);
}

}  // namespace chunkcheck
