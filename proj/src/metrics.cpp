#include "hmoe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "hmoe/errors.hpp"

namespace hmoe {

double silhouette(const Tensor& points, const std::vector<int>& labels) {
  if (points.rank() != 2) throw DimensionError("silhouette points must be rank 2");
  const int n = points.rows();
  if (static_cast<int>(labels.size()) != n)
    throw ContractError("silhouette label count must match the point count");
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw EvalError("silhouette requires at least two distinct clusters");

  std::map<int, int> cluster_size;
  for (int l : labels) ++cluster_size[l];

  const int d = points.cols();
  auto dist = [&](int i, int j) {
    double acc = 0.0;
    for (int f = 0; f < d; ++f) {
      const double diff = points.at(i, f) - points.at(j, f);
      acc += diff * diff;
    }
    return std::sqrt(acc);
  };

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int li = labels[static_cast<size_t>(i)];
    if (cluster_size[li] == 1) continue;  // singleton scores 0
    std::map<int, double> sum_to;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to[labels[static_cast<size_t>(j)]] += dist(i, j);
    }
    const double a = sum_to[li] / (cluster_size[li] - 1);
    double b = std::numeric_limits<double>::max();
    for (const auto& [l, s] : sum_to)
      if (l != li) b = std::min(b, s / cluster_size[l]);
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / n;
}

double cluster_purity(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw ContractError("purity inputs must have equal lengths");
  if (predicted.empty()) throw ContractError("purity inputs must be non-empty");
  std::map<int, std::map<int, int>> counts;
  for (size_t i = 0; i < predicted.size(); ++i) ++counts[predicted[i]][truth[i]];
  int majority = 0;
  for (const auto& [cluster, hist] : counts) {
    int best = 0;
    for (const auto& [label, c] : hist) best = std::max(best, c);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(predicted.size());
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw ContractError("accuracy inputs must have equal lengths");
  if (predicted.empty()) throw ContractError("accuracy inputs must be non-empty");
  int hits = 0;
  for (size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double mse_metric(const Tensor& predictions, const std::vector<double>& targets) {
  if (predictions.size() != static_cast<std::int64_t>(targets.size()))
    throw ContractError("mse inputs must have equal lengths");
  if (targets.empty()) throw ContractError("mse inputs must be non-empty");
  double acc = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    const double diff = predictions[static_cast<std::int64_t>(i)] - targets[i];
    acc += diff * diff;
  }
  return acc / static_cast<double>(targets.size());
}

std::vector<int> argmax_rows(const Tensor& m) {
  if (m.rank() != 2) throw DimensionError("argmax_rows requires a rank-2 tensor");
  std::vector<int> out(static_cast<size_t>(m.rows()));
  for (int r = 0; r < m.rows(); ++r) {
    int best = 0;
    for (int c = 1; c < m.cols(); ++c)
      if (m.at(r, c) > m.at(r, best)) best = c;
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

}  // namespace hmoe
