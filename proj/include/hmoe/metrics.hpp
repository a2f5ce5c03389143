#pragma once

#include <vector>

#include "hmoe/tensor.hpp"

namespace hmoe {

/// Mean silhouette coefficient over points (rows) under the given cluster
/// labels, Euclidean distance. Singleton-cluster points score 0; requires
/// at least two distinct clusters.
double silhouette(const Tensor& points, const std::vector<int>& labels);

/// Fraction of examples covered by the majority true label of their
/// predicted cluster.
double cluster_purity(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Fraction of equal entries.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Mean squared error between a [N x 1] prediction tensor and targets.
double mse_metric(const Tensor& predictions, const std::vector<double>& targets);

/// Row-wise argmax (ties toward the lowest index).
std::vector<int> argmax_rows(const Tensor& m);

}  // namespace hmoe
