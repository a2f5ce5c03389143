#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hmoe/model.hpp"
#include "hmoe/tensor.hpp"

namespace hmoe {

/// Columnar dataset. Exactly one of y_reg / y_cls is populated, matching
/// the task. domain may be empty when no domain annotation exists.
struct Dataset {
  TaskKind task = TaskKind::Regression;
  Tensor x;  // [N x dim]; default-constructed when empty
  std::vector<double> y_reg;
  std::vector<int> y_cls;
  std::vector<int> domain;
  int num_classes = 0;
  int num_domains = 0;

  int size() const { return static_cast<int>(task == TaskKind::Regression ? y_reg.size() : y_cls.size()); }
  int dim() const { return x.empty() ? 0 : x.cols(); }
  /// Regression targets as a [N x 1] tensor.
  Tensor regression_targets() const;
};

/// Rows of a dataset selected by index, in the given order.
Dataset subset(const Dataset& data, const std::vector<int>& indices);

/// One-dimensional sine regression set: y = sin(4*pi*x) sampled uniformly
/// on the intervals (0, 0.5), (1, 1.5) and (2, 2.5) with 10, 20 and 30
/// points respectively; the interval index doubles as the domain id.
Dataset gen_toy_regression(std::uint64_t seed);

struct SyntheticSpec {
  int domains = 3;
  int classes = 3;
  int n_per = 100;  // examples per (domain, class) pair
  double separation = 10.0;
  int dim = 16;  // inputs are 2-D geometry lifted through a fixed random map
};

/// Gaussian class blobs arranged per domain, each domain being the same
/// constellation under its own rotation and translation; larger
/// separation tightens the blobs relative to the layout, so true domains
/// become linearly separable.
Dataset gen_synthetic_domains(const SyntheticSpec& spec, std::uint64_t seed);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Disjoint per-domain split; the train side receives
/// floor(train_fraction * n) examples of each domain.
std::pair<Dataset, Dataset> split_train_val(const Dataset& data, const SplitSpec& spec);

/// Dataset CSV with header x_0..x_{n-1},y,d.
void save_dataset_csv(const Dataset& data, const std::string& path);
Dataset load_dataset_csv(const std::string& path, TaskKind task);

}  // namespace hmoe
