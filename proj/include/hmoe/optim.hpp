#pragma once

#include <cstdint>
#include <vector>

#include "hmoe/tensor.hpp"

namespace hmoe {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers mirror the parameter list
/// handed to the constructor; step() consumes the gradients currently
/// stored on the parameters.
class AdamOptimizer {
 public:
  AdamOptimizer(const std::vector<Tensor*>& params, AdamConfig config);

  void step(const std::vector<Tensor*>& params);
  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t step_count_ = 0;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
};

}  // namespace hmoe
