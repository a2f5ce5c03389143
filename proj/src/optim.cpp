#include "hmoe/optim.hpp"

#include <cmath>

#include "hmoe/errors.hpp"

namespace hmoe {

AdamOptimizer::AdamOptimizer(const std::vector<Tensor*>& params, AdamConfig config)
    : config_(config) {
  first_moment_.reserve(params.size());
  second_moment_.reserve(params.size());
  for (const Tensor* p : params) {
    first_moment_.emplace_back(static_cast<size_t>(p->size()), 0.0);
    second_moment_.emplace_back(static_cast<size_t>(p->size()), 0.0);
  }
}

void AdamOptimizer::step(const std::vector<Tensor*>& params) {
  if (params.size() != first_moment_.size())
    throw ContractError("optimizer state does not match the parameter list");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    std::vector<double>& m = first_moment_[i];
    std::vector<double>& v = second_moment_[i];
    if (static_cast<std::int64_t>(m.size()) != p.size())
      throw ContractError("parameter shape changed under the optimizer");
    const std::vector<double>& g = p.grad();
    for (size_t j = 0; j < m.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[static_cast<std::int64_t>(j)] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace hmoe
