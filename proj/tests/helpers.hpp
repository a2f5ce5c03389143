#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "hmoe/rng.hpp"
#include "hmoe/tensor.hpp"

namespace hmoe::testing {

/// Central-difference gradient oracle. `forward` must rebuild the loss
/// from the current parameter values on every call; the parameters must
/// already hold analytic gradients. Returns the worst relative error,
/// with |a - n| / max(|a|, |n|, 1e-4) as the error measure so that
/// finite-difference noise on near-zero gradients is judged on an
/// absolute scale.
inline double max_grad_rel_error(const std::vector<Tensor*>& params,
                                 const std::function<double()>& forward, double h = 1e-6) {
  double worst = 0.0;
  for (Tensor* p : params) {
    const std::vector<double>& analytic = p->grad();
    for (std::int64_t i = 0; i < p->size(); ++i) {
      const double keep = (*p)[i];
      (*p)[i] = keep + h;
      const double up = forward();
      (*p)[i] = keep - h;
      const double down = forward();
      (*p)[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[static_cast<size_t>(i)];
      const double err = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-4});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Central-difference gradient of `forward` with respect to one tensor's
/// entries.
inline std::vector<double> fd_gradient(Tensor& param, const std::function<double()>& forward,
                                       double h = 1e-6) {
  std::vector<double> out(static_cast<size_t>(param.size()));
  for (std::int64_t i = 0; i < param.size(); ++i) {
    const double keep = param[i];
    param[i] = keep + h;
    const double up = forward();
    param[i] = keep - h;
    const double down = forward();
    param[i] = keep;
    out[static_cast<size_t>(i)] = (up - down) / (2.0 * h);
  }
  return out;
}

inline double grad_rel_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) /
         std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace hmoe::testing
