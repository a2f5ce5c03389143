#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace hmoe {

/// Deterministic random stream. All experiment randomness derives from a
/// single seed fanned out into named sub-streams ("init", "data", "split",
/// "shuffle", "mixup"), so changing how one component draws does not
/// perturb the others. Distributions are implemented in-library to keep
/// draws identical across standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::string_view stream);

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev);
  /// Beta(a, b) via Marsaglia-Tsang gamma sampling.
  double beta(double a, double b);
  /// Uniform integer in [0, n).
  std::int64_t below(std::int64_t n);

  std::vector<int> permutation(int n);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const auto j = static_cast<size_t>(below(i + 1));
      std::swap(v[static_cast<size_t>(i)], v[j]);
    }
  }

 private:
  double gamma(double shape);

  std::uint64_t state_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hmoe
