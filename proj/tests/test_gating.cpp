#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hmoe/errors.hpp"
#include "hmoe/gating.hpp"
#include "helpers.hpp"

using namespace hmoe;
using hmoe::testing::random_tensor;

namespace {

GateDistribution gates_of(Tape& tape, const Tensor& v, const Tensor& e, double eps = 1e-8) {
  return gate_values(tape, tape.constant(v), tape.constant(e), eps);
}

}  // namespace

TEST_CASE("equidistant input routes uniformly") {
  Tensor v({1, 2}, {0.0, 0.0});
  Tensor e({3, 2}, {1, 0, 0, 1, -1, 0});
  Tape tape;
  Tensor p = gates_of(tape, v, e).probabilities();
  for (int k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("coincidence with an embedding forces near-total gate mass") {
  Tensor v({1, 1}, {0.0});
  Tensor e({2, 1}, {0.0, 1.0});
  Tape tape;
  Tensor p = gates_of(tape, v, e, 1e-8).probabilities();
  CHECK(p[0] >= 1.0 - 1e-7);
}

TEST_CASE("gate values reproduce the distance example") {
  Tensor v({1, 1}, {0.0});
  Tensor e({3, 1}, {1.0, -2.0, 3.0});
  Tape tape;
  GateDistribution g = gates_of(tape, v, e, 1e-8);
  const Tensor s = g.s.tensor();
  CHECK(s[0] == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(s[1] == doctest::Approx(-1.3863).epsilon(1e-3));
  CHECK(s[2] == doctest::Approx(-2.1972).epsilon(1e-3));
  const Tensor p = g.probabilities();
  CHECK(p[0] == doctest::Approx(0.7347).epsilon(2e-3));
  CHECK(p[1] == doctest::Approx(0.1837).epsilon(2e-3));
  CHECK(p[2] == doctest::Approx(0.0816).epsilon(2e-3));
  CHECK(g.d[0] == doctest::Approx(1.0));
  CHECK(g.d[1] == doctest::Approx(2.0));
  CHECK(g.d[2] == doctest::Approx(3.0));
}

TEST_CASE("gate dimensions must agree") {
  Tape tape;
  CHECK_THROWS_AS(
      gate_values(tape, tape.constant(Tensor({1, 2})), tape.constant(Tensor({3, 3})), 1e-8),
      DimensionError);
  CHECK_THROWS_AS(
      gate_values(tape, tape.constant(Tensor({1, 2})), tape.constant(Tensor({3, 2})), 0.0),
      ContractError);
}

TEST_CASE("entropy endpoints and example value") {
  Tape tape;
  {
    Tensor onehot({2, 3}, {1, 0, 0, 0, 0, 1});
    CHECK(mean_row_entropy(tape.constant(onehot)).scalar() == 0.0);
  }
  {
    Tensor uniform = Tensor::full({4, 3}, 1.0 / 3);
    CHECK(mean_row_entropy(tape.constant(uniform)).scalar() ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  {
    Tensor p({1, 3}, {0.7347, 0.1837, 0.0816});
    CHECK(mean_row_entropy(tape.constant(p)).scalar() == doctest::Approx(0.7423).epsilon(2e-3));
  }
}

TEST_CASE("entropy stays within [0, ln K]") {
  Rng rng(19);
  Tape tape;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    Tensor s = random_tensor({3, k}, rng, 4.0);
    Value p = softmax_rows(tape.constant(s));
    const double h = mean_row_entropy(p).scalar();
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("gamma_en schedule") {
  CHECK(gamma_en(0.0) == 0.0);
  CHECK(gamma_en(0.25) == 0.5);
  CHECK(gamma_en(0.5) == 1.0);
  CHECK(gamma_en(0.75) == 1.0);
  CHECK_THROWS_AS(gamma_en(-0.1), ContractError);
  CHECK_THROWS_AS(gamma_en(1.1), ContractError);
}

TEST_CASE("kl balance endpoints and direct evaluation") {
  Tape tape;
  {
    Tensor uniform = Tensor::full({5, 3}, 1.0 / 3);
    CHECK(std::fabs(kl_balance_uniform(tape.constant(uniform)).scalar()) < 1e-12);
  }
  {
    Tensor onehot({4, 3}, {1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0});
    CHECK(kl_balance_uniform(tape.constant(onehot)).scalar() ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  {
    // One row whose column shares are exactly [0.5, 0.3, 0.2].
    Tensor p({1, 3}, {0.5, 0.3, 0.2});
    const double expect =
        0.5 * std::log(3 * 0.5) + 0.3 * std::log(3 * 0.3) + 0.2 * std::log(3 * 0.2);
    CHECK(expect == doctest::Approx(0.0689593).epsilon(1e-4));
    CHECK(kl_balance_uniform(tape.constant(p)).scalar() ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("kl balance stays within [0, ln K]") {
  Rng rng(23);
  Tape tape;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    Value p = softmax_rows(tape.constant(random_tensor({4, k}, rng, 3.0)));
    const double v = kl_balance_uniform(p).scalar();
    CHECK(v >= -1e-12);
    CHECK(v <= std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("lambda_grl schedule") {
  CHECK(lambda_grl(0.0) == 0.0);
  CHECK(lambda_grl(0.5) == doctest::Approx(0.98661).epsilon(1e-5));
  CHECK(lambda_grl(1.0) == doctest::Approx(0.99991).epsilon(1e-4));
  CHECK(lambda_grl(1.0) < 1.0);
  CHECK_THROWS_AS(lambda_grl(2.0), ContractError);
}

TEST_CASE("schedule state combines both curves") {
  const ScheduleState s = make_schedule(0.25);
  CHECK(s.pct_tr == 0.25);
  CHECK(s.gamma_en == 0.5);
  CHECK(s.lambda_grl == doctest::Approx(2.0 / (1.0 + std::exp(-2.5)) - 1.0).epsilon(1e-12));
}

TEST_CASE("cluster assignment and its tie rule") {
  CHECK(assign_cluster(Tensor({1, 3}, {0, 0, 1})) == std::vector<int>{2});
  CHECK(assign_cluster(Tensor::full({1, 3}, 1.0 / 3)) == std::vector<int>{0});
  CHECK(assign_cluster(Tensor({1, 3}, {0.1, 0.6, 0.3})) == std::vector<int>{1});
}

TEST_CASE("cluster assignment is invariant under increasing score transforms") {
  Rng rng(31);
  Tape tape;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(4));
    Tensor s = random_tensor({4, k}, rng, 2.0);
    const double a = rng.uniform(0.1, 5.0);
    const double b = rng.uniform(-3.0, 3.0);
    Tensor warped = s;
    for (std::int64_t i = 0; i < s.size(); ++i) warped[i] = a * s[i] + b;
    Tensor p = softmax_rows(tape.constant(s)).tensor();
    Tensor q = softmax_rows(tape.constant(warped)).tensor();
    CHECK(assign_cluster(p) == assign_cluster(q));
  }
}

TEST_CASE("gate rows are positive, normalized, and distance-monotone") {
  Rng rng(37);
  for (int trial = 0; trial < 500; ++trial) {
    const int batch = 1 + static_cast<int>(rng.below(4));
    const int k = 2 + static_cast<int>(rng.below(4));
    const int d = 1 + static_cast<int>(rng.below(4));
    const double eps = std::pow(10.0, rng.uniform(-10.0, -3.0));
    Tensor v = random_tensor({batch, d}, rng, rng.uniform(0.1, 5.0));
    Tensor e = random_tensor({k, d}, rng, rng.uniform(0.1, 5.0));
    Tape tape;
    GateDistribution g = gates_of(tape, v, e, eps);
    const Tensor p = g.probabilities();
    for (int r = 0; r < batch; ++r) {
      double sum = 0.0;
      for (int c = 0; c < k; ++c) {
        CHECK(p.at(r, c) > 0.0);
        sum += p.at(r, c);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
          if (g.d.at(r, i) < g.d.at(r, j)) CHECK(p.at(r, i) > p.at(r, j));
    }
  }
}

TEST_CASE("entropy gradients reach both the encoder output and the embeddings") {
  Rng rng(41);
  Tensor v = random_tensor({4, 3}, rng);
  Tensor e = random_tensor({3, 3}, rng);
  Tape tape;
  GateDistribution g = gate_values(tape, tape.param(v), tape.param(e), 1e-8);
  tape.backward(entropy_loss(g));
  double vn = 0.0, en = 0.0;
  for (double x : v.grad()) vn += x * x;
  for (double x : e.grad()) en += x * x;
  CHECK(vn > 0.0);
  CHECK(en > 0.0);
}

TEST_CASE("importance sums gate mass per expert") {
  Tensor p({2, 3}, {0.5, 0.3, 0.2, 0.1, 0.6, 0.3});
  const ImportanceVector iv = importance_of(p);
  CHECK(iv.importance[0] == doctest::Approx(0.6));
  CHECK(iv.importance[1] == doctest::Approx(0.9));
  CHECK(iv.importance[2] == doctest::Approx(0.5));
  CHECK(iv.share[1] == doctest::Approx(0.45));
}
