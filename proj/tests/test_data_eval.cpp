#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include "hmoe/data.hpp"
#include "hmoe/errors.hpp"
#include "hmoe/metrics.hpp"
#include "helpers.hpp"

using namespace hmoe;
using hmoe::testing::bitwise_equal;

TEST_CASE("toy regression set matches its construction") {
  Dataset ds = gen_toy_regression(5);
  REQUIRE(ds.size() == 60);
  const std::array<int, 3> expected_counts{10, 20, 30};
  std::array<int, 3> counts{0, 0, 0};
  const double lo[3] = {0.0, 1.0, 2.0};
  for (int i = 0; i < ds.size(); ++i) {
    const int d = ds.domain[static_cast<size_t>(i)];
    ++counts[static_cast<size_t>(d)];
    const double x = ds.x.at(i, 0);
    CHECK(x > lo[d]);
    CHECK(x < lo[d] + 0.5);
    CHECK(ds.y_reg[static_cast<size_t>(i)] == std::sin(4.0 * M_PI * x));
  }
  CHECK(counts == expected_counts);

  Dataset again = gen_toy_regression(5);
  CHECK(bitwise_equal(ds.x, again.x));
  Dataset other = gen_toy_regression(6);
  CHECK_FALSE(bitwise_equal(ds.x, other.x));
}

TEST_CASE("synthetic generator is deterministic and single-domain degenerates") {
  SyntheticSpec one;
  one.domains = 1;
  one.n_per = 5;
  Dataset single = gen_synthetic_domains(one, 3);
  for (int d : single.domain) CHECK(d == 0);

  SyntheticSpec spec;
  spec.n_per = 20;
  Dataset a = gen_synthetic_domains(spec, 9);
  Dataset b = gen_synthetic_domains(spec, 9);
  CHECK(bitwise_equal(a.x, b.x));
  CHECK(a.y_cls == b.y_cls);
}

TEST_CASE("well separated synthetic domains are recovered by nearest centroid") {
  SyntheticSpec spec;
  spec.domains = 3;
  spec.n_per = 50;
  spec.separation = 10.0;
  Dataset ds = gen_synthetic_domains(spec, 1);

  const int dim = ds.dim();
  std::vector<std::vector<double>> centroid(3, std::vector<double>(static_cast<size_t>(dim), 0.0));
  std::vector<int> count(3, 0);
  for (int i = 0; i < ds.size(); ++i) {
    const int d = ds.domain[static_cast<size_t>(i)];
    ++count[static_cast<size_t>(d)];
    for (int j = 0; j < dim; ++j) centroid[static_cast<size_t>(d)][static_cast<size_t>(j)] += ds.x.at(i, j);
  }
  for (int d = 0; d < 3; ++d)
    for (int j = 0; j < dim; ++j) centroid[static_cast<size_t>(d)][static_cast<size_t>(j)] /= count[static_cast<size_t>(d)];

  std::vector<int> assigned(static_cast<size_t>(ds.size()));
  for (int i = 0; i < ds.size(); ++i) {
    double best = 1e300;
    int arg = 0;
    for (int d = 0; d < 3; ++d) {
      double acc = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double diff = ds.x.at(i, j) - centroid[static_cast<size_t>(d)][static_cast<size_t>(j)];
        acc += diff * diff;
      }
      if (acc < best) {
        best = acc;
        arg = d;
      }
    }
    assigned[static_cast<size_t>(i)] = arg;
  }
  CHECK(cluster_purity(assigned, ds.domain) >= 0.99);
}

TEST_CASE("per-domain split proportions and disjointness") {
  {
    SyntheticSpec spec;
    spec.domains = 1;
    spec.classes = 2;
    spec.n_per = 5;  // 10 examples in one domain
    Dataset ds = gen_synthetic_domains(spec, 2);
    auto [train, val] = split_train_val(ds, SplitSpec{0.8, 7});
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);
  }
  {
    Dataset toy = gen_toy_regression(11);  // domains sized 10, 20, 30
    auto [train, val] = split_train_val(toy, SplitSpec{0.8, 7});
    std::array<int, 3> train_counts{0, 0, 0};
    for (int d : train.domain) ++train_counts[static_cast<size_t>(d)];
    CHECK(train_counts == std::array<int, 3>{8, 16, 24});
    CHECK(train.size() + val.size() == toy.size());

    // Union equals the input, intersection is empty: match rows by x.
    std::vector<double> seen;
    for (int i = 0; i < train.size(); ++i) seen.push_back(train.x.at(i, 0));
    for (int i = 0; i < val.size(); ++i) seen.push_back(val.x.at(i, 0));
    std::sort(seen.begin(), seen.end());
    std::vector<double> all;
    for (int i = 0; i < toy.size(); ++i) all.push_back(toy.x.at(i, 0));
    std::sort(all.begin(), all.end());
    CHECK(seen == all);
  }
}

TEST_CASE("silhouette of two tight far-apart pairs is near 1") {
  const double eps = 0.01;
  Tensor pts({4, 2}, {0, 0, 0, eps, 10, 10, 10, 10 + eps});
  const std::vector<int> labels{0, 0, 1, 1};
  const double sc = silhouette(pts, labels);
  CHECK(sc > 0.99);

  // Independent four-point evaluation of the same formula.
  auto d = [&](int i, int j) {
    const double dx = pts.at(i, 0) - pts.at(j, 0);
    const double dy = pts.at(i, 1) - pts.at(j, 1);
    return std::sqrt(dx * dx + dy * dy);
  };
  double expect = 0.0;
  const int mate[4] = {1, 0, 3, 2};
  for (int i = 0; i < 4; ++i) {
    const double a = d(i, mate[i]);
    const int o0 = i < 2 ? 2 : 0;
    const double b = (d(i, o0) + d(i, o0 + 1)) / 2.0;
    expect += (b - a) / std::max(a, b);
  }
  expect /= 4.0;
  CHECK(sc == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("silhouette of coincident points is zero and needs two clusters") {
  Tensor pts = Tensor::zeros({6, 2});
  CHECK(silhouette(pts, {0, 0, 0, 1, 1, 1}) == 0.0);
  CHECK_THROWS_AS(silhouette(pts, {0, 0, 0, 0, 0, 0}), EvalError);
}

TEST_CASE("interleaving one blob into two clusters scores near zero") {
  Rng rng(15);
  Tensor pts({20, 2});
  for (std::int64_t i = 0; i < pts.size(); ++i) pts[i] = rng.normal();
  std::vector<int> labels(20);
  for (int i = 0; i < 20; ++i) labels[static_cast<size_t>(i)] = i % 2;
  CHECK(silhouette(pts, labels) <= 0.1);
}

TEST_CASE("silhouette is invariant under isometries and uniform scaling") {
  Rng rng(21);
  Tensor pts({12, 2});
  for (std::int64_t i = 0; i < pts.size(); ++i) pts[i] = rng.normal();
  std::vector<int> labels(12);
  for (int i = 0; i < 12; ++i) labels[static_cast<size_t>(i)] = i < 5 ? 0 : (i < 9 ? 1 : 2);
  const double base = silhouette(pts, labels);
  for (int trial = 0; trial < 20; ++trial) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const double scale = rng.uniform(0.1, 10.0);
    const double tx = rng.uniform(-5.0, 5.0), ty = rng.uniform(-5.0, 5.0);
    Tensor moved({12, 2});
    for (int i = 0; i < 12; ++i) {
      const double x = pts.at(i, 0), y = pts.at(i, 1);
      moved.at(i, 0) = scale * (std::cos(theta) * x - std::sin(theta) * y) + tx;
      moved.at(i, 1) = scale * (std::sin(theta) * x + std::cos(theta) * y) + ty;
    }
    CHECK(silhouette(moved, labels) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("cluster purity counts majorities and ignores label names") {
  CHECK(cluster_purity({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(cluster_purity({0, 0, 0, 0}, {0, 0, 1, 1}) == 0.5);
  CHECK(cluster_purity({0, 0, 1, 1}, {0, 1, 1, 1}) == 0.75);
  // Relabeling predicted ids leaves purity unchanged.
  CHECK(cluster_purity({5, 5, 9, 9}, {0, 1, 1, 1}) == 0.75);
  CHECK_THROWS_AS(cluster_purity({0, 1}, {0}), ContractError);
}

TEST_CASE("accuracy") {
  CHECK(accuracy({3, 1, 2}, {3, 1, 2}) == 1.0);
  CHECK(accuracy({0, 0}, {1, 1}) == 0.0);
  CHECK(accuracy({0, 1, 2}, {0, 1, 0}) == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(accuracy({0}, {0, 1}), ContractError);
}

TEST_CASE("dataset csv round trip is exact") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hmoe_data_test";
  fs::create_directories(dir);

  Dataset toy = gen_toy_regression(33);
  const std::string toy_path = (dir / "toy.csv").string();
  save_dataset_csv(toy, toy_path);
  Dataset toy_back = load_dataset_csv(toy_path, TaskKind::Regression);
  REQUIRE(toy_back.size() == toy.size());
  CHECK(bitwise_equal(toy.x, toy_back.x));
  CHECK(toy.y_reg == toy_back.y_reg);
  CHECK(toy.domain == toy_back.domain);

  SyntheticSpec spec;
  spec.n_per = 4;
  Dataset syn = gen_synthetic_domains(spec, 33);
  const std::string syn_path = (dir / "syn.csv").string();
  save_dataset_csv(syn, syn_path);
  Dataset syn_back = load_dataset_csv(syn_path, TaskKind::Classification);
  CHECK(bitwise_equal(syn.x, syn_back.x));
  CHECK(syn.y_cls == syn_back.y_cls);
  CHECK(syn_back.num_classes == spec.classes);
  fs::remove_all(dir);
}
