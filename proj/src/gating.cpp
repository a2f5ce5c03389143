#include "hmoe/gating.hpp"

#include <cmath>

#include "hmoe/errors.hpp"

namespace hmoe {

EmbeddingSpace EmbeddingSpace::init(int k, int d, Rng& rng) {
  if (k < 1 || d < 1) throw ConfigError("embedding space needs k >= 1 and d >= 1");
  EmbeddingSpace e;
  e.vectors = Tensor({k, d});
  for (std::int64_t i = 0; i < e.vectors.size(); ++i) e.vectors[i] = rng.normal();
  return e;
}

GateDistribution gate_values(Tape& tape, Value v, Value embeddings, double eps) {
  if (eps <= 0.0) throw ContractError("gate eps must be positive");
  if (v.tape() != &tape || embeddings.tape() != &tape)
    throw ContractError("gate_values operands live on a different tape");
  if (v.shape().size() != 2 || embeddings.shape().size() != 2 ||
      v.shape()[1] != embeddings.shape()[1])
    throw DimensionError("encoder output and embeddings must share the embedding dimension");
  GateDistribution g;
  Value sq = sqdist_rows(v, embeddings);
  g.s = neg(log(add_scalar(sq, eps)));
  g.p = softmax_rows(g.s);
  g.d = sq.tensor();
  for (std::int64_t i = 0; i < g.d.size(); ++i) g.d[i] = std::sqrt(g.d[i]);
  return g;
}

Value entropy_loss(const GateDistribution& g) { return mean_row_entropy(g.p); }

Value kl_balance(const GateDistribution& g) { return kl_balance_uniform(g.p); }

double gamma_en(double pct_tr) {
  if (pct_tr < 0.0 || pct_tr > 1.0) throw ContractError("pct_tr must lie in [0, 1]");
  return std::min(2.0 * pct_tr, 1.0);
}

double lambda_grl(double pct_tr) {
  if (pct_tr < 0.0 || pct_tr > 1.0) throw ContractError("pct_tr must lie in [0, 1]");
  return 2.0 / (1.0 + std::exp(-10.0 * pct_tr)) - 1.0;
}

ScheduleState make_schedule(double pct_tr) {
  return ScheduleState{pct_tr, gamma_en(pct_tr), lambda_grl(pct_tr)};
}

std::vector<int> assign_cluster(const Tensor& probs) {
  if (probs.rank() != 2) throw DimensionError("gate probabilities must be rank 2");
  std::vector<int> out(static_cast<size_t>(probs.rows()));
  for (int r = 0; r < probs.rows(); ++r) {
    int best = 0;
    for (int c = 1; c < probs.cols(); ++c)
      if (probs.at(r, c) > probs.at(r, best)) best = c;
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

ImportanceVector importance_of(const Tensor& probs) {
  if (probs.rank() != 2) throw DimensionError("gate probabilities must be rank 2");
  const int k = probs.cols();
  ImportanceVector iv;
  iv.importance = Tensor({k});
  for (int r = 0; r < probs.rows(); ++r)
    for (int c = 0; c < k; ++c) iv.importance[c] += probs.at(r, c);
  double total = 0.0;
  for (int c = 0; c < k; ++c) total += iv.importance[c];
  iv.share = Tensor({k});
  for (int c = 0; c < k; ++c) iv.share[c] = iv.importance[c] / total;
  return iv;
}

}  // namespace hmoe
