#pragma once

#include <vector>

#include "hmoe/autodiff.hpp"
#include "hmoe/rng.hpp"
#include "hmoe/tensor.hpp"

namespace hmoe {

/// K learnable routing anchors of dimension D, stored as one [K x D]
/// tensor. They double as the hypernetwork's conditioning vectors.
struct EmbeddingSpace {
  Tensor vectors;  // [K x D]

  int experts() const { return vectors.rows(); }
  int dimension() const { return vectors.cols(); }

  /// Standard-normal initialization.
  static EmbeddingSpace init(int k, int d, Rng& rng);
};

/// Per-example routing distribution. p and s stay on the tape (gradients
/// flow through them); d holds the plain Euclidean distances for
/// reporting.
struct GateDistribution {
  Value p;   // [B x K] probabilities
  Value s;   // [B x K] scores, -log(d^2 + eps)
  Tensor d;  // [B x K] distances

  Tensor probabilities() const { return p.tensor(); }
};

/// Distance-based gate: d_k = ||v - e_k||, s_k = -log(d_k^2 + eps),
/// p = row softmax of s. Smaller distance always means a larger gate
/// value.
GateDistribution gate_values(Tape& tape, Value v, Value embeddings, double eps);

/// Mean Shannon entropy (nats) of the gate rows; zero exactly at one-hot
/// routing.
Value entropy_loss(const GateDistribution& g);

/// KL divergence between the batch importance distribution (normalized
/// column mass of p) and uniform; zero iff the load is balanced.
Value kl_balance(const GateDistribution& g);

/// Entropy-weight schedule: ramps linearly to 1 over the first half of
/// training, then stays at 1.
double gamma_en(double pct_tr);

/// Gradient-reversal weight schedule: 2 / (1 + exp(-10 * pct)) - 1.
double lambda_grl(double pct_tr);

struct ScheduleState {
  double pct_tr = 0.0;
  double gamma_en = 0.0;
  double lambda_grl = 0.0;
};

ScheduleState make_schedule(double pct_tr);

/// Argmax cluster per gate row; ties break toward the lowest index.
std::vector<int> assign_cluster(const Tensor& probs);

/// Per-expert summed gate mass of one batch and its normalized form.
struct ImportanceVector {
  Tensor importance;  // [K]
  Tensor share;       // [K], importance / sum
};

ImportanceVector importance_of(const Tensor& probs);

}  // namespace hmoe
