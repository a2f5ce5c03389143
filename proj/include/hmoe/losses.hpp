#pragma once

#include <optional>
#include <vector>

#include "hmoe/autodiff.hpp"
#include "hmoe/data.hpp"
#include "hmoe/gating.hpp"
#include "hmoe/model.hpp"
#include "hmoe/rng.hpp"

namespace hmoe {

struct LossWeights {
  double lambda_y = 1.0;
  double lambda_en = 0.0;
  double lambda_kl = 0.0;
  double lambda_ad = 0.0;
  double lambda_d = 0.0;
};

/// One batch: inputs plus task targets; domain holds annotation indices
/// when the supervised domain loss participates.
struct Batch {
  Tensor x;
  std::vector<double> y_reg;
  std::vector<int> y_cls;
  std::vector<int> domain;
  int num_domains = 0;
  int size() const { return x.empty() ? 0 : x.rows(); }
};

Batch batch_from(const Dataset& data, const std::vector<int>& indices);
Batch batch_all(const Dataset& data);

/// Everything one pass of the model produces for a batch.
struct ModelPass {
  Value z;
  Value v;
  GateDistribution gate;
  GeneratedWeights theta;
  Value mix;
};

ModelPass model_forward(Tape& tape, HmoeModel& model, const Tensor& x);

/// Task loss of a MIX prediction: cross-entropy for classification, MSE
/// for regression.
Value task_loss(Value mix, HmoeModel& model, const Batch& batch);

/// Empirical risk of the gate-weighted prediction over the batch.
Value erm_loss(Tape& tape, HmoeModel& model, const Batch& batch);

/// Intra-cluster mixup risk: partition the batch by domain labels when
/// present, otherwise by argmax gate cluster; mix each part against a
/// shuffled copy of itself with one Beta(alpha, alpha) draw per part, and
/// average the per-part risks. beta_override pins the mixing coefficient
/// for tests.
Value intra_domain_mixup_loss(Tape& tape, HmoeModel& model, const Batch& batch, double alpha,
                              Rng& rng, std::optional<double> beta_override = std::nullopt);

/// Mean cross-entropy of the gate rows against domain indices occupying
/// the first num_domains expert slots.
Value domain_loss(const GateDistribution& gate, const std::vector<int>& domain, int num_domains);

/// Class cross-entropy of the adversarial head on the reversed encoder
/// output.
Value adversarial_loss(Tape& tape, HmoeModel& model, const Batch& batch, double lambda);

enum class SupervisionMode { Erm, Mixup };

struct LossBreakdown {
  double ly = 0.0, len = 0.0, lkl = 0.0, lad = 0.0, ld = 0.0;  // raw values
  double wy = 0.0, wen = 0.0, wkl = 0.0, wad = 0.0, wd = 0.0;  // weighted contributions
  double total = 0.0;
  Tensor importance;  // per-expert gate mass of this batch
};

struct TotalLoss {
  Value value;
  LossBreakdown parts;
};

/// Weighted sum of all active losses over a single shared forward pass;
/// the entropy term is additionally scaled by the gamma_en schedule and
/// the adversarial term uses the scheduled GRL weight. Absent terms
/// contribute exactly zero.
TotalLoss total_loss(Tape& tape, HmoeModel& model, const Batch& batch, const LossWeights& weights,
                     const ScheduleState& sched, SupervisionMode mode, double mixup_alpha,
                     Rng& mixup_rng, std::optional<double> beta_override = std::nullopt);

}  // namespace hmoe
