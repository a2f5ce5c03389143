#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmoe/data.hpp"
#include "hmoe/losses.hpp"
#include "hmoe/model.hpp"

namespace hmoe {

enum class Variant { DL, ND, MU };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

struct TrainOptions {
  Variant variant = Variant::ND;
  int steps = 1000;
  double lr = 1e-3;
  int batch_size = 0;  // 0 (or >= pool size) runs the full pool in order
  int eval_interval = 100;
  LossWeights weights;
  double mixup_alpha = 0.3;
  double switch_threshold = 0.1;
  double ema_momentum = 0.9;
  std::uint64_t seed = 0;
};

struct StepLog {
  int step = 0;
  LossBreakdown parts;
  SupervisionMode mode = SupervisionMode::Erm;
  double val_metric = 0.0;
  bool has_val = false;
};

struct TrainResult {
  std::vector<StepLog> history;
  Tensor final_importance;  // per-expert gate mass of the last batch
  int switch_step = -1;     // first mixup step, -1 when never switched
};

/// Validation metric of the MIX prediction: MSE for regression, accuracy
/// for classification.
double evaluate_mix(HmoeModel& model, const Dataset& data);

/// The training loop: scheduled entropy/GRL weights, Adam updates, the
/// latched ERM-to-mixup switch on the smoothed entropy value, and
/// periodic evaluation (against `val`, or against `train` when the
/// validation set is empty). Aborts with EvalError if the loss leaves the
/// finite range.
TrainResult run_training(HmoeModel& model, const Dataset& train, const Dataset& val,
                         const TrainOptions& opts);

}  // namespace hmoe
