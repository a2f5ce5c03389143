#include "hmoe/train.hpp"

#include <cmath>
#include <sstream>

#include "hmoe/errors.hpp"
#include "hmoe/metrics.hpp"
#include "hmoe/optim.hpp"

namespace hmoe {

Variant variant_from_string(const std::string& name) {
  if (name == "DL") return Variant::DL;
  if (name == "ND") return Variant::ND;
  if (name == "MU") return Variant::MU;
  throw ConfigError("unknown variant: " + name);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::DL: return "DL";
    case Variant::ND: return "ND";
    default: return "MU";
  }
}

double evaluate_mix(HmoeModel& model, const Dataset& data) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  Prediction pred = predict_mix(model, data.x);
  if (model.spec().task == TaskKind::Regression) return mse_metric(pred.output, data.y_reg);
  return accuracy(argmax_rows(pred.output), data.y_cls);
}

namespace {

std::vector<int> sample_batch(int pool, int batch_size, Rng& rng) {
  std::vector<int> idx;
  if (batch_size <= 0 || batch_size >= pool) {
    idx.resize(static_cast<size_t>(pool));
    for (int i = 0; i < pool; ++i) idx[static_cast<size_t>(i)] = i;
  } else {
    idx.resize(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i)
      idx[static_cast<size_t>(i)] = static_cast<int>(rng.below(pool));
  }
  return idx;
}

std::string snapshot(int step, const LossBreakdown& p) {
  std::ostringstream os;
  os << "step " << step << ": L_y=" << p.ly << " L_en=" << p.len << " L_kl=" << p.lkl
     << " L_ad=" << p.lad << " L_d=" << p.ld << " total=" << p.total;
  return os.str();
}

}  // namespace

TrainResult run_training(HmoeModel& model, const Dataset& train, const Dataset& val,
                         const TrainOptions& opts) {
  if (train.size() == 0) throw DataError("cannot train on an empty dataset");
  if (opts.steps < 0) throw ConfigError("steps must be non-negative");
  if (opts.variant == Variant::MU && opts.mixup_alpha <= 0.0)
    throw ConfigError("the MU variant requires mixup_alpha > 0");

  TrainResult result;
  if (opts.steps == 0) return result;

  std::vector<Tensor*> params = model.parameters();
  AdamOptimizer optimizer(params, AdamConfig{opts.lr, 0.9, 0.999, 1e-8});
  Rng shuffle_rng(opts.seed, "shuffle");
  Rng mixup_rng(opts.seed, "mixup");
  const Dataset& eval_set = val.size() > 0 ? val : train;
  const bool keep_domain = opts.weights.lambda_d > 0.0;

  SupervisionMode mode = SupervisionMode::Erm;
  double ema = 0.0;
  bool ema_ready = false;

  result.history.reserve(static_cast<size_t>(opts.steps));
  for (int step = 0; step < opts.steps; ++step) {
    const double pct = opts.steps > 1 ? static_cast<double>(step) / (opts.steps - 1) : 1.0;
    const ScheduleState sched = make_schedule(pct);

    Batch batch = batch_from(train, sample_batch(train.size(), opts.batch_size, shuffle_rng));
    if (!keep_domain) batch.domain.clear();

    model.zero_grads();
    Tape tape;
    TotalLoss loss =
        total_loss(tape, model, batch, opts.weights, sched, mode, opts.mixup_alpha, mixup_rng);
    if (!std::isfinite(loss.parts.total))
      throw EvalError("training aborted on a non-finite loss at " + snapshot(step, loss.parts));
    tape.backward(loss.value);
    optimizer.step(params);

    StepLog log;
    log.step = step;
    log.parts = loss.parts;
    log.mode = mode;

    // Latched switch: once the smoothed entropy falls below the
    // threshold, every later step uses the mixup risk.
    if (opts.variant == Variant::MU && mode == SupervisionMode::Erm) {
      ema = ema_ready ? opts.ema_momentum * ema + (1.0 - opts.ema_momentum) * loss.parts.len
                      : loss.parts.len;
      ema_ready = true;
      if (ema < opts.switch_threshold) {
        mode = SupervisionMode::Mixup;
        result.switch_step = step + 1;
      }
    }

    if ((step + 1) % opts.eval_interval == 0 || step == opts.steps - 1) {
      log.val_metric = evaluate_mix(model, eval_set);
      log.has_val = true;
    }
    result.history.push_back(log);
  }
  result.final_importance = result.history.back().parts.importance;
  return result;
}

}  // namespace hmoe
