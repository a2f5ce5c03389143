#include "hmoe/losses.hpp"

#include <algorithm>
#include <map>

#include "hmoe/errors.hpp"

namespace hmoe {

Batch batch_from(const Dataset& data, const std::vector<int>& indices) {
  Batch b;
  if (indices.empty()) return b;
  const int dim = data.x.cols();
  b.x = Tensor({static_cast<int>(indices.size()), dim});
  for (size_t r = 0; r < indices.size(); ++r) {
    const int src = indices[r];
    for (int c = 0; c < dim; ++c) b.x.at(static_cast<int>(r), c) = data.x.at(src, c);
    if (!data.y_reg.empty()) b.y_reg.push_back(data.y_reg[static_cast<size_t>(src)]);
    if (!data.y_cls.empty()) b.y_cls.push_back(data.y_cls[static_cast<size_t>(src)]);
    if (!data.domain.empty()) b.domain.push_back(data.domain[static_cast<size_t>(src)]);
  }
  b.num_domains = data.num_domains;
  return b;
}

Batch batch_all(const Dataset& data) {
  std::vector<int> idx(static_cast<size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) idx[static_cast<size_t>(i)] = i;
  return batch_from(data, idx);
}

ModelPass model_forward(Tape& tape, HmoeModel& model, const Tensor& x) {
  ModelPass pass;
  pass.z = model.features(tape, x);
  pass.v = model.encode(tape, x);
  pass.gate = model.gate(tape, pass.v);
  pass.theta = model.generate_weights(tape);
  pass.mix = model.mix_output(tape, pass.z, pass.gate, pass.theta);
  return pass;
}

Value task_loss(Value mix, HmoeModel& model, const Batch& batch) {
  if (model.spec().task == TaskKind::Classification)
    return cross_entropy_logits(mix, batch.y_cls);
  Tensor target({batch.size(), 1});
  for (int i = 0; i < batch.size(); ++i) target.at(i, 0) = batch.y_reg[static_cast<size_t>(i)];
  return mse(mix, target);
}

Value erm_loss(Tape& tape, HmoeModel& model, const Batch& batch) {
  if (batch.size() == 0) throw ContractError("erm_loss requires a non-empty batch");
  ModelPass pass = model_forward(tape, model, batch.x);
  return task_loss(pass.mix, model, batch);
}

namespace {

// Group row indices by part id, parts ordered by id, non-empty only.
std::vector<std::vector<int>> partition_rows(const std::vector<int>& part_of) {
  std::map<int, std::vector<int>> groups;
  for (size_t i = 0; i < part_of.size(); ++i) groups[part_of[i]].push_back(static_cast<int>(i));
  std::vector<std::vector<int>> out;
  out.reserve(groups.size());
  for (auto& [id, rows] : groups) out.push_back(std::move(rows));
  return out;
}

Value mixup_over_parts(Tape& tape, HmoeModel& model, const Batch& batch,
                       const std::vector<std::vector<int>>& parts, double alpha, Rng& rng,
                       std::optional<double> beta_override) {
  const bool classify = model.spec().task == TaskKind::Classification;
  const int dim = batch.x.cols();
  const int classes = model.spec().num_outputs;
  Value acc;
  for (const std::vector<int>& rows : parts) {
    const int m = static_cast<int>(rows.size());
    const double beta = beta_override ? *beta_override : rng.beta(alpha, alpha);
    const std::vector<int> perm = rng.permutation(m);
    Tensor mixed({m, dim});
    Tensor soft;  // classification targets
    std::vector<double> yreg;
    if (classify) soft = Tensor({m, classes});
    for (int i = 0; i < m; ++i) {
      const int a = rows[static_cast<size_t>(i)];
      const int b = rows[static_cast<size_t>(perm[static_cast<size_t>(i)])];
      for (int c = 0; c < dim; ++c)
        mixed.at(i, c) = beta * batch.x.at(a, c) + (1.0 - beta) * batch.x.at(b, c);
      if (classify) {
        soft.at(i, batch.y_cls[static_cast<size_t>(a)]) += beta;
        soft.at(i, batch.y_cls[static_cast<size_t>(b)]) += 1.0 - beta;
      } else {
        yreg.push_back(beta * batch.y_reg[static_cast<size_t>(a)] +
                       (1.0 - beta) * batch.y_reg[static_cast<size_t>(b)]);
      }
    }
    ModelPass pass = model_forward(tape, model, mixed);
    Value part_loss;
    if (classify) {
      part_loss = cross_entropy_logits(pass.mix, soft);
    } else {
      Tensor target({m, 1}, std::move(yreg));
      part_loss = mse(pass.mix, target);
    }
    acc = acc.valid() ? add(acc, part_loss) : part_loss;
  }
  return scale(acc, 1.0 / static_cast<double>(parts.size()));
}

}  // namespace

Value intra_domain_mixup_loss(Tape& tape, HmoeModel& model, const Batch& batch, double alpha,
                              Rng& rng, std::optional<double> beta_override) {
  if (batch.size() == 0) throw ContractError("mixup requires a non-empty batch");
  if (alpha <= 0.0) throw ConfigError("mixup alpha must be positive");
  std::vector<int> part_of;
  if (!batch.domain.empty()) {
    part_of = batch.domain;
  } else {
    // Cluster by gate values from a side pass; the partition itself is
    // discrete, so it does not need to live on the caller's tape.
    Tape side;
    Value v = model.encode(side, batch.x);
    GateDistribution g = model.gate(side, v);
    part_of = assign_cluster(g.p.tensor());
  }
  return mixup_over_parts(tape, model, batch, partition_rows(part_of), alpha, rng, beta_override);
}

Value domain_loss(const GateDistribution& gate, const std::vector<int>& domain, int num_domains) {
  const Tensor& p = gate.p.tensor();
  if (num_domains > p.cols())
    throw DataError("domain count exceeds the number of experts");
  for (int d : domain)
    if (d < 0 || d >= num_domains) throw DataError("domain index out of range");
  return nll_rows(gate.p, domain);
}

Value adversarial_loss(Tape& tape, HmoeModel& model, const Batch& batch, double lambda) {
  if (model.spec().task != TaskKind::Classification)
    throw ContractError("adversarial loss requires a classification task");
  Value v = model.encode(tape, batch.x);
  Value logits = model.adversary_logits(tape, v, lambda);
  return cross_entropy_logits(logits, batch.y_cls);
}

TotalLoss total_loss(Tape& tape, HmoeModel& model, const Batch& batch, const LossWeights& weights,
                     const ScheduleState& sched, SupervisionMode mode, double mixup_alpha,
                     Rng& mixup_rng, std::optional<double> beta_override) {
  if (batch.size() == 0) throw ContractError("total_loss requires a non-empty batch");
  ModelPass pass = model_forward(tape, model, batch.x);

  TotalLoss result;
  result.parts.importance = importance_of(pass.gate.p.tensor()).importance;
  Value total;
  auto accumulate = [&](Value term, double weight, double& raw, double& weighted) {
    raw = term.scalar();
    weighted = weight * raw;
    Value scaled = scale(term, weight);
    total = total.valid() ? add(total, scaled) : scaled;
  };

  if (weights.lambda_y > 0.0) {
    Value ly;
    if (mode == SupervisionMode::Mixup) {
      std::vector<int> part_of = !batch.domain.empty()
                                     ? batch.domain
                                     : assign_cluster(pass.gate.p.tensor());
      ly = mixup_over_parts(tape, model, batch, partition_rows(part_of), mixup_alpha, mixup_rng,
                            beta_override);
    } else {
      ly = task_loss(pass.mix, model, batch);
    }
    accumulate(ly, weights.lambda_y, result.parts.ly, result.parts.wy);
  }
  // Entropy and balance values are always recorded (the mixup switch and
  // the metric log read them) even when their weights are zero.
  {
    Value len_v = entropy_loss(pass.gate);
    if (weights.lambda_en > 0.0) {
      accumulate(len_v, weights.lambda_en * sched.gamma_en, result.parts.len, result.parts.wen);
    } else {
      result.parts.len = len_v.scalar();
    }
  }
  {
    Value lkl_v = kl_balance(pass.gate);
    if (weights.lambda_kl > 0.0) {
      accumulate(lkl_v, weights.lambda_kl, result.parts.lkl, result.parts.wkl);
    } else {
      result.parts.lkl = lkl_v.scalar();
    }
  }
  if (weights.lambda_ad > 0.0) {
    Value logits = model.adversary_logits(tape, pass.v, sched.lambda_grl);
    accumulate(cross_entropy_logits(logits, batch.y_cls), weights.lambda_ad, result.parts.lad,
               result.parts.wad);
  }
  if (weights.lambda_d > 0.0) {
    if (batch.domain.empty()) throw DataError("the domain loss requires domain annotations");
    accumulate(domain_loss(pass.gate, batch.domain, batch.num_domains), weights.lambda_d,
               result.parts.ld, result.parts.wd);
  }

  if (!total.valid()) total = tape.constant(Tensor::scalar(0.0));
  result.value = total;
  result.parts.total = total.scalar();
  return result;
}

}  // namespace hmoe
