#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hmoe/losses.hpp"
#include "hmoe/model.hpp"
#include "hmoe/train.hpp"

namespace hmoe {

/// Fully-resolved experiment configuration. Built from a flat key=value
/// map (file plus command-line overrides, overrides winning) with
/// task/variant-dependent defaults filled in; unknown keys are rejected.
struct ExperimentConfig {
  std::string task = "toy_regression";  // toy_regression | synthetic_dg
  Variant variant = Variant::ND;
  std::uint64_t seed = 0;
  int steps = 0;
  double lr = 1e-3;
  int batch_size = 0;
  int eval_interval = 100;
  std::string out_dir = "hmoe_run";

  int num_experts = 3;
  int embed_dim = 8;
  int feature_dim = 32;
  std::vector<int> featurizer_hidden;
  std::vector<int> encoder_hidden;
  std::vector<int> classifier_hidden;
  std::vector<int> hyper_hidden;
  std::vector<int> adversarial_hidden;
  double gate_eps = 1e-8;

  LossWeights weights;
  double mixup_alpha = 0.3;
  double switch_threshold = 0.1;

  std::string data_file;  // optional CSV; generated data otherwise
  int data_domains = 3;
  int data_classes = 3;
  int data_n_per = 100;
  double data_separation = 10.0;
  int data_dim = 16;
  double train_fraction = 1.0;

  TaskKind task_kind() const;
  ModelSpec model_spec(int input_dim, int num_outputs) const;
  TrainOptions train_options() const;
};

using KvMap = std::map<std::string, std::string>;

/// Parse a flat `key = value` file (# comments, blank lines allowed).
KvMap read_config_file(const std::string& path);

/// Apply `key=value` override strings on top of a map.
void apply_overrides(KvMap& kv, const std::vector<std::string>& overrides);

/// Resolve a key map into a full configuration; throws ConfigError naming
/// the offending key for unknown keys, type errors, and constraint
/// violations.
ExperimentConfig resolve_config(const KvMap& kv);

/// The resolved configuration as a flat key=value map (stable order),
/// used to embed it in summaries.
std::map<std::string, std::string> config_to_map(const ExperimentConfig& config);

}  // namespace hmoe
