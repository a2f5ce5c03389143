#include "hmoe/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <tuple>

#include <json.hpp>

#include "hmoe/errors.hpp"
#include "hmoe/metrics.hpp"
#include "hmoe/train.hpp"

namespace hmoe {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset build_dataset(const ExperimentConfig& config) {
  if (!config.data_file.empty()) {
    Dataset ds = load_dataset_csv(config.data_file, config.task_kind());
    if (ds.size() == 0) throw DataError("dataset file holds no examples: " + config.data_file);
    return ds;
  }
  if (config.task == "toy_regression") return gen_toy_regression(config.seed);
  SyntheticSpec spec;
  spec.domains = config.data_domains;
  spec.classes = config.data_classes;
  spec.n_per = config.data_n_per;
  spec.separation = config.data_separation;
  spec.dim = config.data_dim;
  return gen_synthetic_domains(spec, config.seed);
}

void write_metrics_csv(const std::string& path, const std::vector<StepLog>& history) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open metrics file for writing: " + path);
  os << "step,L_y,L_en,L_kl,L_ad,L_d,total,mode,val_metric\n";
  for (const StepLog& log : history) {
    os << log.step << ',' << fmt17(log.parts.ly) << ',' << fmt17(log.parts.len) << ','
       << fmt17(log.parts.lkl) << ',' << fmt17(log.parts.lad) << ',' << fmt17(log.parts.ld) << ','
       << fmt17(log.parts.total) << ','
       << (log.mode == SupervisionMode::Mixup ? "mixup" : "erm") << ',';
    if (log.has_val) os << fmt17(log.val_metric);
    os << '\n';
  }
  if (!os) throw IoError("failed writing metrics file: " + path);
}

void write_gate_csv(const std::string& path, const Tensor& probs,
                    const std::vector<int>& clusters) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open gate dump for writing: " + path);
  os << "id,cluster";
  for (int k = 0; k < probs.cols(); ++k) os << ",p_" << k;
  os << '\n';
  for (int i = 0; i < probs.rows(); ++i) {
    os << i << ',' << clusters[static_cast<size_t>(i)];
    for (int k = 0; k < probs.cols(); ++k) os << ',' << fmt17(probs.at(i, k));
    os << '\n';
  }
}

void write_encoder_csv(const std::string& path, const Tensor& outputs,
                       const std::vector<int>& clusters, const std::vector<int>& domains) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open encoder dump for writing: " + path);
  os << "id";
  for (int j = 0; j < outputs.cols(); ++j) os << ",v_" << j;
  os << ",cluster,true_domain\n";
  for (int i = 0; i < outputs.rows(); ++i) {
    os << i;
    for (int j = 0; j < outputs.cols(); ++j) os << ',' << fmt17(outputs.at(i, j));
    os << ',' << clusters[static_cast<size_t>(i)] << ','
       << (domains.empty() ? -1 : domains[static_cast<size_t>(i)]) << '\n';
  }
}

json mode_metrics(HmoeModel& model, const Dataset& data, InferenceMode mode) {
  Prediction pred =
      mode == InferenceMode::Mix ? predict_mix(model, data.x) : predict_ood(model, data.x);
  json out;
  if (model.spec().task == TaskKind::Regression) {
    out["mse"] = mse_metric(pred.output, data.y_reg);
  } else {
    out["accuracy"] = accuracy(argmax_rows(pred.output), data.y_cls);
  }
  return out;
}

double min_embedding_distance(const Tensor& vectors) {
  const int k = vectors.rows();
  if (k < 2) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) {
      double acc = 0.0;
      for (int j = 0; j < vectors.cols(); ++j) {
        const double diff = vectors.at(a, j) - vectors.at(b, j);
        acc += diff * diff;
      }
      best = std::min(best, std::sqrt(acc));
    }
  return best;
}

json config_json(const ExperimentConfig& config) {
  json out;
  for (const auto& [key, value] : config_to_map(config)) out[key] = value;
  return out;
}

}  // namespace

std::string cmd_train(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);

  Dataset full = build_dataset(config);
  Dataset train = full;
  Dataset val;
  if (config.train_fraction < 1.0) {
    SplitSpec split{config.train_fraction, config.seed};
    std::tie(train, val) = split_train_val(full, split);
  }

  const int num_outputs =
      config.task_kind() == TaskKind::Classification ? std::max(full.num_classes, 2) : 1;
  ModelSpec spec = config.model_spec(full.dim(), num_outputs);
  if (config.weights.lambda_d > 0.0) {
    if (full.domain.empty()) throw DataError("the DL variant requires domain annotations");
    if (full.num_domains > spec.num_experts)
      throw ConfigError("model.k must cover the annotated domain count");
  }
  Rng init_rng(config.seed, "init");
  HmoeModel model = HmoeModel::init(spec, init_rng);

  TrainResult result;
  try {
    result = run_training(model, train, val, config.train_options());
  } catch (const EvalError& err) {
    std::ofstream os(config.out_dir + "/diagnostic.txt");
    os << err.what() << '\n';
    throw;
  }

  write_metrics_csv(config.out_dir + "/metrics.csv", result.history);
  model.save(config.out_dir + "/checkpoint.txt");

  // Gate and encoder dumps over the full dataset.
  Prediction mix = predict_mix(model, full.x);
  const std::vector<int> clusters = assign_cluster(mix.gate_p);
  write_gate_csv(config.out_dir + "/gate_values.csv", mix.gate_p, clusters);
  Tensor encoded;
  {
    Tape tape;
    encoded = model.encode(tape, full.x).tensor();
  }
  write_encoder_csv(config.out_dir + "/encoder_outputs.csv", encoded, clusters, full.domain);

  json summary;
  summary["config"] = config_json(config);
  if (!result.history.empty()) {
    const LossBreakdown& last = result.history.back().parts;
    summary["final_losses"] = {{"L_y", last.ly},     {"L_en", last.len}, {"L_kl", last.lkl},
                               {"L_ad", last.lad},   {"L_d", last.ld},   {"total", last.total}};
    summary["switch_step"] = result.switch_step;
    json importance = json::array();
    for (std::int64_t i = 0; i < result.final_importance.size(); ++i)
      importance.push_back(result.final_importance[i]);
    summary["final_importance"] = importance;
  }

  summary["train"] = {{"MIX", mode_metrics(model, train, InferenceMode::Mix)},
                      {"OOD", mode_metrics(model, train, InferenceMode::Ood)}};
  if (val.size() > 0)
    summary["val"] = {{"MIX", mode_metrics(model, val, InferenceMode::Mix)},
                      {"OOD", mode_metrics(model, val, InferenceMode::Ood)}};

  json diag;
  diag["min_embedding_distance"] = min_embedding_distance(model.embeddings().vectors);
  if (!full.domain.empty()) diag["cluster_purity"] = cluster_purity(clusters, full.domain);
  try {
    diag["silhouette"] = silhouette(encoded, clusters);
  } catch (const EvalError&) {
    diag["silhouette"] = nullptr;  // fewer than two populated clusters
  }
  summary["diagnostics"] = diag;

  const std::string text = summary.dump(2);
  std::ofstream os(config.out_dir + "/summary.json");
  if (!os) throw IoError("cannot open summary for writing");
  os << text << '\n';
  return text;
}

std::string cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
                     const std::string& mode_name, const std::string& out_dir) {
  namespace fs = std::filesystem;
  HmoeModel model = HmoeModel::load(checkpoint_path);
  const InferenceMode mode = mode_from_string(mode_name);
  Dataset data = load_dataset_csv(data_path, model.spec().task);
  if (data.size() == 0) throw DataError("dataset holds no examples: " + data_path);
  if (data.dim() != model.spec().input_dim)
    throw ConfigError("dataset width does not match the checkpoint input dimension");
  if (model.spec().task == TaskKind::Classification && data.num_classes > model.spec().num_outputs)
    throw ConfigError("dataset classes exceed the checkpoint output dimension");

  fs::create_directories(out_dir);
  Prediction pred =
      mode == InferenceMode::Mix ? predict_mix(model, data.x) : predict_ood(model, data.x);

  json metrics;
  metrics["mode"] = to_string(mode);
  metrics["examples"] = data.size();
  if (model.spec().task == TaskKind::Regression) {
    metrics["mse"] = mse_metric(pred.output, data.y_reg);
  } else {
    metrics["accuracy"] = accuracy(argmax_rows(pred.output), data.y_cls);
  }

  const std::string pred_path = out_dir + "/predictions.csv";
  std::ofstream os(pred_path);
  if (!os) throw IoError("cannot open predictions file for writing: " + pred_path);
  os << "id,mode,predicted";
  const bool with_gates = mode == InferenceMode::Mix;
  if (with_gates)
    for (int k = 0; k < pred.gate_p.cols(); ++k) os << ",p_" << k;
  os << '\n';
  const bool classify = model.spec().task == TaskKind::Classification;
  std::vector<int> classes;
  if (classify) classes = argmax_rows(pred.output);
  for (int i = 0; i < data.size(); ++i) {
    os << i << ',' << to_string(mode) << ',';
    if (classify)
      os << classes[static_cast<size_t>(i)];
    else
      os << fmt17(pred.output.at(i, 0));
    if (with_gates)
      for (int k = 0; k < pred.gate_p.cols(); ++k) os << ',' << fmt17(pred.gate_p.at(i, k));
    os << '\n';
  }

  const std::string text = metrics.dump(2);
  std::cout << text << std::endl;
  return text;
}

void cmd_gendata(const ExperimentConfig& config, const std::string& out_path) {
  save_dataset_csv(build_dataset(config), out_path);
}

}  // namespace hmoe
