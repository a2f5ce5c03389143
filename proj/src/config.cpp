#include "hmoe/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hmoe/errors.hpp"

namespace hmoe {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "task", "variant", "seed", "steps", "lr", "batch_size", "eval_interval", "out_dir",
      "gate.eps",
      "model.k", "model.d", "model.feature_dim",
      "model.featurizer_hidden", "model.encoder_hidden", "model.classifier_hidden",
      "model.hyper_hidden", "model.adversarial_hidden",
      "loss.lambda_y", "loss.lambda_en", "loss.lambda_kl", "loss.lambda_ad", "loss.lambda_d",
      "mixup.alpha", "switch.threshold",
      "data.file", "data.domains", "data.classes", "data.n_per", "data.separation", "data.dim",
      "data.train_fraction",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Resolver {
 public:
  explicit Resolver(const KvMap& kv) : kv_(kv) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " expects a number, got '" + it->second + "'");
    }
  }

  int get_int(const std::string& key, int fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return static_cast<int>(v);
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " expects an integer, got '" + it->second + "'");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " expects an unsigned integer, got '" + it->second +
                        "'");
    }
  }

  std::vector<int> get_sizes(const std::string& key, std::vector<int> fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<int> out;
    if (trim(it->second).empty()) return out;  // explicit empty list
    std::istringstream in(it->second);
    std::string cell;
    while (std::getline(in, cell, ',')) {
      try {
        size_t pos = 0;
        const int v = std::stoi(trim(cell), &pos);
        out.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError("config key " + key + " expects comma-separated sizes, got '" +
                          it->second + "'");
      }
    }
    return out;
  }

 private:
  const KvMap& kv_;
};

std::string join_sizes(const std::vector<int>& sizes) {
  std::string out;
  for (size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(sizes[i]);
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TaskKind ExperimentConfig::task_kind() const {
  return task == "toy_regression" ? TaskKind::Regression : TaskKind::Classification;
}

ModelSpec ExperimentConfig::model_spec(int input_dim, int num_outputs) const {
  ModelSpec spec;
  spec.task = task_kind();
  spec.input_dim = input_dim;
  spec.num_outputs = num_outputs;
  spec.feature_dim = feature_dim;
  spec.embed_dim = embed_dim;
  spec.num_experts = num_experts;
  spec.featurizer_hidden = featurizer_hidden;
  spec.encoder_hidden = encoder_hidden;
  spec.classifier_hidden = classifier_hidden;
  spec.hyper_hidden = hyper_hidden;
  spec.adversarial_hidden = adversarial_hidden;
  spec.gate_eps = gate_eps;
  spec.use_adversary = spec.task == TaskKind::Classification && weights.lambda_ad > 0.0;
  return spec;
}

TrainOptions ExperimentConfig::train_options() const {
  TrainOptions opts;
  opts.variant = variant;
  opts.steps = steps;
  opts.lr = lr;
  opts.batch_size = batch_size;
  opts.eval_interval = eval_interval;
  opts.weights = weights;
  opts.mixup_alpha = mixup_alpha;
  opts.switch_threshold = switch_threshold;
  opts.seed = seed;
  return opts;
}

KvMap read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  KvMap kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_overrides(KvMap& kv, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + item + "' is not key=value");
    kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
}

ExperimentConfig resolve_config(const KvMap& kv) {
  for (const auto& [key, value] : kv)
    if (known_keys().count(key) == 0) throw ConfigError("unknown config key: " + key);

  Resolver r(kv);
  ExperimentConfig c;

  c.task = r.get_string("task", "toy_regression");
  if (c.task != "toy_regression" && c.task != "synthetic_dg")
    throw ConfigError("config key task expects toy_regression or synthetic_dg");
  const bool toy = c.task == "toy_regression";
  c.variant = variant_from_string(r.get_string("variant", "ND"));
  c.seed = r.get_u64("seed", 0);

  c.steps = r.get_int("steps", toy ? 20000 : 5000);
  c.lr = r.get_double("lr", 1e-3);
  c.batch_size = r.get_int("batch_size", toy ? 0 : 64);
  c.eval_interval = r.get_int("eval_interval", 100);
  c.out_dir = r.get_string("out_dir", "hmoe_run");
  c.gate_eps = r.get_double("gate.eps", 1e-8);

  c.data_file = r.get_string("data.file", "");
  c.data_domains = r.get_int("data.domains", 3);
  c.data_classes = r.get_int("data.classes", 3);
  c.data_n_per = r.get_int("data.n_per", 100);
  c.data_separation = r.get_double("data.separation", 10.0);
  c.data_dim = r.get_int("data.dim", 16);
  c.train_fraction = r.get_double("data.train_fraction", toy ? 1.0 : 0.8);

  c.num_experts = r.get_int("model.k", c.variant == Variant::DL && !toy ? c.data_domains : 3);
  c.embed_dim = r.get_int("model.d", 8);
  c.feature_dim = r.get_int("model.feature_dim", 32);
  c.featurizer_hidden = r.get_sizes("model.featurizer_hidden", toy ? std::vector<int>{32, 32}
                                                                    : std::vector<int>{64, 64});
  c.encoder_hidden = r.get_sizes("model.encoder_hidden", toy ? std::vector<int>{32, 32}
                                                              : std::vector<int>{64, 64});
  c.classifier_hidden =
      r.get_sizes("model.classifier_hidden", toy ? std::vector<int>{32} : std::vector<int>{});
  c.hyper_hidden = r.get_sizes("model.hyper_hidden", toy ? std::vector<int>{32, 32, 32}
                                                          : std::vector<int>{256, 128, 64, 32});
  c.adversarial_hidden = r.get_sizes("model.adversarial_hidden", {64, 64});

  // Variant-dependent loss weights; the adversarial term only applies to
  // classification tasks.
  const bool classify = !toy;
  switch (c.variant) {
    case Variant::DL:
      c.weights = LossWeights{1.0, 0.0, 0.0, 0.0, 1.0};
      break;
    case Variant::ND:
    case Variant::MU:
      c.weights = LossWeights{1.0, 1.0, 1.0, classify ? 0.1 : 0.0, 0.0};
      break;
  }
  c.weights.lambda_y = r.get_double("loss.lambda_y", c.weights.lambda_y);
  c.weights.lambda_en = r.get_double("loss.lambda_en", c.weights.lambda_en);
  c.weights.lambda_kl = r.get_double("loss.lambda_kl", c.weights.lambda_kl);
  c.weights.lambda_ad = r.get_double("loss.lambda_ad", c.weights.lambda_ad);
  c.weights.lambda_d = r.get_double("loss.lambda_d", c.weights.lambda_d);

  c.mixup_alpha = r.get_double("mixup.alpha", 0.3);
  c.switch_threshold = r.get_double("switch.threshold", 0.1);

  // Constraint checks, each naming its key.
  if (c.steps < 0) throw ConfigError("config key steps must be non-negative");
  if (c.lr < 0.0) throw ConfigError("config key lr must be non-negative");
  if (c.batch_size < 0) throw ConfigError("config key batch_size must be non-negative");
  if (c.eval_interval < 1) throw ConfigError("config key eval_interval must be at least 1");
  if (c.num_experts < 1) throw ConfigError("config key model.k must be at least 1");
  if (c.embed_dim < 1) throw ConfigError("config key model.d must be at least 1");
  if (c.feature_dim < 1) throw ConfigError("config key model.feature_dim must be at least 1");
  if (c.gate_eps <= 0.0) throw ConfigError("config key gate.eps must be positive");
  if (c.mixup_alpha <= 0.0) throw ConfigError("config key mixup.alpha must be positive");
  if (c.train_fraction <= 0.0 || c.train_fraction > 1.0)
    throw ConfigError("config key data.train_fraction must lie in (0, 1]");
  if (c.data_domains < 1 || c.data_classes < 1 || c.data_n_per < 1)
    throw ConfigError("config key data.domains/classes/n_per must be at least 1");
  if (c.data_separation <= 0.0) throw ConfigError("config key data.separation must be positive");
  if (c.data_dim < 2) throw ConfigError("config key data.dim must be at least 2");
  if (c.weights.lambda_y < 0 || c.weights.lambda_en < 0 || c.weights.lambda_kl < 0 ||
      c.weights.lambda_ad < 0 || c.weights.lambda_d < 0)
    throw ConfigError("config keys loss.* must be non-negative");
  return c;
}

std::map<std::string, std::string> config_to_map(const ExperimentConfig& c) {
  std::map<std::string, std::string> out;
  out["task"] = c.task;
  out["variant"] = to_string(c.variant);
  out["seed"] = std::to_string(c.seed);
  out["steps"] = std::to_string(c.steps);
  out["lr"] = format_double(c.lr);
  out["batch_size"] = std::to_string(c.batch_size);
  out["eval_interval"] = std::to_string(c.eval_interval);
  out["out_dir"] = c.out_dir;
  out["gate.eps"] = format_double(c.gate_eps);
  out["model.k"] = std::to_string(c.num_experts);
  out["model.d"] = std::to_string(c.embed_dim);
  out["model.feature_dim"] = std::to_string(c.feature_dim);
  out["model.featurizer_hidden"] = join_sizes(c.featurizer_hidden);
  out["model.encoder_hidden"] = join_sizes(c.encoder_hidden);
  out["model.classifier_hidden"] = join_sizes(c.classifier_hidden);
  out["model.hyper_hidden"] = join_sizes(c.hyper_hidden);
  out["model.adversarial_hidden"] = join_sizes(c.adversarial_hidden);
  out["loss.lambda_y"] = format_double(c.weights.lambda_y);
  out["loss.lambda_en"] = format_double(c.weights.lambda_en);
  out["loss.lambda_kl"] = format_double(c.weights.lambda_kl);
  out["loss.lambda_ad"] = format_double(c.weights.lambda_ad);
  out["loss.lambda_d"] = format_double(c.weights.lambda_d);
  out["mixup.alpha"] = format_double(c.mixup_alpha);
  out["switch.threshold"] = format_double(c.switch_threshold);
  out["data.file"] = c.data_file;
  out["data.domains"] = std::to_string(c.data_domains);
  out["data.classes"] = std::to_string(c.data_classes);
  out["data.n_per"] = std::to_string(c.data_n_per);
  out["data.separation"] = format_double(c.data_separation);
  out["data.dim"] = std::to_string(c.data_dim);
  out["data.train_fraction"] = format_double(c.train_fraction);
  return out;
}

}  // namespace hmoe
