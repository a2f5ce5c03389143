#include "hmoe/model.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hmoe/errors.hpp"

namespace hmoe {

TaskKind task_from_string(const std::string& name) {
  if (name == "regression") return TaskKind::Regression;
  if (name == "classification") return TaskKind::Classification;
  throw ConfigError("unknown task kind: " + name);
}

std::string to_string(TaskKind task) {
  return task == TaskKind::Regression ? "regression" : "classification";
}

InferenceMode mode_from_string(const std::string& name) {
  if (name == "MIX" || name == "mix") return InferenceMode::Mix;
  if (name == "OOD" || name == "ood") return InferenceMode::Ood;
  throw ConfigError("unknown inference mode: " + name);
}

std::string to_string(InferenceMode mode) {
  return mode == InferenceMode::Mix ? "MIX" : "OOD";
}

namespace {

MlpSpec make_spec(int in, const std::vector<int>& hidden, int out, Activation act) {
  MlpSpec s;
  s.layer_sizes.push_back(in);
  for (int h : hidden) s.layer_sizes.push_back(h);
  s.layer_sizes.push_back(out);
  s.activation = act;
  return s;
}

}  // namespace

MlpSpec ModelSpec::featurizer_spec() const {
  return make_spec(input_dim, featurizer_hidden, feature_dim, activation);
}

MlpSpec ModelSpec::encoder_spec() const {
  return make_spec(input_dim, encoder_hidden, embed_dim, activation);
}

MlpSpec ModelSpec::classifier_spec() const {
  return make_spec(feature_dim, classifier_hidden, num_outputs, activation);
}

MlpSpec ModelSpec::hyper_spec() const {
  return make_spec(embed_dim, hyper_hidden, classifier_spec().param_count(), activation);
}

MlpSpec ModelSpec::adversary_spec() const {
  return make_spec(embed_dim, adversarial_hidden, num_outputs, Activation::ReLU);
}

void ModelSpec::validate() const {
  if (num_experts < 1) throw ConfigError("num_experts must be at least 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be at least 1");
  if (input_dim < 1 || feature_dim < 1 || num_outputs < 1)
    throw ConfigError("model dimensions must be positive");
  if (gate_eps <= 0.0) throw ConfigError("gate_eps must be positive");
  if (task == TaskKind::Regression && use_adversary)
    throw ConfigError("the adversarial head applies to classification tasks only");
  featurizer_spec().validate();
  encoder_spec().validate();
  classifier_spec().validate();
  hyper_spec().validate();
  if (use_adversary) adversary_spec().validate();
}

HmoeModel HmoeModel::init(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  HmoeModel m;
  m.spec_ = spec;
  m.featurizer_ = init_network(spec.featurizer_spec(), InitMode::Standard, rng);
  m.encoder_ = init_network(spec.encoder_spec(), InitMode::Standard, rng);
  const MlpSpec cls = spec.classifier_spec();
  m.hypernet_ = init_network(spec.hyper_spec(), InitMode::Hyperfan, rng, &cls);
  m.embeddings_ = EmbeddingSpace::init(spec.num_experts, spec.embed_dim, rng);
  if (spec.use_adversary)
    m.adversary_ = init_network(spec.adversary_spec(), InitMode::Standard, rng);
  return m;
}

std::vector<Tensor*> HmoeModel::parameters() {
  std::vector<Tensor*> out;
  for (Tensor& t : featurizer_.params) out.push_back(&t);
  for (Tensor& t : encoder_.params) out.push_back(&t);
  for (Tensor& t : hypernet_.params) out.push_back(&t);
  out.push_back(&embeddings_.vectors);
  for (Tensor& t : adversary_.params) out.push_back(&t);
  return out;
}

void HmoeModel::zero_grads() {
  for (Tensor* t : parameters()) t->zero_grad();
}

Value HmoeModel::features(Tape& tape, const Tensor& x) {
  return mlp_forward(tape, featurizer_, tape.constant(x));
}

Value HmoeModel::encode(Tape& tape, const Tensor& x) {
  return mlp_forward(tape, encoder_, tape.constant(x));
}

GateDistribution HmoeModel::gate(Tape& tape, Value v) {
  return gate_values(tape, v, tape.param(embeddings_.vectors), spec_.gate_eps);
}

GeneratedWeights HmoeModel::generate_weights(Tape& tape) {
  return hypernetwork_generate(tape, hypernet_, tape.param(embeddings_.vectors),
                               spec_.classifier_spec());
}

Value HmoeModel::expert_output(Tape& tape, Value z, const GeneratedWeights& theta, int expert) {
  return functional_forward(tape, z, theta.flat, expert, spec_.classifier_spec());
}

Value HmoeModel::mix_output(Tape& tape, Value z, const GateDistribution& gate,
                            const GeneratedWeights& theta) {
  Value out;
  for (int k = 0; k < spec_.num_experts; ++k) {
    Value weighted = scale_rows(expert_output(tape, z, theta, k), column(gate.p, k));
    out = k == 0 ? weighted : add(out, weighted);
  }
  return out;
}

Value HmoeModel::adversary_logits(Tape& tape, Value v, double lambda) {
  if (!spec_.use_adversary) throw ConfigError("this model has no adversarial head");
  return mlp_forward(tape, adversary_, grl(v, lambda));
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "hmoe-checkpoint-v1";

void write_sizes(std::ostream& os, const char* key, const std::vector<int>& sizes) {
  os << key;
  for (int s : sizes) os << ' ' << s;
  os << '\n';
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  os << "tensor " << name;
  for (int e : t.shape()) os << ' ' << e;
  os << '\n';
  char buf[40];
  for (std::int64_t i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", t[i]);
    os << buf << (i + 1 == t.size() ? '\n' : ' ');
  }
}

void write_network(std::ostream& os, const std::string& name, const NetworkInstance& net) {
  for (int l = 0; l < net.spec.num_layers(); ++l) {
    write_tensor(os, name + ".w" + std::to_string(l), net.weight(l));
    write_tensor(os, name + ".b" + std::to_string(l), net.bias(l));
  }
}

std::vector<int> parse_sizes(std::istringstream& in) {
  std::vector<int> out;
  int v;
  while (in >> v) out.push_back(v);
  return out;
}

void read_tensor_into(std::istream& is, const std::string& expected, Tensor& t) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("checkpoint truncated before " + expected);
  std::istringstream header(line);
  std::string tag, name;
  header >> tag >> name;
  if (tag != "tensor" || name != expected)
    throw ConfigError("checkpoint does not match the model spec at " + expected);
  const std::vector<int> shape = parse_sizes(header);
  if (shape != t.shape()) throw ConfigError("checkpoint tensor shape mismatch at " + expected);
  if (!std::getline(is, line)) throw IoError("checkpoint truncated in " + expected);
  std::istringstream values(line);
  std::string tok;
  for (std::int64_t i = 0; i < t.size(); ++i) {
    if (!(values >> tok)) throw IoError("checkpoint value count mismatch in " + expected);
    t[i] = std::strtod(tok.c_str(), nullptr);
  }
}

void read_network(std::istream& is, const std::string& name, NetworkInstance& net) {
  for (int l = 0; l < net.spec.num_layers(); ++l) {
    read_tensor_into(is, name + ".w" + std::to_string(l), net.weight(l));
    read_tensor_into(is, name + ".b" + std::to_string(l), net.bias(l));
  }
}

}  // namespace

void HmoeModel::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os << kCheckpointMagic << '\n';
  os << "task " << to_string(spec_.task) << '\n';
  os << "input_dim " << spec_.input_dim << '\n';
  os << "num_outputs " << spec_.num_outputs << '\n';
  os << "feature_dim " << spec_.feature_dim << '\n';
  os << "embed_dim " << spec_.embed_dim << '\n';
  os << "num_experts " << spec_.num_experts << '\n';
  write_sizes(os, "featurizer_hidden", spec_.featurizer_hidden);
  write_sizes(os, "encoder_hidden", spec_.encoder_hidden);
  write_sizes(os, "classifier_hidden", spec_.classifier_hidden);
  write_sizes(os, "hyper_hidden", spec_.hyper_hidden);
  write_sizes(os, "adversarial_hidden", spec_.adversarial_hidden);
  os << "activation " << to_string(spec_.activation) << '\n';
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", spec_.gate_eps);
  os << "gate_eps " << buf << '\n';
  os << "use_adversary " << (spec_.use_adversary ? 1 : 0) << '\n';
  write_network(os, "featurizer", featurizer_);
  write_network(os, "encoder", encoder_);
  write_network(os, "hypernet", hypernet_);
  write_tensor(os, "embeddings", embeddings_.vectors);
  if (spec_.use_adversary) write_network(os, "adversary", adversary_);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

HmoeModel HmoeModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic)
    throw ConfigError("not a recognizable checkpoint: " + path);

  ModelSpec spec;
  auto next_field = [&is, &path](const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("checkpoint truncated: " + path);
    std::istringstream in(line);
    std::string k;
    in >> k;
    if (k != key) throw ConfigError("checkpoint field out of order, expected " + key);
    return in;
  };
  {
    std::string v;
    next_field("task") >> v;
    spec.task = task_from_string(v);
  }
  next_field("input_dim") >> spec.input_dim;
  next_field("num_outputs") >> spec.num_outputs;
  next_field("feature_dim") >> spec.feature_dim;
  next_field("embed_dim") >> spec.embed_dim;
  next_field("num_experts") >> spec.num_experts;
  {
    auto in = next_field("featurizer_hidden");
    spec.featurizer_hidden = parse_sizes(in);
  }
  {
    auto in = next_field("encoder_hidden");
    spec.encoder_hidden = parse_sizes(in);
  }
  {
    auto in = next_field("classifier_hidden");
    spec.classifier_hidden = parse_sizes(in);
  }
  {
    auto in = next_field("hyper_hidden");
    spec.hyper_hidden = parse_sizes(in);
  }
  {
    auto in = next_field("adversarial_hidden");
    spec.adversarial_hidden = parse_sizes(in);
  }
  {
    std::string v;
    next_field("activation") >> v;
    spec.activation = activation_from_string(v);
  }
  {
    std::string v;
    next_field("gate_eps") >> v;
    spec.gate_eps = std::strtod(v.c_str(), nullptr);
  }
  {
    int v = 0;
    next_field("use_adversary") >> v;
    spec.use_adversary = v != 0;
  }
  spec.validate();

  HmoeModel m;
  m.spec_ = spec;
  auto blank = [](const MlpSpec& s) {
    NetworkInstance net;
    net.spec = s;
    for (int l = 0; l < s.num_layers(); ++l) {
      net.params.emplace_back(
          std::vector<int>{s.layer_sizes[static_cast<size_t>(l)], s.layer_sizes[static_cast<size_t>(l) + 1]});
      net.params.emplace_back(std::vector<int>{s.layer_sizes[static_cast<size_t>(l) + 1]});
    }
    return net;
  };
  m.featurizer_ = blank(spec.featurizer_spec());
  m.encoder_ = blank(spec.encoder_spec());
  m.hypernet_ = blank(spec.hyper_spec());
  m.embeddings_.vectors = Tensor({spec.num_experts, spec.embed_dim});
  read_network(is, "featurizer", m.featurizer_);
  read_network(is, "encoder", m.encoder_);
  read_network(is, "hypernet", m.hypernet_);
  read_tensor_into(is, "embeddings", m.embeddings_.vectors);
  if (spec.use_adversary) {
    m.adversary_ = blank(spec.adversary_spec());
    read_network(is, "adversary", m.adversary_);
  }
  return m;
}

// ---- inference -------------------------------------------------------------

Prediction predict_mix(HmoeModel& model, const Tensor& x) {
  Tape tape;
  Value z = model.features(tape, x);
  Value v = model.encode(tape, x);
  GateDistribution g = model.gate(tape, v);
  GeneratedWeights theta = model.generate_weights(tape);
  Value out = model.mix_output(tape, z, g, theta);
  Prediction p;
  p.mode = InferenceMode::Mix;
  p.output = out.tensor();
  p.gate_p = g.p.tensor();
  p.gate_d = g.d;
  p.gate_s = g.s.tensor();
  return p;
}

Prediction predict_ood(HmoeModel& model, const Tensor& x) {
  Tape tape;
  Value z = model.features(tape, x);
  Value v = model.encode(tape, x);
  GeneratedWeights theta =
      hypernetwork_generate(tape, model.hypernet(), v, model.spec().classifier_spec());
  Value out = per_example_forward(tape, z, theta.flat, model.spec().classifier_spec());
  Prediction p;
  p.mode = InferenceMode::Ood;
  p.output = out.tensor();
  return p;
}

}  // namespace hmoe
