#include "hmoe/network.hpp"

#include <cmath>

#include "hmoe/errors.hpp"

namespace hmoe {

Activation activation_from_string(const std::string& name) {
  if (name == "silu") return Activation::SiLU;
  if (name == "relu") return Activation::ReLU;
  throw ConfigError("unknown activation: " + name);
}

std::string to_string(Activation a) {
  return a == Activation::SiLU ? "silu" : "relu";
}

int MlpSpec::param_count() const {
  int total = 0;
  for (int l = 0; l < num_layers(); ++l)
    total += layer_sizes[static_cast<size_t>(l)] * layer_sizes[static_cast<size_t>(l) + 1] +
             layer_sizes[static_cast<size_t>(l) + 1];
  return total;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("an MLP spec needs at least input and output sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw ConfigError("MLP layer sizes must be positive");
}

namespace {

Tensor normal_matrix(int rows, int cols, double stddev, Rng& rng) {
  Tensor w({rows, cols});
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, stddev);
  return w;
}

// Per-output-unit standard deviation of the hypernetwork's last layer so
// that generated weights land near variance 2/fan_in of their target
// layer and generated biases start at zero.
std::vector<double> hyperfan_output_stddev(const MlpSpec& target, int hidden_width,
                                           double hidden_second_moment) {
  std::vector<double> stddev(static_cast<size_t>(target.param_count()), 0.0);
  size_t off = 0;
  for (int l = 0; l < target.num_layers(); ++l) {
    const int fan_in = target.layer_sizes[static_cast<size_t>(l)];
    const int fan_out = target.layer_sizes[static_cast<size_t>(l) + 1];
    const double var = 2.0 / (fan_in * hidden_width * hidden_second_moment);
    for (int i = 0; i < fan_in * fan_out; ++i) stddev[off++] = std::sqrt(var);
    off += static_cast<size_t>(fan_out);  // bias generators stay zero
  }
  return stddev;
}

}  // namespace

NetworkInstance init_network(const MlpSpec& spec, InitMode mode, Rng& rng,
                             const MlpSpec* hyperfan_target) {
  spec.validate();
  if (mode == InitMode::Hyperfan && hyperfan_target == nullptr)
    throw ConfigError("hyperfan init requires the target network spec");
  if (mode == InitMode::Hyperfan && hyperfan_target->param_count() != spec.output_size())
    throw ConfigError("hypernetwork output size does not match the target parameter count");

  NetworkInstance net;
  net.spec = spec;
  const int layers = spec.num_layers();
  for (int l = 0; l < layers; ++l) {
    const int in = spec.layer_sizes[static_cast<size_t>(l)];
    const int out = spec.layer_sizes[static_cast<size_t>(l) + 1];
    const bool last = l == layers - 1;
    if (mode == InitMode::Hyperfan && last) {
      // Measure the second moment of the last hidden activation for
      // standard-normal inputs, then scale each output unit to its
      // target variance.
      const int probes = 256;
      Tensor h = normal_matrix(probes, spec.input_size(), 1.0, rng);
      {
        Tape tape;
        Value x = tape.constant(h);
        for (int pl = 0; pl < layers - 1; ++pl) {
          Value w = tape.constant(net.weight(pl));
          Value b = tape.constant(net.bias(pl));
          x = apply_activation(add_bias(matmul(x, w), b), spec.activation);
        }
        h = x.tensor();
      }
      double m2 = 0.0;
      for (std::int64_t i = 0; i < h.size(); ++i) m2 += h[i] * h[i];
      m2 = std::max(m2 / static_cast<double>(h.size()), 1e-12);
      const std::vector<double> stddev = hyperfan_output_stddev(*hyperfan_target, in, m2);
      Tensor w({in, out});
      for (int i = 0; i < in; ++i)
        for (int j = 0; j < out; ++j)
          w.at(i, j) = stddev[static_cast<size_t>(j)] > 0.0
                           ? rng.normal(0.0, stddev[static_cast<size_t>(j)])
                           : 0.0;
      net.params.push_back(std::move(w));
    } else {
      const double stddev = last ? std::sqrt(1.0 / in) : std::sqrt(2.0 / in);
      net.params.push_back(normal_matrix(in, out, stddev, rng));
    }
    net.params.push_back(Tensor({out}));  // biases start at zero
  }
  return net;
}

Value apply_activation(Value x, Activation a) {
  return a == Activation::SiLU ? silu(x) : relu(x);
}

Value mlp_forward(Tape& tape, NetworkInstance& net, Value x) {
  if (x.shape().size() != 2 || x.shape()[1] != net.spec.input_size())
    throw DimensionError("input width does not match the network spec");
  Value h = x;
  const int layers = net.spec.num_layers();
  for (int l = 0; l < layers; ++l) {
    Value w = tape.param(net.weight(l));
    Value b = tape.param(net.bias(l));
    h = add_bias(matmul(h, w), b);
    if (l != layers - 1) h = apply_activation(h, net.spec.activation);
  }
  return h;
}

GeneratedWeights hypernetwork_generate(Tape& tape, NetworkInstance& hyper, Value embeddings,
                                       const MlpSpec& classifier) {
  if (hyper.spec.output_size() != classifier.param_count())
    throw ConfigError("hypernetwork output size does not match the classifier parameter count");
  Value flat = mlp_forward(tape, hyper, embeddings);
  return GeneratedWeights{flat, classifier.param_count()};
}

Value functional_forward(Tape& tape, Value z, Value flat, int row, const MlpSpec& classifier) {
  if (z.tape() != &tape || flat.tape() != &tape)
    throw ContractError("functional_forward operands live on a different tape");
  if (flat.shape()[1] != classifier.param_count())
    throw ConfigError("flat weight width does not match the classifier parameter count");
  if (z.shape()[1] != classifier.input_size())
    throw DimensionError("input width does not match the classifier spec");
  Value h = z;
  int off = 0;
  const int layers = classifier.num_layers();
  for (int l = 0; l < layers; ++l) {
    const int in = classifier.layer_sizes[static_cast<size_t>(l)];
    const int out = classifier.layer_sizes[static_cast<size_t>(l) + 1];
    Value w = slice_row(flat, row, off, {in, out});
    off += in * out;
    Value b = slice_row(flat, row, off, {out});
    off += out;
    h = add_bias(matmul(h, w), b);
    if (l != layers - 1) h = apply_activation(h, classifier.activation);
  }
  return h;
}

Value per_example_forward(Tape& tape, Value z, Value flat, const MlpSpec& classifier) {
  if (z.tape() != &tape || flat.tape() != &tape)
    throw ContractError("per_example_forward operands live on a different tape");
  if (flat.shape()[1] != classifier.param_count())
    throw ConfigError("flat weight width does not match the classifier parameter count");
  if (z.shape()[1] != classifier.input_size())
    throw DimensionError("input width does not match the classifier spec");
  Value h = z;
  int off = 0;
  const int layers = classifier.num_layers();
  for (int l = 0; l < layers; ++l) {
    const int in = classifier.layer_sizes[static_cast<size_t>(l)];
    const int out = classifier.layer_sizes[static_cast<size_t>(l) + 1];
    h = per_example_affine(h, flat, off, in, out);
    off += in * out + out;
    if (l != layers - 1) h = apply_activation(h, classifier.activation);
  }
  return h;
}

Tensor pack_parameters(const NetworkInstance& net) {
  Tensor flat({net.spec.param_count()});
  std::int64_t off = 0;
  for (const Tensor& p : net.params) {
    for (std::int64_t i = 0; i < p.size(); ++i) flat[off + i] = p[i];
    off += p.size();
  }
  return flat;
}

void unpack_parameters(const Tensor& flat, NetworkInstance& net) {
  if (flat.size() != net.spec.param_count())
    throw ConfigError("flat parameter vector does not match the network spec");
  std::int64_t off = 0;
  for (Tensor& p : net.params) {
    for (std::int64_t i = 0; i < p.size(); ++i) p[i] = flat[off + i];
    off += p.size();
  }
}

}  // namespace hmoe
