#pragma once

#include <string>
#include <vector>

#include "hmoe/autodiff.hpp"
#include "hmoe/rng.hpp"
#include "hmoe/tensor.hpp"

namespace hmoe {

enum class Activation { SiLU, ReLU };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Shape of a fully-connected network: layer_sizes = {in, hidden..., out}.
/// The activation applies to every layer except the last.
struct MlpSpec {
  std::vector<int> layer_sizes;
  Activation activation = Activation::SiLU;

  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  /// Total parameter count: sum of in*out + out over layers.
  int param_count() const;
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

/// A network's parameters: per layer, a weight matrix of shape
/// [in x out] followed by a bias of length out.
struct NetworkInstance {
  MlpSpec spec;
  std::vector<Tensor> params;  // w0, b0, w1, b1, ...

  Tensor& weight(int layer) { return params[static_cast<size_t>(2 * layer)]; }
  Tensor& bias(int layer) { return params[static_cast<size_t>(2 * layer + 1)]; }
  const Tensor& weight(int layer) const { return params[static_cast<size_t>(2 * layer)]; }
  const Tensor& bias(int layer) const { return params[static_cast<size_t>(2 * layer + 1)]; }
};

enum class InitMode { Standard, Hyperfan };

/// Fan-in-scaled normal weights, zero biases. Hyperfan mode additionally
/// rescales the final layer so that, for standard-normal inputs, the
/// generated target-network weights come out with variance close to
/// 2 / fan_in of their target layer; it requires the target spec.
NetworkInstance init_network(const MlpSpec& spec, InitMode mode, Rng& rng,
                             const MlpSpec* hyperfan_target = nullptr);

Value apply_activation(Value x, Activation a);

/// Forward pass through stored parameters, registered as tape leaves.
Value mlp_forward(Tape& tape, NetworkInstance& net, Value x);

/// Flat parameter vector produced by a hypernetwork, one row per
/// conditioning vector. Layout per target layer: weight row-major
/// [in x out], then bias.
struct GeneratedWeights {
  Value flat;        // [K x P]
  int per_expert;    // P
  int experts() const { return flat.shape()[0]; }
};

/// Run the hypernetwork on a [K x D] batch of conditioning vectors and
/// check the output width against the classifier spec.
GeneratedWeights hypernetwork_generate(Tape& tape, NetworkInstance& hyper, Value embeddings,
                                       const MlpSpec& classifier);

/// Apply the classifier shape with parameters taken from row `row` of a
/// flat weight matrix. Numerically identical to mlp_forward over the same
/// unpacked parameters.
Value functional_forward(Tape& tape, Value z, Value flat, int row, const MlpSpec& classifier);

/// Apply the classifier shape with a distinct parameter row per example
/// (z and flat share their batch dimension).
Value per_example_forward(Tape& tape, Value z, Value flat, const MlpSpec& classifier);

/// Pack a network's parameters into a flat vector using the
/// GeneratedWeights layout; unpack reverses it.
Tensor pack_parameters(const NetworkInstance& net);
void unpack_parameters(const Tensor& flat, NetworkInstance& net);

}  // namespace hmoe
