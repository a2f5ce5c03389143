#pragma once

#include <string>
#include <vector>

#include "hmoe/autodiff.hpp"
#include "hmoe/gating.hpp"
#include "hmoe/network.hpp"
#include "hmoe/rng.hpp"

namespace hmoe {

enum class TaskKind { Regression, Classification };

TaskKind task_from_string(const std::string& name);
std::string to_string(TaskKind task);

/// Architecture of a full model: featurizer, encoder, hypernetwork,
/// classifier shape, optional adversarial head, and the embedding space.
struct ModelSpec {
  TaskKind task = TaskKind::Regression;
  int input_dim = 1;
  int num_outputs = 1;  // class count, or 1 for regression
  int feature_dim = 32;
  int embed_dim = 8;
  int num_experts = 3;
  std::vector<int> featurizer_hidden{32, 32};
  std::vector<int> encoder_hidden{32, 32};
  std::vector<int> classifier_hidden{32};
  std::vector<int> hyper_hidden{32, 32, 32};
  std::vector<int> adversarial_hidden{64, 64};
  Activation activation = Activation::SiLU;
  double gate_eps = 1e-8;
  bool use_adversary = false;

  MlpSpec featurizer_spec() const;
  MlpSpec encoder_spec() const;
  MlpSpec classifier_spec() const;
  MlpSpec hyper_spec() const;
  MlpSpec adversary_spec() const;
  void validate() const;
};

/// The trainable model. Graph-builder methods register parameters on the
/// caller's tape, so one tape can assemble any combination of losses.
class HmoeModel {
 public:
  static HmoeModel init(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  NetworkInstance& featurizer() { return featurizer_; }
  NetworkInstance& encoder() { return encoder_; }
  NetworkInstance& hypernet() { return hypernet_; }
  NetworkInstance& adversary() { return adversary_; }
  EmbeddingSpace& embeddings() { return embeddings_; }

  /// All parameters in a fixed order (featurizer, encoder, hypernetwork,
  /// embeddings, adversary).
  std::vector<Tensor*> parameters();
  void zero_grads();

  Value features(Tape& tape, const Tensor& x);  // h_z(x)
  Value encode(Tape& tape, const Tensor& x);    // h_v(x)
  GateDistribution gate(Tape& tape, Value v);
  GeneratedWeights generate_weights(Tape& tape);
  Value expert_output(Tape& tape, Value z, const GeneratedWeights& theta, int expert);
  /// Gate-weighted sum of all expert outputs.
  Value mix_output(Tape& tape, Value z, const GateDistribution& gate,
                   const GeneratedWeights& theta);
  /// Adversarial head on the reversed encoder output.
  Value adversary_logits(Tape& tape, Value v, double lambda);

  /// Exact 64-bit round-trip checkpoint (text format, hexfloat values).
  void save(const std::string& path) const;
  static HmoeModel load(const std::string& path);

 private:
  ModelSpec spec_;
  NetworkInstance featurizer_;
  NetworkInstance encoder_;
  NetworkInstance hypernet_;
  NetworkInstance adversary_;  // empty unless spec_.use_adversary
  EmbeddingSpace embeddings_;
};

enum class InferenceMode { Mix, Ood };

InferenceMode mode_from_string(const std::string& name);
std::string to_string(InferenceMode mode);

struct Prediction {
  InferenceMode mode = InferenceMode::Mix;
  Tensor output;  // [B x C] logits, or [B x 1] regression values
  Tensor gate_p;  // Mix only
  Tensor gate_d;
  Tensor gate_s;
};

/// Gate-weighted expert aggregation.
Prediction predict_mix(HmoeModel& model, const Tensor& x);
/// Per-example classifier generated from the example's own encoder
/// output; no gate involved.
Prediction predict_ood(HmoeModel& model, const Tensor& x);

}  // namespace hmoe
