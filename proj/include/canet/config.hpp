#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canet/tensor.hpp"  // Activation

namespace canet {

// Everything a run needs: the architecture knobs of the per-dataset
// hyperparameter tables plus training/protocol fields the tables leave
// open (epochs, weight decay, seed, precision) and the ablation switches.
struct RunConfig {
  // Attentional lift
  int lift_heads = 1;  // F0, number of learned edge features
  Activation lift_activation = Activation::ReLU;
  double lift_dropout = 0.0;
  bool lift_symmetric = false;  // average both node orderings

  // Cell attention stack; the two lists must have equal length L.
  std::vector<int> hidden_features = {32, 32};  // F^{l+1} per layer
  std::vector<int> attention_heads = {1, 1};    // H_c per layer
  std::string head_aggregation = "cat";         // "cat" | "avg"
  Activation attention_activation = Activation::LeakyReLU;  // phi_a
  Activation update_activation = Activation::ELU;           // phi
  double negative_slope = 0.1;
  double epsilon = 0.0;  // the (1+eps) self-term weight, fixed

  // Pooling and readout
  double pool_ratio = 1.0;          // k in (0, 1]
  std::string pool_type = "hier";   // "hier" | "glob"
  Activation pool_activation = Activation::Tanh;  // phi_p

  // Head and regularization
  int mlp_neurons = 8;
  double dropout = 0.1;

  // Training protocol
  double learning_rate = 3e-3;
  double weight_decay = 1e-4;
  int batch_size = 64;
  int epochs = 150;
  int max_ring_size = 6;
  uint64_t seed = 0;
  std::string precision = "f64";  // "f64" | "f32"

  // Ablation switches
  bool no_lift = false;
  bool no_lower = false;
  bool no_upper = false;
  bool no_attention = false;
  bool no_pooling = false;

  int num_layers() const { return static_cast<int>(hidden_features.size()); }

  // Throws ConfigError on inconsistent settings (list length mismatch,
  // hierarchical readout with unequal widths, contradictory ablations).
  void validate() const;
};

std::string activation_name(Activation act);
Activation activation_from_name(const std::string& name);

RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_json_text(const RunConfig& cfg);

}  // namespace canet
