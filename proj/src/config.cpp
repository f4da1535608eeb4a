#include "canet/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace canet {

namespace {

const std::map<std::string, Activation>& activation_table() {
  static const std::map<std::string, Activation> table = {
      {"identity", Activation::Identity}, {"relu", Activation::ReLU},
      {"lrelu", Activation::LeakyReLU},   {"leaky_relu", Activation::LeakyReLU},
      {"elu", Activation::ELU},           {"tanh", Activation::Tanh},
      {"sigmoid", Activation::Sigmoid},   {"gelu", Activation::GELU},
  };
  return table;
}

}  // namespace

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::LeakyReLU: return "lrelu";
    case Activation::ELU: return "elu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::GELU: return "gelu";
  }
  return "unknown";
}

Activation activation_from_name(const std::string& name) {
  std::string key;
  for (char c : name) key += static_cast<char>(std::tolower(c));
  auto it = activation_table().find(key);
  if (it == activation_table().end())
    throw ConfigError("unknown activation '" + name + "'");
  return it->second;
}

void RunConfig::validate() const {
  if (lift_heads < 1)
    throw ConfigError("lift_heads must be >= 1, got " +
                      std::to_string(lift_heads));
  if (hidden_features.empty())
    throw ConfigError("hidden_features must list at least one layer");
  if (hidden_features.size() != attention_heads.size())
    throw ConfigError("hidden_features has " +
                      std::to_string(hidden_features.size()) +
                      " layers but attention_heads has " +
                      std::to_string(attention_heads.size()));
  for (int f : hidden_features)
    if (f < 1) throw ConfigError("hidden feature widths must be >= 1");
  for (int h : attention_heads)
    if (h < 1) throw ConfigError("attention head counts must be >= 1");
  if (head_aggregation != "cat" && head_aggregation != "avg")
    throw ConfigError("head_aggregation must be 'cat' or 'avg', got '" +
                      head_aggregation + "'");
  if (pool_type != "hier" && pool_type != "glob")
    throw ConfigError("pool_type must be 'hier' or 'glob', got '" + pool_type +
                      "'");
  if (!(pool_ratio > 0.0 && pool_ratio <= 1.0))
    throw ConfigError("pool_ratio must be in (0, 1], got " +
                      std::to_string(pool_ratio));
  if (pool_type == "hier" && !no_pooling) {
    // The hierarchical readout sums per-layer embeddings, so their
    // widths must agree; projections between layers are not a thing here.
    for (size_t l = 1; l < hidden_features.size(); ++l) {
      int w0 = hidden_features[0] *
               (head_aggregation == "cat" ? attention_heads[0] : 1);
      int wl = hidden_features[l] *
               (head_aggregation == "cat" ? attention_heads[l] : 1);
      if (wl != w0)
        throw ConfigError(
            "hierarchical readout needs equal layer output widths; layer 0 "
            "emits " + std::to_string(w0) + " features but layer " +
            std::to_string(l) + " emits " + std::to_string(wl));
    }
  }
  if (dropout < 0.0 || dropout >= 1.0 || lift_dropout < 0.0 ||
      lift_dropout >= 1.0)
    throw ConfigError("dropout rates must be in [0, 1)");
  if (no_attention && (no_lower || no_upper))
    throw ConfigError(
        "no_attention already disables both sides; do not combine it with "
        "no_lower/no_upper");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (max_ring_size < 3)
    throw ConfigError("max_ring_size must be >= 3, got " +
                      std::to_string(max_ring_size));
  if (precision != "f64" && precision != "f32")
    throw ConfigError("precision must be 'f64' or 'f32', got '" + precision +
                      "'");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

RunConfig config_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) {
      try {
        field = j.at(key).get<std::decay_t<decltype(field)>>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " +
                          e.what());
      }
    }
  };
  auto get_act = [&j](const char* key, Activation& field) {
    if (j.contains(key)) {
      if (!j.at(key).is_string())
        throw ConfigError(std::string("config field '") + key +
                          "' must be an activation name");
      field = activation_from_name(j.at(key).get<std::string>());
    }
  };

  get("lift_heads", cfg.lift_heads);
  get_act("lift_activation", cfg.lift_activation);
  get("lift_dropout", cfg.lift_dropout);
  get("lift_symmetric", cfg.lift_symmetric);
  get("hidden_features", cfg.hidden_features);
  get("attention_heads", cfg.attention_heads);
  get("head_aggregation", cfg.head_aggregation);
  get_act("attention_activation", cfg.attention_activation);
  get_act("update_activation", cfg.update_activation);
  get("negative_slope", cfg.negative_slope);
  get("epsilon", cfg.epsilon);
  get("pool_ratio", cfg.pool_ratio);
  get("pool_type", cfg.pool_type);
  get_act("pool_activation", cfg.pool_activation);
  get("mlp_neurons", cfg.mlp_neurons);
  get("dropout", cfg.dropout);
  get("learning_rate", cfg.learning_rate);
  get("weight_decay", cfg.weight_decay);
  get("batch_size", cfg.batch_size);
  get("epochs", cfg.epochs);
  get("max_ring_size", cfg.max_ring_size);
  get("seed", cfg.seed);
  get("precision", cfg.precision);
  get("no_lift", cfg.no_lift);
  get("no_lower", cfg.no_lower);
  get("no_upper", cfg.no_upper);
  get("no_attention", cfg.no_attention);
  get("no_pooling", cfg.no_pooling);

  static const std::vector<std::string> known = {
      "lift_heads", "lift_activation", "lift_dropout", "lift_symmetric",
      "hidden_features", "attention_heads", "head_aggregation",
      "attention_activation", "update_activation", "negative_slope",
      "epsilon", "pool_ratio", "pool_type", "pool_activation", "mlp_neurons",
      "dropout", "learning_rate", "weight_decay", "batch_size", "epochs",
      "max_ring_size", "seed", "precision", "no_lift", "no_lower", "no_upper",
      "no_attention", "no_pooling"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config field '" + it.key() + "'");

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

std::string config_to_json_text(const RunConfig& cfg) {
  nlohmann::json j;
  j["lift_heads"] = cfg.lift_heads;
  j["lift_activation"] = activation_name(cfg.lift_activation);
  j["lift_dropout"] = cfg.lift_dropout;
  j["lift_symmetric"] = cfg.lift_symmetric;
  j["hidden_features"] = cfg.hidden_features;
  j["attention_heads"] = cfg.attention_heads;
  j["head_aggregation"] = cfg.head_aggregation;
  j["attention_activation"] = activation_name(cfg.attention_activation);
  j["update_activation"] = activation_name(cfg.update_activation);
  j["negative_slope"] = cfg.negative_slope;
  j["epsilon"] = cfg.epsilon;
  j["pool_ratio"] = cfg.pool_ratio;
  j["pool_type"] = cfg.pool_type;
  j["pool_activation"] = activation_name(cfg.pool_activation);
  j["mlp_neurons"] = cfg.mlp_neurons;
  j["dropout"] = cfg.dropout;
  j["learning_rate"] = cfg.learning_rate;
  j["weight_decay"] = cfg.weight_decay;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["max_ring_size"] = cfg.max_ring_size;
  j["seed"] = cfg.seed;
  j["precision"] = cfg.precision;
  j["no_lift"] = cfg.no_lift;
  j["no_lower"] = cfg.no_lower;
  j["no_upper"] = cfg.no_upper;
  j["no_attention"] = cfg.no_attention;
  j["no_pooling"] = cfg.no_pooling;
  return j.dump(2);
}

}  // namespace canet
