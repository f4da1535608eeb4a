#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canet/lifting.hpp"

namespace canet {

// One graph from a TUDataset-style text bundle. topology.edges holds each
// undirected edge once, canonical (u < v), sorted. Node features are the
// numeric attributes (if present) followed by the one-hot of the node
// label (if present); edge labels become one-hot edge features aligned
// with topology.edges. Class labels are remapped to 0..num_classes-1 by
// sorting the distinct raw values.
struct GraphSample {
  GraphTopology topology;
  std::vector<std::vector<double>> node_features;  // V x feature_dim
  std::vector<std::vector<double>> edge_features;  // E x edge_feature_dim
  int label = 0;

  bool operator==(const GraphSample&) const = default;
};

struct TudDataset {
  std::string name;
  std::vector<GraphSample> graphs;
  int num_classes = 0;
  int feature_dim = 0;       // per-node input width Fn
  int edge_feature_dim = 0;  // 0 when the bundle has no edge labels
  std::vector<int> raw_class_values;  // distinct raw labels, sorted
};

// Reads <dir>/<name>_A.txt, _graph_indicator.txt, _graph_labels.txt and
// the optional _node_labels.txt / _node_attributes.txt / _edge_labels.txt
// companions. Parse errors name the offending file and line.
TudDataset parse_tud(const std::string& dir, const std::string& name);

// Writes the bundle back out in the same text layout (both edge
// directions, 1-based ids). parse_tud after serialize_tud reproduces the
// same samples.
void serialize_tud(const TudDataset& dataset, const std::string& dir);

struct FoldSplit {
  std::vector<int> train_ids;
  std::vector<int> val_ids;
};

struct FoldPlan {
  std::vector<FoldSplit> folds;
  uint64_t seed = 0;
  std::vector<std::string> warnings;  // e.g. class too small to stratify
};

// Stratified k-fold assignment: per class, shuffle with the seeded
// generator and deal round-robin, so fold sizes differ by at most one and
// class ratios are preserved as closely as integer counts allow. A class
// with fewer members than folds triggers an unstratified fallback with a
// warning record.
FoldPlan make_folds(int n, const std::vector<int>& labels, uint64_t seed,
                    int num_folds = 10);

}  // namespace canet
