#pragma once

#include <map>
#include <utility>
#include <vector>

#include "canet/cell_complex.hpp"

namespace canet {

// Undirected simple graph; edges may arrive in either orientation and
// duplicated (datasets store both directions). Self-loops are rejected.
struct GraphTopology {
  int num_vertices = 0;
  std::vector<std::pair<int, int>> edges;

  bool operator==(const GraphTopology&) const = default;
};

struct LiftConfig {
  int max_ring_size = 6;  // attach rings of length 3..max_ring_size
};

// All chordless cycles of length 3..max_ring_size, each in canonical form
// (minimal vertex first, then its smaller cycle neighbour), sorted
// lexicographically by vertex sequence.
std::vector<std::vector<int>> chordless_cycles(
    int num_vertices, const std::vector<std::pair<int, int>>& edges,
    int max_ring_size);

// Builds the 2-complex whose 1-skeleton is the input graph and whose
// 2-cells are its chordless cycles up to config.max_ring_size.
CellComplex lift_graph(const GraphTopology& graph, const LiftConfig& config);

struct DatasetStats {
  int num_graphs = 0;
  int num_classes = 0;  // filled by callers that know the labels
  double avg_vertices = 0.0;
  double avg_edges = 0.0;
  std::map<int, double> avg_rings_by_size;  // ring length -> mean per graph
};

DatasetStats dataset_stats(const std::vector<CellComplex>& complexes);

// Serial reference; the parallel kernel must match it bitwise.
std::vector<CellComplex> lift_dataset_serial(
    const std::vector<GraphTopology>& graphs, const LiftConfig& config);

// OpenMP over graphs. jobs <= 0 means the runtime default.
std::vector<CellComplex> lift_dataset(const std::vector<GraphTopology>& graphs,
                                      const LiftConfig& config, int jobs = 0);

}  // namespace canet
