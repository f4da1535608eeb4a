#include "canet/lifting.hpp"

#include <algorithm>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "canet/common.hpp"

namespace canet {

namespace {

// Canonical edge list: (min, max) pairs, sorted, deduplicated.
std::vector<std::pair<int, int>> canonical_edges(const GraphTopology& graph) {
  std::vector<std::pair<int, int>> out;
  out.reserve(graph.edges.size());
  for (auto [u, v] : graph.edges) {
    if (u == v)
      throw DataError("self-loop at vertex " + std::to_string(u));
    if (u < 0 || v < 0 || u >= graph.num_vertices || v >= graph.num_vertices)
      throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                      ") references a vertex outside 0.." +
                      std::to_string(graph.num_vertices - 1));
    out.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct CycleSearch {
  const std::vector<std::vector<int>>& adj;
  const std::vector<std::vector<bool>>& is_adj;
  int max_len;
  std::vector<std::vector<int>>& out;
  std::vector<int> path;
  std::vector<bool> on_path;

  // Extends the current path (rooted at s = path[0], second vertex
  // path[1]). Every vertex after path[1] is non-adjacent to s by
  // construction: a candidate adjacent to s closes the cycle instead of
  // being pushed, so longer cycles through it would carry the chord to s.
  void extend() {
    int s = path[0];
    int tail = path.back();
    for (int w : adj[tail]) {
      if (w <= s || on_path[w]) continue;
      // Chordless: w may touch the path only at the tail (and at s, which
      // closes the cycle).
      bool chord = false;
      for (size_t i = 1; i + 1 < path.size(); ++i)
        if (is_adj[w][path[i]]) {
          chord = true;
          break;
        }
      if (chord) continue;
      if (is_adj[w][s]) {
        // Orientation dedup: keep the traversal whose second vertex is
        // the smaller of s's two cycle neighbours.
        if (path.size() + 1 >= 3 && path[1] < w) {
          std::vector<int> cycle = path;
          cycle.push_back(w);
          out.push_back(std::move(cycle));
        }
      } else if (path.size() + 2 <= static_cast<size_t>(max_len)) {
        // Room for w plus at least the closing vertex.
        path.push_back(w);
        on_path[w] = true;
        extend();
        on_path[w] = false;
        path.pop_back();
      }
    }
  }
};

}  // namespace

std::vector<std::vector<int>> chordless_cycles(
    int num_vertices, const std::vector<std::pair<int, int>>& edges,
    int max_ring_size) {
  if (max_ring_size < 3)
    throw ConfigError("max ring size must be at least 3, got " +
                      std::to_string(max_ring_size));
  std::vector<std::vector<int>> adj(num_vertices);
  std::vector<std::vector<bool>> is_adj(
      num_vertices, std::vector<bool>(num_vertices, false));
  for (auto [u, v] : edges) {
    if (is_adj[u][v]) continue;
    is_adj[u][v] = is_adj[v][u] = true;
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());

  std::vector<std::vector<int>> cycles;
  CycleSearch search{adj, is_adj, max_ring_size, cycles, {}, {}};
  search.on_path.assign(num_vertices, false);
  for (int s = 0; s < num_vertices; ++s) {
    for (int v1 : adj[s]) {
      if (v1 <= s) continue;
      search.path = {s, v1};
      search.on_path[s] = search.on_path[v1] = true;
      search.extend();
      search.on_path[s] = search.on_path[v1] = false;
    }
  }
  std::sort(cycles.begin(), cycles.end());
  return cycles;
}

CellComplex lift_graph(const GraphTopology& graph, const LiftConfig& config) {
  CellComplex complex;
  complex.num_vertices = graph.num_vertices;
  complex.edges = canonical_edges(graph);

  std::map<std::pair<int, int>, int> edge_id;
  for (int e = 0; e < complex.num_edges(); ++e)
    edge_id[complex.edges[e]] = e;

  auto cycles = chordless_cycles(graph.num_vertices, complex.edges,
                                 config.max_ring_size);
  complex.rings.reserve(cycles.size());
  for (auto& cycle : cycles) {
    Ring ring;
    ring.vertices = std::move(cycle);
    size_t len = ring.vertices.size();
    for (size_t i = 0; i < len; ++i) {
      int a = ring.vertices[i];
      int b = ring.vertices[(i + 1) % len];
      ring.edge_ids.push_back(edge_id.at({std::min(a, b), std::max(a, b)}));
      ring.signs.push_back(a < b ? +1 : -1);
    }
    complex.rings.push_back(std::move(ring));
  }

  populate_neighborhoods(complex);
  return complex;
}

DatasetStats dataset_stats(const std::vector<CellComplex>& complexes) {
  DatasetStats stats;
  stats.num_graphs = static_cast<int>(complexes.size());
  if (complexes.empty()) return stats;
  std::map<int, long long> ring_totals;
  long long v_total = 0, e_total = 0;
  for (const auto& complex : complexes) {
    v_total += complex.num_vertices;
    e_total += complex.num_edges();
    for (const auto& ring : complex.rings)
      ++ring_totals[static_cast<int>(ring.vertices.size())];
  }
  double n = static_cast<double>(stats.num_graphs);
  stats.avg_vertices = static_cast<double>(v_total) / n;
  stats.avg_edges = static_cast<double>(e_total) / n;
  for (auto [size, count] : ring_totals)
    stats.avg_rings_by_size[size] = static_cast<double>(count) / n;
  return stats;
}

std::vector<CellComplex> lift_dataset_serial(
    const std::vector<GraphTopology>& graphs, const LiftConfig& config) {
  std::vector<CellComplex> out(graphs.size());
  for (size_t i = 0; i < graphs.size(); ++i)
    out[i] = lift_graph(graphs[i], config);
  return out;
}

std::vector<CellComplex> lift_dataset(const std::vector<GraphTopology>& graphs,
                                      const LiftConfig& config, int jobs) {
  std::vector<CellComplex> out(graphs.size());
#ifdef _OPENMP
  int threads = jobs > 0 ? jobs : omp_get_max_threads();
  // Each graph lifts into its own slot, so the result is independent of
  // the schedule and matches the serial reference bitwise.
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(graphs.size()); ++i)
    out[i] = lift_graph(graphs[i], config);
#else
  (void)jobs;
  for (size_t i = 0; i < graphs.size(); ++i)
    out[i] = lift_graph(graphs[i], config);
#endif
  return out;
}

}  // namespace canet
