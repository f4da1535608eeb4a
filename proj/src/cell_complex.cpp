#include "canet/cell_complex.hpp"

#include <algorithm>
#include <map>

#include "canet/common.hpp"

namespace canet {

namespace {

std::vector<std::vector<long long>> coo_to_dense(
    const std::vector<std::array<int, 3>>& coo, int rows, int cols) {
  std::vector<std::vector<long long>> dense(
      rows, std::vector<long long>(cols, 0));
  for (const auto& [r, c, v] : coo) dense[r][c] += v;
  return dense;
}

std::vector<std::vector<long long>> matmul_ll(
    const std::vector<std::vector<long long>>& a,
    const std::vector<std::vector<long long>>& b) {
  size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), k = b.size();
  std::vector<std::vector<long long>> out(n, std::vector<long long>(m, 0));
  for (size_t i = 0; i < n; ++i)
    for (size_t p = 0; p < k; ++p) {
      long long aip = a[i][p];
      if (aip == 0) continue;
      for (size_t j = 0; j < m; ++j) out[i][j] += aip * b[p][j];
    }
  return out;
}

std::vector<std::vector<long long>> transpose_ll(
    const std::vector<std::vector<long long>>& a) {
  size_t n = a.size(), m = a.empty() ? 0 : a[0].size();
  std::vector<std::vector<long long>> out(m, std::vector<long long>(n, 0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < m; ++j) out[j][i] = a[i][j];
  return out;
}

void sort_unique(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::vector<std::vector<long long>> SignedIncidence::b1_dense() const {
  return coo_to_dense(b1, vertex_count, edge_count);
}

std::vector<std::vector<long long>> SignedIncidence::b2_dense() const {
  return coo_to_dense(b2, edge_count, ring_count);
}

void populate_neighborhoods(CellComplex& complex) {
  int e_count = complex.num_edges();
  complex.lower_nbrs.assign(e_count, {});
  complex.upper_nbrs.assign(e_count, {});
  complex.cofaces.assign(e_count, {});

  // Lower adjacency: edges sharing a vertex. Bucket edge ids per vertex,
  // then pair up within each bucket.
  std::vector<std::vector<int>> at_vertex(complex.num_vertices);
  for (int e = 0; e < e_count; ++e) {
    auto [u, v] = complex.edges[e];
    if (u < 0 || v >= complex.num_vertices || u >= v)
      throw ContractViolation("edge " + std::to_string(e) +
                              " is not canonical (u < v within range)");
    at_vertex[u].push_back(e);
    at_vertex[v].push_back(e);
  }
  for (const auto& bucket : at_vertex)
    for (size_t i = 0; i < bucket.size(); ++i)
      for (size_t j = i + 1; j < bucket.size(); ++j) {
        complex.lower_nbrs[bucket[i]].push_back(bucket[j]);
        complex.lower_nbrs[bucket[j]].push_back(bucket[i]);
      }

  // Upper adjacency: edges bounding a common ring; also record cofaces.
  for (int p = 0; p < complex.num_rings(); ++p) {
    const auto& ring = complex.rings[p];
    for (int e : ring.edge_ids) complex.cofaces[e].push_back(p);
    for (size_t i = 0; i < ring.edge_ids.size(); ++i)
      for (size_t j = i + 1; j < ring.edge_ids.size(); ++j) {
        complex.upper_nbrs[ring.edge_ids[i]].push_back(ring.edge_ids[j]);
        complex.upper_nbrs[ring.edge_ids[j]].push_back(ring.edge_ids[i]);
      }
  }

  for (int e = 0; e < e_count; ++e) {
    sort_unique(complex.lower_nbrs[e]);
    sort_unique(complex.upper_nbrs[e]);
    sort_unique(complex.cofaces[e]);
  }
}

SignedIncidence build_incidence(const CellComplex& complex) {
  SignedIncidence inc;
  inc.vertex_count = complex.num_vertices;
  inc.edge_count = complex.num_edges();
  inc.ring_count = complex.num_rings();
  inc.b1.reserve(2 * inc.edge_count);
  for (int e = 0; e < inc.edge_count; ++e) {
    auto [u, v] = complex.edges[e];
    inc.b1.push_back({u, e, -1});  // tail
    inc.b1.push_back({v, e, +1});  // head
  }
  for (int p = 0; p < inc.ring_count; ++p) {
    const auto& ring = complex.rings[p];
    if (ring.edge_ids.size() != ring.signs.size())
      throw ContractViolation("ring " + std::to_string(p) +
                              " has mismatched edge/sign lengths");
    for (size_t i = 0; i < ring.edge_ids.size(); ++i)
      inc.b2.push_back({ring.edge_ids[i], p, ring.signs[i]});
  }
  return inc;
}

Laplacians laplacians(const SignedIncidence& inc) {
  auto b1 = inc.b1_dense();
  auto b2 = inc.b2_dense();
  auto b1t = transpose_ll(b1);
  auto b2t = transpose_ll(b2);
  Laplacians lap;
  lap.l0 = matmul_ll(b1, b1t);
  lap.l1_down = matmul_ll(b1t, b1);
  lap.l1_up = matmul_ll(b2, b2t);
  lap.l2 = matmul_ll(b2t, b2);
  return lap;
}

bool boundary_square_is_zero(const SignedIncidence& inc) {
  auto prod = matmul_ll(inc.b1_dense(), inc.b2_dense());
  for (const auto& row : prod)
    for (long long v : row)
      if (v != 0) return false;
  return true;
}

CellComplex restrict_to_edges(const CellComplex& complex,
                              const std::vector<int>& kept_edges) {
  std::vector<int> new_id(complex.num_edges(), -1);
  for (size_t i = 0; i < kept_edges.size(); ++i) {
    int e = kept_edges[i];
    if (e < 0 || e >= complex.num_edges())
      throw ContractViolation("kept edge id out of range: " +
                              std::to_string(e));
    if (i > 0 && kept_edges[i] <= kept_edges[i - 1])
      throw ContractViolation("kept edge ids must be strictly ascending");
    new_id[e] = static_cast<int>(i);
  }

  CellComplex out;
  out.num_vertices = complex.num_vertices;
  out.edges.reserve(kept_edges.size());
  for (int e : kept_edges) out.edges.push_back(complex.edges[e]);

  for (const auto& ring : complex.rings) {
    bool intact = std::all_of(ring.edge_ids.begin(), ring.edge_ids.end(),
                              [&](int e) { return new_id[e] >= 0; });
    if (!intact) continue;
    Ring kept = ring;
    for (int& e : kept.edge_ids) e = new_id[e];
    out.rings.push_back(std::move(kept));
  }

  populate_neighborhoods(out);
  return out;
}

}  // namespace canet
