#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace canet {

// One 2-cell: a chordless cycle stored as a canonical vertex sequence
// (minimal vertex first, then its smaller ring neighbour), together with
// the edge ids it traverses and a per-edge orientation sign. The sign is
// +1 when the ring walks an edge tail->head in the canonical low->high
// direction, -1 otherwise.
struct Ring {
  std::vector<int> vertices;
  std::vector<int> edge_ids;
  std::vector<int> signs;
};

// Face-poset view of a regular cell complex of order two. Edges are the
// canonical (u, v) pairs with u < v, sorted lexicographically. Immutable
// once built; safe to share across threads.
struct CellComplex {
  int num_vertices = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<Ring> rings;

  // Per edge: the Definition-4 adjacencies, ascending, irreflexive.
  std::vector<std::vector<int>> lower_nbrs;   // share a boundary vertex
  std::vector<std::vector<int>> upper_nbrs;   // co-face a common ring
  std::vector<std::vector<int>> cofaces;      // rings containing the edge

  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_rings() const { return static_cast<int>(rings.size()); }
};

// Sparse +-1 incidence matrices in coordinate form. b1 is V x E with one
// -1 (tail) and one +1 (head) per column; b2 is E x P with the stored
// ring signs. b1 * b2 = 0 in integer arithmetic.
struct SignedIncidence {
  int vertex_count = 0;
  int edge_count = 0;
  int ring_count = 0;
  std::vector<std::array<int, 3>> b1;  // (vertex, edge, sign)
  std::vector<std::array<int, 3>> b2;  // (edge, ring, sign)

  std::vector<std::vector<long long>> b1_dense() const;
  std::vector<std::vector<long long>> b2_dense() const;
};

struct Laplacians {
  std::vector<std::vector<long long>> l0;       // B1 B1^T
  std::vector<std::vector<long long>> l1_down;  // B1^T B1
  std::vector<std::vector<long long>> l1_up;    // B2 B2^T
  std::vector<std::vector<long long>> l2;       // B2^T B2
};

// Fills lower_nbrs / upper_nbrs / cofaces from edges and rings.
void populate_neighborhoods(CellComplex& complex);

SignedIncidence build_incidence(const CellComplex& complex);

Laplacians laplacians(const SignedIncidence& inc);

// Rebuilds a complex on a subset of edges: vertices are kept, rings that
// lose any edge are dropped, neighborhoods are recomputed from scratch.
// kept_edges must be ascending original edge ids.
CellComplex restrict_to_edges(const CellComplex& complex,
                              const std::vector<int>& kept_edges);

// Integer product check B1 * B2 == 0.
bool boundary_square_is_zero(const SignedIncidence& inc);

}  // namespace canet
