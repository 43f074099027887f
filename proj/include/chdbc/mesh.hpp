#ifndef CHDBC_MESH_HPP
#define CHDBC_MESH_HPP

#include <array>
#include <stdexcept>
#include <vector>

namespace chdbc {

struct Node {
  double x, y;
};

struct Tri {
  std::array<int, 3> v;  // vertex ids, counterclockwise
};

// Friedrichs-Keller triangulation of the unit square: a uniform n x n grid of
// cells, each split along its lower-left -> upper-right diagonal into two
// counterclockwise triangles. Nodes are numbered y-major (row by row, x
// fastest), so node (i, j) has id j*(n+1)+i and sits at (i*h, j*h).
//
// The boundary curve is kept as one closed cycle walked counterclockwise
// starting at the origin corner. Surface fields live on the compressed
// boundary indexing 0..4n-1 given by that walk; bnd_of_node maps a bulk node
// id to its boundary-local index (-1 in the interior).
struct Mesh {
  int n_cells = 0;
  double h = 0.0;
  std::vector<Node> nodes;
  std::vector<Tri> tris;
  std::vector<int> boundary_nodes;                    // bulk ids, cycle order
  std::vector<std::array<int, 2>> boundary_segments;  // bulk id pairs, closing segment last
  std::vector<char> chi;                              // 1 iff node lies on the boundary
  std::vector<int> bnd_of_node;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_bnd() const { return static_cast<int>(boundary_nodes.size()); }
};

inline Mesh make_unit_square_mesh(int n_cells) {
  if (n_cells < 1) throw std::invalid_argument("make_unit_square_mesh: n_cells must be >= 1");
  Mesh m;
  m.n_cells = n_cells;
  m.h = 1.0 / n_cells;
  const int n = n_cells;
  const int np = n + 1;
  auto vid = [np](int i, int j) { return j * np + i; };

  m.nodes.reserve(static_cast<size_t>(np) * np);
  for (int j = 0; j < np; ++j)
    for (int i = 0; i < np; ++i) m.nodes.push_back({i * m.h, j * m.h});

  m.tris.reserve(static_cast<size_t>(2) * n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      m.tris.push_back({{v00, v10, v11}});
      m.tris.push_back({{v00, v11, v01}});
    }

  // Counterclockwise boundary walk: bottom, right, top, left. Each edge
  // contributes n nodes; the next edge's first node closes the previous one.
  m.boundary_nodes.reserve(static_cast<size_t>(4) * n);
  for (int i = 0; i < n; ++i) m.boundary_nodes.push_back(vid(i, 0));
  for (int j = 0; j < n; ++j) m.boundary_nodes.push_back(vid(n, j));
  for (int i = n; i > 0; --i) m.boundary_nodes.push_back(vid(i, n));
  for (int j = n; j > 0; --j) m.boundary_nodes.push_back(vid(0, j));

  const int nb = m.n_bnd();
  m.boundary_segments.reserve(nb);
  for (int k = 0; k < nb; ++k)
    m.boundary_segments.push_back({m.boundary_nodes[k], m.boundary_nodes[(k + 1) % nb]});

  m.chi.assign(m.nodes.size(), 0);
  m.bnd_of_node.assign(m.nodes.size(), -1);
  for (int k = 0; k < nb; ++k) {
    m.chi[m.boundary_nodes[k]] = 1;
    m.bnd_of_node[m.boundary_nodes[k]] = k;
  }
  return m;
}

inline double signed_area(const Mesh& m, const Tri& t) {
  const Node& a = m.nodes[t.v[0]];
  const Node& b = m.nodes[t.v[1]];
  const Node& c = m.nodes[t.v[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

}  // namespace chdbc

#endif
