#ifndef CHDBC_OPERATORS_HPP
#define CHDBC_OPERATORS_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "chdbc/mesh.hpp"

namespace chdbc {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// P1 operators on a Friedrichs-Keller mesh. Bulk operators have one row per
// node; surface operators live on the compressed boundary indexing of
// Mesh::boundary_nodes (a full-length surface mass would be singular, and all
// trace-space algebra happens on the cycle). Mass matrices are lumped and kept
// as their diagonals.
struct Operators {
  SpMat A;        // bulk stiffness
  Vec M;          // lumped bulk mass
  SpMat A_gamma;  // stiffness of the boundary cycle
  Vec M_gamma;    // lumped surface mass
};

inline Operators assemble_operators(const Mesh& mesh) {
  const int n = mesh.n_nodes();
  const int nb = mesh.n_bnd();
  Operators ops;

  // Bulk: exact per-triangle formulas for linear shape functions. With
  // vertices p0,p1,p2 and area T, grad(lambda_k) = (b_k, c_k) / (2T) where
  // b_k = y_{k+1} - y_{k+2}, c_k = x_{k+2} - x_{k+1} (indices mod 3).
  std::vector<Triplet> trip;
  trip.reserve(mesh.tris.size() * 9);
  ops.M = Vec::Zero(n);
  for (const Tri& t : mesh.tris) {
    const Node& p0 = mesh.nodes[t.v[0]];
    const Node& p1 = mesh.nodes[t.v[1]];
    const Node& p2 = mesh.nodes[t.v[2]];
    const double T = signed_area(mesh, t);
    const double b[3] = {p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
    const double c[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
    for (int k = 0; k < 3; ++k) {
      ops.M[t.v[k]] += T / 3.0;
      for (int l = 0; l < 3; ++l)
        trip.emplace_back(t.v[k], t.v[l], (b[k] * b[l] + c[k] * c[l]) / (4.0 * T));
    }
  }
  ops.A.resize(n, n);
  ops.A.setFromTriplets(trip.begin(), trip.end());

  // Surface: 1-D P1 on the closed boundary cycle.
  trip.clear();
  ops.M_gamma = Vec::Zero(nb);
  for (const auto& seg : mesh.boundary_segments) {
    const int ba = mesh.bnd_of_node[seg[0]];
    const int bb = mesh.bnd_of_node[seg[1]];
    const Node& pa = mesh.nodes[seg[0]];
    const Node& pb = mesh.nodes[seg[1]];
    const double len = std::abs(pb.x - pa.x) + std::abs(pb.y - pa.y);  // axis-aligned
    ops.M_gamma[ba] += 0.5 * len;
    ops.M_gamma[bb] += 0.5 * len;
    trip.emplace_back(ba, ba, 1.0 / len);
    trip.emplace_back(bb, bb, 1.0 / len);
    trip.emplace_back(ba, bb, -1.0 / len);
    trip.emplace_back(bb, ba, -1.0 / len);
  }
  ops.A_gamma.resize(nb, nb);
  ops.A_gamma.setFromTriplets(trip.begin(), trip.end());
  return ops;
}

inline double lumped_inner_product(const Vec& f, const Vec& g, const Vec& mass) {
  if (f.size() != g.size() || f.size() != mass.size())
    throw std::invalid_argument("lumped_inner_product: dimension mismatch");
  return (mass.array() * f.array() * g.array()).sum();
}

inline Vec restrict_to_boundary(const Mesh& mesh, const Vec& U) {
  if (U.size() != mesh.n_nodes())
    throw std::invalid_argument("restrict_to_boundary: bulk size mismatch");
  Vec r(mesh.n_bnd());
  for (int b = 0; b < mesh.n_bnd(); ++b) r[b] = U[mesh.boundary_nodes[b]];
  return r;
}

// MatrixMarket coordinate output, 1-based, full (general) storage. %.17g keeps
// the decimal rendering exact on round trip.
inline void write_matrix_market(std::ostream& out, const SpMat& A) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  char buf[96];
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%d %d %.17g\n", static_cast<int>(it.row()) + 1,
                    static_cast<int>(it.col()) + 1, it.value());
      out << buf;
    }
}

inline void write_matrix_market_diagonal(std::ostream& out, const Vec& d) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << d.size() << " " << d.size() << " " << d.size() << "\n";
  char buf[96];
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld %lld %.17g\n", static_cast<long long>(i) + 1,
                  static_cast<long long>(i) + 1, d[i]);
    out << buf;
  }
}

}  // namespace chdbc

#endif
