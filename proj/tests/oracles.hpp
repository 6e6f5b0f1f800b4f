// Reference computations that avoid the library's own solvers: dense Eigen
// algebra on graphs assembled straight from the cell tables.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fractal/presets.hpp"

namespace oracle {

using fractal::Topology;

/// Graph Laplacian of level m (cell edges weighted by c_ab / r_w), as a dense matrix.
inline Eigen::MatrixXd graph_laplacian(const fractal::Structure<double>& s, int m) {
  const Topology& topo = s.topology();
  const auto n = static_cast<Eigen::Index>(topo.vertex_count(m));
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  const auto& cells = topo.cells(m);
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    fractal::Word w = topo.cell_word(c, m);
    double rw = 1;
    for (int letter : w.letters()) rw *= s.r(letter);
    const std::uint32_t* v = cells.cell(c);
    for (int a = 0; a < s.N0(); ++a)
      for (int b = a + 1; b < s.N0(); ++b) {
        double g = s.conductance(a, b) / rw;
        l(v[a], v[a]) += g;
        l(v[b], v[b]) += g;
        l(v[a], v[b]) -= g;
        l(v[b], v[a]) -= g;
      }
  }
  return l;
}

/// Harmonic extension of V_0 data to V_m by minimizing the level-m energy.
inline Eigen::VectorXd harmonic(const fractal::Structure<double>& s, const std::vector<double>& boundary, int m) {
  Eigen::MatrixXd l = graph_laplacian(s, m);
  const Eigen::Index n = l.rows(), n0 = s.N0();
  Eigen::VectorXd b(n0);
  for (Eigen::Index i = 0; i < n0; ++i) b(i) = boundary[i];
  Eigen::VectorXd inner = l.bottomRightCorner(n - n0, n - n0).ldlt().solve(-l.bottomLeftCorner(n - n0, n0) * b);
  Eigen::VectorXd out(n);
  out << b, inner;
  return out;
}

/// Mass-lumped solution of -Δu = 1 with zero boundary on SG at level m:
/// (3/2) 5^m sum_{y~x} (u(x) - u(y)) = 1.
inline Eigen::VectorXd sg_lumped_poisson(const fractal::Structure<double>& s, int m) {
  Eigen::MatrixXd l = graph_laplacian(s, m);  // conductance 5^m per edge
  const Eigen::Index n = l.rows();
  // ∫ψ_x = 2 · 3^{-m} / 3 for interior x; Δ_m = L / ∫ψ_x.
  double mass = 2.0 / 3.0 * std::pow(3.0, -m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n - 3, mass);
  Eigen::VectorXd inner = l.bottomRightCorner(n - 3, n - 3).ldlt().solve(rhs);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  out.tail(n - 3) = inner;
  return out;
}

inline std::vector<double> eigenvalues(const fractal::Mat<double>& m) {
  Eigen::MatrixXd a(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) a(i, j) = m(i, j);
  Eigen::VectorXcd ev = a.eigenvalues();
  std::vector<double> out;
  for (Eigen::Index i = 0; i < ev.size(); ++i) out.push_back(ev(i).real());
  std::sort(out.begin(), out.end(), [](double x, double y) { return std::fabs(x) > std::fabs(y); });
  return out;
}

}  // namespace oracle
