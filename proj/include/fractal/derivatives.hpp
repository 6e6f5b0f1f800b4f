// Vertex derivatives d_jk: limits of renormalized eigenvector pairings, their
// exact evaluation for harmonic splines and for solutions of -Δf = g,
// gradients with the junction compatibility condition, weak tangents and the
// h_m approximants.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fractal/calculus.hpp"

namespace fractal {

/// Printed alongside every derivative value: k >= 3 values depend on this scale.
extern const char* const kBetaConvention;

struct NotDifferentiable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Boundary values of a function on a cell F_w K.
template <class T>
using CellOracle = std::function<Vec<T>(const Word&)>;

/// Cell values of a piecewise harmonic grid function (harmonic in each level-f.level cell).
template <class T>
Vec<T> grid_cell_values(const Structure<T>& s, const GridFunction<T>& f, const Word& w);

struct Extrapolation {
  double limit = 0;
  double ratio = 0;
  double residual = 0;
  bool converged = false;
};

/// Fit v_m = L + A rho^m to the last four entries.
Extrapolation extrapolate(const std::vector<double>& values);

struct DerivativeEstimate {
  Side side;
  int k = 1;  // 0-based eigen index, printed as k+1
  std::vector<std::pair<int, double>> approximants;
  Extrapolation fit;
  std::optional<double> exact;  // closed-form value when available
  std::string convention = kBetaConvention;

  double value() const { return exact ? *exact : fit.limit; }
};

/// r_C^{-1} λ^{-m} β·f|_{F_C F_i^m V_0} for m = 0..m_max.
template <class T>
Vec<T> derivative_approximants(const Structure<T>& s, const CellOracle<T>& f, const Side& side, int k, int m_max);

/// Approximants for m = 0..m_max and their extrapolated limit. In binary64 the
/// fit stops at the depth where rounding, amplified by |λ_k|^{-m}, reaches 1e-10.
template <class T>
DerivativeEstimate derivative_sequence(const Structure<T>& s, const CellOracle<T>& f, const Side& side, int k,
                                       int m_max);

/// One-step evaluation for a function harmonic on F_C F_i^{m0} K, m0 = max(0, f.level - |C|).
template <class T>
T exact_harmonic_derivative(const Structure<T>& s, const GridFunction<T>& f, const Side& side, int k);

struct ExactDerivative {
  double value = 0;
  bool exists = true;  // false when the tail series diverges
};

/// Exact d_{jk} f(x) from one side for f with -Δf = g: the first pairing
/// minus the a_jk-weighted Laplacian series, whose tail past the load level
/// is summed through the eigen-decomposition of M_j.
template <class T>
ExactDerivative exact_derivative(const PoissonFn<T>& f, const Side& side, int k);

/// Same, returning the exact scalar (throws when the series diverges).
template <class T>
T exact_derivative_value(const PoissonFn<T>& f, const Side& side, int k);

struct GradientEntry {
  Side side;
  int k = 1;
  ExactDerivative exact;
  DerivativeEstimate sequence;
};

struct Gradient {
  VertexId x;
  double value = 0;
  bool junction = false;
  std::vector<GradientEntry> entries;
  double compatibility_residual = 0;
  bool differentiable = false;

  std::optional<double> get(const Side& side, int k) const;
};

template <class T>
Gradient gradient(const PoissonFn<T>& f, VertexId x, int m_max = 10, double tolerance = 1e-8);

struct WeakTangent {
  VertexId x;
  double value = 0;
  CellPatch<double> patch;  // harmonic on U_0(x)
  Gradient gradient;
};

/// Harmonic function on U_0(x) matching f(x) and df(x).
WeakTangent weak_tangent(const Structure<double>& s, const Gradient& g);
template <class T>
WeakTangent weak_tangent(const PoissonFn<T>& f, VertexId x, int m_max = 10);

/// Harmonic on U_m(x) with f's values on ∂U_m(x), extended harmonically to U_0(x).
template <class T>
CellPatch<T> hm_approximant(const Structure<T>& s, const std::function<T(VertexId)>& f, VertexId x, int m);

/// Derivatives of a harmonic patch at x from one of its cells.
template <class T>
T patch_derivative(const Structure<T>& s, const CellPatch<T>& p, const Side& side, int k);

/// sup over V_depth-vertices of each patch cell of |a - b| (same cells).
double patch_distance(const Structure<double>& s, const CellPatch<double>& a, const CellPatch<double>& b, int depth);

}  // namespace fractal
