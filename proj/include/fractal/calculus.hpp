// Functions on the vertex sets V_m: energies, harmonic extension, Dirichlet
// and Poisson problems, the discrete Laplacian, exact spline quadrature and
// the Green's function built from the level-1 kernel.
//
// Sign convention throughout: Δ is the measure Laplacian and the Poisson
// problem is -Δu = g.
#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <memory>
#include <string>
#include <vector>

#include "fractal/structure.hpp"
#include "fractal/topology.hpp"

namespace fractal {

/// Values on V_m indexed by vertex id. Restriction to V_k is truncation.
template <class T>
struct GridFunction {
  int level = 0;
  Vec<T> values;

  const T& operator[](VertexId v) const { return values[v.index]; }
  T& operator[](VertexId v) { return values[v.index]; }
  std::size_t size() const { return values.size(); }
  GridFunction restrict_to(const Topology& topo, int m) const;
};

struct LevelMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Every (word, corner) naming x at its own level (one per side).
std::vector<Address> all_addresses(const Topology& topo, VertexId x);
/// (u, c) with x = F_w F_u v_c, when x lies in the cell F_w K.
std::optional<Address> relative_address(const Topology& topo, VertexId x, const Word& w);
/// Level-m cells containing x.
std::vector<Word> cells_containing(const Topology& topo, VertexId x, int level);
/// Boundary values of h ∘ F_u for the harmonic h with V_0 values `values`.
template <class T>
Vec<T> walk_harmonic(const Structure<T>& s, Vec<T> values, const Word& u);

/// r_w and mu_w of every level-m cell, in cell order.
template <class T>
Vec<T> cell_resistance_scales(const Structure<T>& s, int m);
template <class T>
Vec<T> cell_measures(const Structure<T>& s, int m);

/// Harmonic function with the given V_0 values, sampled on V_m.
template <class T>
GridFunction<T> harmonic_extend(const Structure<T>& s, const Vec<T>& boundary, int m);

/// Piecewise harmonic refinement of f (harmonic in each level-f.level cell) to V_m.
template <class T>
GridFunction<T> refine(const Structure<T>& s, const GridFunction<T>& f, int m);

/// E_m(f, g) with r_w-renormalized conductances.
template <class T>
T energy(const Structure<T>& s, const GridFunction<T>& f, const GridFunction<T>& g);

/// Exact integral of the piecewise harmonic interpolant of f.
template <class T>
T integrate(const Structure<T>& s, const GridFunction<T>& f);

/// Exact integral of the product of two piecewise harmonic interpolants.
template <class T>
T integrate_product(const Structure<T>& s, const GridFunction<T>& f, const GridFunction<T>& g);

/// Tent integrals: entry x is the integral of the level-m tent at x.
template <class T>
Vec<T> tent_integrals(const Structure<T>& s, int m);

/// Load vector: entry x is the integral of (tent at x) * g for piecewise harmonic g.
template <class T>
Vec<T> load_vector(const Structure<T>& s, const GridFunction<T>& g);

/// Stiffness action (K f)_x = sum_y c^{(m)}_xy (f(x) - f(y)); at V_0 this is
/// the level-m normal difference.
template <class T>
Vec<T> stiffness_apply(const Structure<T>& s, const GridFunction<T>& f);

/// Pointwise discrete Laplacian at an interior vertex of V_m.
template <class T>
T discrete_laplacian(const Structure<T>& s, const GridFunction<T>& f, VertexId x);

/// Discrete Laplacian at every interior vertex (zero on V_0).
template <class T>
GridFunction<T> discrete_laplacian(const Structure<T>& s, const GridFunction<T>& f);

enum class PoissonMethod { sparse, green };

/// Galerkin solution of -Δu = g on V_{g.level} with the given V_0 data.
/// g is read as its piecewise harmonic interpolant, and for such g the
/// vertex values are exact. The sparse path factors the stiffness matrix
/// (binary64 only); the green path sums the Green's series cell by cell.
template <class T>
GridFunction<T> solve_poisson(const Structure<T>& s, const GridFunction<T>& g, const Vec<T>& boundary,
                              PoissonMethod method = PoissonMethod::sparse);

/// Truncated Green's series sum_{|w| < M} r_w Psi(F_w^{-1}x, F_w^{-1}z), exact for x, z in V_M.
template <class T>
T green_partial(const Structure<T>& s, VertexId x, VertexId z, int M);

/// |E_m(u,v) - (-∫ v Δ_m u dμ + sum_{V_0} v ∂_n u)|.
template <class T>
double gauss_green_residual(const Structure<T>& s, const GridFunction<T>& u, const GridFunction<T>& v);

/// a_ik as a level-1 grid function (template point p is vertex p).
template <class T>
GridFunction<T> a_spline_grid(const Structure<T>& s, int corner, int k);

/// Values of f ∘ F_u^{-1} on V_m (zero off F_u K), f piecewise harmonic at
/// level f.level with f.level + |u| <= m.
template <class T>
GridFunction<T> compose_inverse(const Structure<T>& s, const GridFunction<T>& f, const Word& u, int m);

/// Level-1 values U_b(p) of the solutions of -ΔU_b = H_b with zero boundary data.
template <class T>
Mat<T> local_poisson_basis(const Structure<T>& s);

/// f with -Δf = g, g piecewise harmonic at level L, and harmonic-extension
/// boundary data. Evaluates exactly at every vertex of V_* by descending the
/// cell tree from the level-L solution.
template <class T>
class PoissonFn {
 public:
  PoissonFn(std::shared_ptr<const Structure<T>> s, Vec<T> boundary, GridFunction<T> g,
            PoissonMethod method = PoissonMethod::sparse);
  /// Harmonic function with the given V_0 values.
  static PoissonFn harmonic(std::shared_ptr<const Structure<T>> s, Vec<T> boundary);
  /// -Δf = c with the given V_0 values.
  static PoissonFn constant_load(std::shared_ptr<const Structure<T>> s, const T& c, Vec<T> boundary);
  /// Assembled from an already-solved level-L grid (values exact at V_L).
  static PoissonFn from_solution(std::shared_ptr<const Structure<T>> s, GridFunction<T> u, GridFunction<T> g);

  const Structure<T>& structure() const { return *s_; }
  std::shared_ptr<const Structure<T>> structure_ptr() const { return s_; }
  int load_level() const { return g_.level; }
  const GridFunction<T>& load() const { return g_; }
  const GridFunction<T>& solution() const { return u_; }

  T value(VertexId x) const;
  /// (f|_{F_w V_0}, g|_{F_w V_0}).
  std::pair<Vec<T>, Vec<T>> cell_data(const Word& w) const;
  Vec<T> cell_values(const Word& w) const { return cell_data(w).first; }
  GridFunction<T> sample(int m) const;

  /// Linear combinations (same structure; loads are brought to a common level).
  PoissonFn operator+(const PoissonFn& o) const;
  PoissonFn scaled(const T& c) const;

 private:
  PoissonFn() = default;
  std::shared_ptr<const Structure<T>> s_;
  GridFunction<T> g_, u_;
  Mat<T> basis_;
};

/// Piecewise harmonic function on a union of same-level cells.
template <class T>
struct CellPatch {
  int level = 0;
  std::vector<Word> cells;
  std::vector<Vec<T>> corner_values;  // per cell, N0 values

  /// Value at a vertex inside the patch (evaluated through the cell it lies in).
  std::optional<T> value(const Structure<T>& s, VertexId x) const;
};

/// Boundary of a union of same-level cells: corners in V_0 or shared with an outside cell.
std::vector<VertexId> patch_boundary(const Topology& topo, const std::vector<Word>& cells);

/// Harmonic function on the union of cells with prescribed values on its boundary.
template <class T>
CellPatch<T> solve_dirichlet(const Structure<T>& s, const std::vector<Word>& cells,
                             const std::function<T(VertexId)>& boundary);

// ---------------------------------------------------------------- I/O

/// CSV with columns word,corner,level,value (1-based letters and corners).
template <class T>
void write_csv(std::ostream& os, const Topology& topo, const GridFunction<T>& f);
template <class T>
GridFunction<T> read_csv(std::istream& is, const Topology& topo);

/// Function mini-language: "harmonic:a,b,c", "hjk:j,k", "poisson:const=1", "zero".
template <class T>
PoissonFn<T> parse_function(std::shared_ptr<const Structure<T>> s, const std::string& text);

}  // namespace fractal
