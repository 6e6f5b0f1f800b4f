#include "fractal/derivatives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace fractal {

const char* const kBetaConvention =
    "beta_j2 from the conductance formula; beta_jk (k>=3) scaled to max|entry| = 1 with first nonzero entry "
    "positive; alpha is the dual basis";

template <class T>
Vec<T> grid_cell_values(const Structure<T>& s, const GridFunction<T>& f, const Word& w) {
  const Topology& topo = s.topology();
  Word head = w.prefix(static_cast<std::size_t>(f.level));
  auto corners = topo.cell_corners(head);
  Vec<T> v(s.N0());
  for (int a = 0; a < s.N0(); ++a) v[a] = f[corners[a]];
  return walk_harmonic(s, v, w.suffix_from(head.size()));
}

Extrapolation extrapolate(const std::vector<double>& values) {
  Extrapolation out;
  if (values.empty()) return out;
  out.limit = values.back();
  if (values.size() < 3) return out;
  std::size_t n = std::min<std::size_t>(4, values.size());
  std::vector<double> v(values.end() - static_cast<long>(n), values.end());
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < n; ++i) d.push_back(v[i + 1] - v[i]);
  double scale = 0;
  for (double x : v) scale = std::max(scale, std::fabs(x));
  double dmax = 0;
  for (double x : d) dmax = std::max(dmax, std::fabs(x));
  if (dmax <= 1e-10 * std::max(1.0, scale)) {  // flat up to rounding
    out.converged = true;
    return out;
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    num += d[i + 1] * d[i];
    den += d[i] * d[i];
  }
  out.ratio = den > 0 ? num / den : 0;
  if (std::fabs(out.ratio) < 1) out.limit = v.back() + d.back() * out.ratio / (1 - out.ratio);
  // Residual of the geometric model with the fitted ratio.
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double basis = std::pow(out.ratio, static_cast<double>(i) - static_cast<double>(n - 1));
    sa += basis * (v[i] - out.limit);
    sb += basis * basis;
  }
  double amp = sb > 0 ? sa / sb : 0;
  for (std::size_t i = 0; i < n; ++i) {
    double basis = std::pow(out.ratio, static_cast<double>(i) - static_cast<double>(n - 1));
    out.residual = std::max(out.residual, std::fabs(out.limit + amp * basis - v[i]));
  }
  out.converged = std::fabs(out.ratio) < 0.95;
  return out;
}

namespace {

template <class T>
T cell_r(const Structure<T>& s, const Word& w) {
  T r(1);
  for (int i : w.letters()) r *= s.r(i);
  return r;
}

template <class T>
T cell_mu(const Structure<T>& s, const Word& w) {
  T m(1);
  for (int i : w.letters()) m *= s.mu(i);
  return m;
}

template <class T>
T ipow(T x, int n) {
  T out(1);
  for (int i = 0; i < n; ++i) out *= x;
  return out;
}

}  // namespace

template <class T>
Vec<T> derivative_approximants(const Structure<T>& s, const CellOracle<T>& f, const Side& side, int k, int m_max) {
  const auto& e = s.eigen(side.corner);
  if (k < 1 || k >= s.N0()) throw std::invalid_argument("derivative index out of range");
  const int fm = s.topology().fixed_map(side.corner);
  const Vec<T> beta = e.beta_row(k);
  const T rc = cell_r(s, side.cell);
  Vec<T> out;
  Word w = side.cell;
  T lam_pow(1);
  for (int m = 0; m <= m_max; ++m) {
    out.push_back(dot(beta, f(w)) / (rc * lam_pow));
    w = w + fm;
    lam_pow *= e.lambda[k];
  }
  return out;
}

template <class T>
DerivativeEstimate derivative_sequence(const Structure<T>& s, const CellOracle<T>& f, const Side& side, int k,
                                       int m_max) {
  DerivativeEstimate est;
  est.side = side;
  est.k = k;
  Vec<T> a = derivative_approximants(s, f, side, k, m_max);
  std::vector<double> v;
  for (int m = 0; m <= m_max; ++m) {
    est.approximants.emplace_back(m, to_double(a[m]));
    v.push_back(to_double(a[m]));
  }
  // In binary64 the pairing loses about eps·|λ|^{-m}; fit only where that stays below 1e-8.
  std::size_t use = v.size();
  if constexpr (!Num<T>::exact) {
    double lam = std::fabs(to_double(s.eigen(side.corner).lambda[k]));
    if (lam > 0 && lam < 1) {
      double cap = std::log(1e-10 / std::numeric_limits<double>::epsilon()) / std::log(1 / lam);
      use = std::min(use, static_cast<std::size_t>(std::max(4.0, std::floor(cap) + 1)));
    }
  }
  est.fit = extrapolate(std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(use)));
  return est;
}

template <class T>
T exact_harmonic_derivative(const Structure<T>& s, const GridFunction<T>& f, const Side& side, int k) {
  const auto& e = s.eigen(side.corner);
  const int fm = s.topology().fixed_map(side.corner);
  int m0 = std::max(0, f.level - static_cast<int>(side.cell.size()));
  Word d = side.cell + Word::repeat(fm, static_cast<std::size_t>(m0));
  return dot(e.beta_row(k), grid_cell_values(s, f, d)) / (cell_r(s, side.cell) * ipow(e.lambda[k], m0));
}

namespace {

// Series data for one (corner, k): A_b = ∫ a H_b and the eigen-coefficients
// (A·α_q) for the closed-form tail.
template <class T>
struct SplineMoments {
  GridFunction<T> spline;
  Vec<T> a_dot_h;
  Vec<T> a_dot_alpha;
};

template <class T>
SplineMoments<T> spline_moments(const Structure<T>& s, int corner, int k) {
  SplineMoments<T> out;
  out.spline = a_spline_grid(s, corner, k);
  const int n0 = s.N0();
  out.a_dot_h.assign(n0, T(0));
  for (int b = 0; b < n0; ++b) {
    Vec<T> e(n0, T(0));
    e[b] = T(1);
    out.a_dot_h[b] = integrate_product(s, out.spline, harmonic_extend(s, e, 1));
  }
  const auto& eig = s.eigen(corner);
  for (int q = 0; q < n0; ++q) out.a_dot_alpha.push_back(dot(out.a_dot_h, eig.alpha_row(q)));
  return out;
}

template <class T>
bool negligible(const T& x, double scale) {
  if constexpr (Num<T>::exact) {
    (void)scale;
    return sgn(x) == 0;
  } else {
    return std::fabs(x) <= 1e-11 * scale;
  }
}

// Returns (value, exists). Value is r_C^{-1}β·f|_{F_C V_0} - Σ_n (r/λ)^n I_n with
// I_n = ∫_{F_D K} a∘F_D^{-1} Δf dμ, D = C i^n, Δf = -g.
template <class T>
std::pair<T, bool> exact_derivative_impl(const PoissonFn<T>& f, const Side& side, int k) {
  const Structure<T>& s = f.structure();
  const Topology& topo = s.topology();
  const auto& eig = s.eigen(side.corner);
  if (k < 1 || k >= s.N0()) throw std::invalid_argument("derivative index out of range");
  const int n0 = s.N0(), fm = topo.fixed_map(side.corner), L = f.load_level();
  const T lam = eig.lambda[k], r = s.r(fm), mu = s.mu(fm);
  const Word& c = side.cell;
  T value = dot(eig.beta_row(k), f.cell_values(c)) / cell_r(s, c);

  SplineMoments<T> mom = spline_moments(s, side.corner, k);
  const Mat<T>& q = s.harmonic_mass();
  const GridFunction<T>& g = f.load();

  // Cells coarser than the load level: integrate on the grid.
  int n = 0;
  T factor(1);  // (r/λ)^n
  for (; static_cast<int>(c.size()) + n < L; ++n) {
    Word d = c + Word::repeat(fm, static_cast<std::size_t>(n));
    int depth = L - static_cast<int>(d.size());
    GridFunction<T> a = refine(s, mom.spline, depth);
    const CellTable& local = topo.cells(depth);
    const CellTable& global = topo.cells(L);
    Vec<T> mloc = cell_measures(s, depth);
    T md = cell_mu(s, d);
    std::uint64_t first = topo.cell_index(d) * topo.cell_count(depth);
    T integral(0);
    for (std::size_t lc = 0; lc < local.cell_count(); ++lc) {
      const std::uint32_t* lcc = local.cell(lc);
      const std::uint32_t* gcc = global.cell(first + lc);
      T v(0);
      for (int aa = 0; aa < n0; ++aa) {
        if (Num<T>::is_zero(a.values[lcc[aa]], 0.0)) continue;
        T row(0);
        for (int b = 0; b < n0; ++b) row += q(aa, b) * g.values[gcc[b]];
        v += a.values[lcc[aa]] * row;
      }
      integral += mloc[lc] * v;
    }
    // Δf = -g.
    value += factor * md * integral;
    factor *= r / lam;
  }
  // Tail: D = D0 i^t with g harmonic on F_{D0} K.
  Word d0 = c + Word::repeat(fm, static_cast<std::size_t>(n));
  Vec<T> g0 = f.cell_data(d0).second;
  T md0 = cell_mu(s, d0);
  double scale = 0;
  for (const auto& x : mom.a_dot_h) scale = std::max(scale, std::fabs(to_double(x)));
  double gscale = 0;
  for (const auto& x : g0) gscale = std::max(gscale, std::fabs(to_double(x)));
  scale *= std::max(gscale, 1e-300);
  bool exists = true;
  for (int qq = 0; qq < n0; ++qq) {
    T coef = mom.a_dot_alpha[qq] * dot(eig.beta_row(qq), g0);
    if (negligible(coef, scale)) continue;
    T ratio = r * mu * eig.lambda[qq] / lam;
    if (std::fabs(to_double(ratio)) >= 1 - 1e-12) {
      exists = false;
      continue;
    }
    value += factor * md0 * coef / (T(1) - ratio);
  }
  return {value, exists};
}

}  // namespace

template <class T>
ExactDerivative exact_derivative(const PoissonFn<T>& f, const Side& side, int k) {
  auto [v, ok] = exact_derivative_impl(f, side, k);
  ExactDerivative out;
  out.exists = ok;
  out.value = ok ? to_double(v) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

template <class T>
T exact_derivative_value(const PoissonFn<T>& f, const Side& side, int k) {
  auto [v, ok] = exact_derivative_impl(f, side, k);
  if (!ok) throw NotDifferentiable("derivative series diverges");
  return v;
}

std::optional<double> Gradient::get(const Side& side, int k) const {
  for (const auto& e : entries)
    if (e.side == side && e.k == k && e.exact.exists) return e.exact.value;
  return std::nullopt;
}

template <class T>
Gradient gradient(const PoissonFn<T>& f, VertexId x, int m_max, double tolerance) {
  const Structure<T>& s = f.structure();
  s.require_nondegenerate();
  const Topology& topo = s.topology();
  Gradient out;
  out.x = x;
  out.value = to_double(f.value(x));
  auto sides = topo.sides(x);
  out.junction = sides.size() > 1;
  CellOracle<T> oracle = [&f](const Word& w) { return f.cell_values(w); };
  bool ok = true;
  double compat = 0;
  for (const Side& side : sides)
    for (int k = 1; k < s.N0(); ++k) {
      GradientEntry e;
      e.side = side;
      e.k = k;
      e.exact = exact_derivative(f, side, k);
      e.sequence = derivative_sequence(s, oracle, side, k, m_max);
      if (e.exact.exists) e.sequence.exact = e.exact.value;
      ok = ok && e.exact.exists;
      if (k == 1) compat += e.exact.value;
      out.entries.push_back(std::move(e));
    }
  out.compatibility_residual = out.junction ? compat : 0.0;
  out.differentiable = ok && (!out.junction || std::fabs(compat) < tolerance);
  return out;
}

WeakTangent weak_tangent(const Structure<double>& s, const Gradient& g) {
  if (!g.differentiable) throw NotDifferentiable("function is not differentiable at " + s.topology().describe(g.x));
  WeakTangent t;
  t.x = g.x;
  t.value = g.value;
  t.gradient = g;
  const int n0 = s.N0();
  auto sides = s.topology().sides(g.x);
  t.patch.level = sides.empty() ? 0 : static_cast<int>(sides.front().cell.size());
  for (const Side& side : sides) {
    const auto& e = s.eigen(side.corner);
    Vec<double> v(n0, g.value);
    double rc = 1;
    for (int i : side.cell.letters()) rc *= s.r(i);
    for (int k = 1; k < n0; ++k) {
      double d = *g.get(side, k);
      for (int l = 0; l < n0; ++l) v[l] += rc * d * e.alpha(k, l);
    }
    t.patch.cells.push_back(side.cell);
    t.patch.corner_values.push_back(v);
  }
  return t;
}

template <class T>
WeakTangent weak_tangent(const PoissonFn<T>& f, VertexId x, int m_max) {
  Structure<double> sd(f.structure().topology_ptr(), [&] {
    StructureInputs<double> in;
    const auto& q = f.structure().inputs();
    in.conductance = q.conductance.template cast<double>();
    for (const auto& v : q.r) in.r.push_back(to_double(v));
    for (const auto& v : q.mu) in.mu.push_back(to_double(v));
    return in;
  }());
  return weak_tangent(sd, gradient(f, x, m_max));
}

template <class T>
CellPatch<T> hm_approximant(const Structure<T>& s, const std::function<T(VertexId)>& f, VertexId x, int m) {
  const Topology& topo = s.topology();
  auto sides = topo.sides(x);
  std::vector<Word> cells = topo.neighborhood(x, m);
  CellPatch<T> fine = solve_dirichlet(s, cells, f);
  CellPatch<T> out;
  out.level = sides.empty() ? 0 : static_cast<int>(sides.front().cell.size());
  for (std::size_t c = 0; c < sides.size(); ++c) {
    // Harmonic on the side cell is determined by its restriction to the subcell.
    const Mat<T>& mj = s.corner_matrix(sides[c].corner);
    Vec<T> v = fine.corner_values[c];
    for (int t = 0; t < m; ++t) v = solve(mj, v);
    out.cells.push_back(sides[c].cell);
    out.corner_values.push_back(v);
  }
  return out;
}

template <class T>
T patch_derivative(const Structure<T>& s, const CellPatch<T>& p, const Side& side, int k) {
  const auto& e = s.eigen(side.corner);
  const int fm = s.topology().fixed_map(side.corner);
  for (std::size_t c = 0; c < p.cells.size(); ++c) {
    const Word& d = p.cells[c];
    if (!d.starts_with(side.cell)) continue;
    Word tail = d.suffix_from(side.cell.size());
    if (tail != Word::repeat(fm, tail.size())) continue;
    return dot(e.beta_row(k), p.corner_values[c]) /
           (cell_r(s, side.cell) * ipow(e.lambda[k], static_cast<int>(tail.size())));
  }
  throw std::invalid_argument("side is not covered by the patch");
}

double patch_distance(const Structure<double>& s, const CellPatch<double>& a, const CellPatch<double>& b, int depth) {
  if (a.cells != b.cells) throw std::invalid_argument("patches over different cells");
  double out = 0;
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    Vec<double> diff(s.N0());
    for (int l = 0; l < s.N0(); ++l) diff[l] = a.corner_values[c][l] - b.corner_values[c][l];
    for (double v : harmonic_extend(s, diff, depth).values) out = std::max(out, std::fabs(v));
  }
  return out;
}

#define FRACTAL_DERIVATIVES_INSTANTIATE(T)                                                                      \
  template Vec<T> grid_cell_values(const Structure<T>&, const GridFunction<T>&, const Word&);                   \
  template Vec<T> derivative_approximants(const Structure<T>&, const CellOracle<T>&, const Side&, int, int);    \
  template DerivativeEstimate derivative_sequence(const Structure<T>&, const CellOracle<T>&, const Side&, int,  \
                                                  int);                                                         \
  template T exact_harmonic_derivative(const Structure<T>&, const GridFunction<T>&, const Side&, int);          \
  template ExactDerivative exact_derivative(const PoissonFn<T>&, const Side&, int);                             \
  template T exact_derivative_value(const PoissonFn<T>&, const Side&, int);                                     \
  template Gradient gradient(const PoissonFn<T>&, VertexId, int, double);                                       \
  template WeakTangent weak_tangent(const PoissonFn<T>&, VertexId, int);                                        \
  template CellPatch<T> hm_approximant(const Structure<T>&, const std::function<T(VertexId)>&, VertexId, int); \
  template T patch_derivative(const Structure<T>&, const CellPatch<T>&, const Side&, int);

FRACTAL_DERIVATIVES_INSTANTIATE(double)
FRACTAL_DERIVATIVES_INSTANTIATE(Rational)

}  // namespace fractal
