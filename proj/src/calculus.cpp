#include "fractal/calculus.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>


namespace fractal {

namespace {

template <class T>
T from_q(const Rational& q) {
  return Num<T>::from_rational(q);
}

void require_level(const Topology& topo, int level, std::size_t size) {
  if (size != topo.vertex_count(level)) throw LevelMismatch("grid function size does not match its level");
}

}  // namespace

// ---------------------------------------------------------------- addressing

std::vector<Address> all_addresses(const Topology& topo, VertexId x) {
  VertexClass c = topo.classify(x);
  if (!c.junction) return {Address{c.word, c.corner}};
  std::vector<Address> out;
  for (auto [i, a] : c.pairs) out.push_back(Address{c.word + i, a});
  return out;
}

std::optional<Address> relative_address(const Topology& topo, VertexId x, const Word& w) {
  for (const Address& a : all_addresses(topo, x)) {
    Word padded = a.word;
    if (padded.size() < w.size()) padded = padded + Word::repeat(topo.fixed_map(a.corner), w.size() - padded.size());
    if (padded.starts_with(w)) return Address{padded.suffix_from(w.size()), a.corner};
  }
  return std::nullopt;
}

std::vector<Word> cells_containing(const Topology& topo, VertexId x, int level) {
  int lx = topo.level_of(x);
  if (lx <= level) return topo.neighborhood(x, level - lx);
  return {topo.address(x).word.prefix(level)};
}

template <class T>
Vec<T> walk_harmonic(const Structure<T>& s, Vec<T> values, const Word& u) {
  for (int i : u.letters()) values = s.extension().maps[i] * values;
  return values;
}

// ---------------------------------------------------------------- basics

template <class T>
GridFunction<T> GridFunction<T>::restrict_to(const Topology& topo, int m) const {
  if (m > level) throw LevelMismatch("cannot restrict to a finer level");
  GridFunction<T> out{m, values};
  out.values.resize(topo.vertex_count(m));
  return out;
}

template <class T>
Vec<T> cell_resistance_scales(const Structure<T>& s, int m) {
  Vec<T> cur{T(1)};
  for (int k = 0; k < m; ++k) {
    Vec<T> next(cur.size() * s.N());
    for (std::size_t c = 0; c < cur.size(); ++c)
      for (int i = 0; i < s.N(); ++i) next[c * s.N() + i] = cur[c] * s.r(i);
    cur = std::move(next);
  }
  return cur;
}

template <class T>
Vec<T> cell_measures(const Structure<T>& s, int m) {
  Vec<T> cur{T(1)};
  for (int k = 0; k < m; ++k) {
    Vec<T> next(cur.size() * s.N());
    for (std::size_t c = 0; c < cur.size(); ++c)
      for (int i = 0; i < s.N(); ++i) next[c * s.N() + i] = cur[c] * s.mu(i);
    cur = std::move(next);
  }
  return cur;
}

template <class T>
GridFunction<T> refine(const Structure<T>& s, const GridFunction<T>& f, int m) {
  const Topology& topo = s.topology();
  require_level(topo, f.level, f.size());
  if (m < f.level) throw LevelMismatch("refine target is coarser than the function");
  GridFunction<T> out = f;
  const Mat<T>& e = s.extension().extension;
  const int n0 = s.N0(), p = topo.template_size();
  const std::size_t npc = static_cast<std::size_t>(topo.new_per_cell());
  for (int k = f.level; k < m; ++k) {
    const CellTable& cells = topo.cells(k);
    std::size_t base = topo.vertex_count(k);
    out.values.resize(topo.vertex_count(k + 1), T(0));
    for (std::size_t c = 0; c < cells.cell_count(); ++c) {
      const std::uint32_t* cc = cells.cell(c);
      for (int q = n0; q < p; ++q) {
        T v(0);
        for (int a = 0; a < n0; ++a) v += e(q, a) * out.values[cc[a]];
        out.values[base + c * npc + (q - n0)] = v;
      }
    }
    out.level = k + 1;
  }
  return out;
}

template <class T>
GridFunction<T> harmonic_extend(const Structure<T>& s, const Vec<T>& boundary, int m) {
  if (static_cast<int>(boundary.size()) != s.N0()) throw std::invalid_argument("need N0 boundary values");
  GridFunction<T> f{0, boundary};
  return refine(s, f, m);
}

template <class T>
T energy(const Structure<T>& s, const GridFunction<T>& f, const GridFunction<T>& g) {
  if (f.level != g.level) throw LevelMismatch("energy of functions at different levels");
  const Topology& topo = s.topology();
  require_level(topo, f.level, f.size());
  require_level(topo, g.level, g.size());
  const CellTable& cells = topo.cells(f.level);
  Vec<T> rw = cell_resistance_scales(s, f.level);
  T total(0);
  const int n0 = s.N0();
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    const std::uint32_t* cc = cells.cell(c);
    T e(0);
    for (int a = 0; a < n0; ++a)
      for (int b = a + 1; b < n0; ++b)
        e += s.conductance(a, b) * (f.values[cc[a]] - f.values[cc[b]]) * (g.values[cc[a]] - g.values[cc[b]]);
    total += e / rw[c];
  }
  return total;
}

template <class T>
T integrate(const Structure<T>& s, const GridFunction<T>& f) {
  const Topology& topo = s.topology();
  require_level(topo, f.level, f.size());
  const CellTable& cells = topo.cells(f.level);
  Vec<T> mw = cell_measures(s, f.level);
  T total(0);
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    const std::uint32_t* cc = cells.cell(c);
    T v(0);
    for (int a = 0; a < s.N0(); ++a) v += s.gamma()[a] * f.values[cc[a]];
    total += mw[c] * v;
  }
  return total;
}

template <class T>
T integrate_product(const Structure<T>& s, const GridFunction<T>& f, const GridFunction<T>& g) {
  if (f.level != g.level) throw LevelMismatch("product of functions at different levels");
  const Topology& topo = s.topology();
  require_level(topo, f.level, f.size());
  require_level(topo, g.level, g.size());
  const CellTable& cells = topo.cells(f.level);
  Vec<T> mw = cell_measures(s, f.level);
  const Mat<T>& q = s.harmonic_mass();
  T total(0);
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    const std::uint32_t* cc = cells.cell(c);
    T v(0);
    for (int a = 0; a < s.N0(); ++a) {
      if (Num<T>::is_zero(f.values[cc[a]], 0.0)) continue;
      T row(0);
      for (int b = 0; b < s.N0(); ++b) row += q(a, b) * g.values[cc[b]];
      v += f.values[cc[a]] * row;
    }
    total += mw[c] * v;
  }
  return total;
}

template <class T>
Vec<T> tent_integrals(const Structure<T>& s, int m) {
  const Topology& topo = s.topology();
  const CellTable& cells = topo.cells(m);
  Vec<T> mw = cell_measures(s, m);
  Vec<T> out(topo.vertex_count(m), T(0));
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    const std::uint32_t* cc = cells.cell(c);
    for (int a = 0; a < s.N0(); ++a) out[cc[a]] += mw[c] * s.gamma()[a];
  }
  return out;
}

template <class T>
Vec<T> load_vector(const Structure<T>& s, const GridFunction<T>& g) {
  const Topology& topo = s.topology();
  require_level(topo, g.level, g.size());
  const CellTable& cells = topo.cells(g.level);
  Vec<T> mw = cell_measures(s, g.level);
  const Mat<T>& q = s.harmonic_mass();
  Vec<T> out(g.size(), T(0));
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    const std::uint32_t* cc = cells.cell(c);
    for (int a = 0; a < s.N0(); ++a) {
      T v(0);
      for (int b = 0; b < s.N0(); ++b) v += q(a, b) * g.values[cc[b]];
      out[cc[a]] += mw[c] * v;
    }
  }
  return out;
}

template <class T>
Vec<T> stiffness_apply(const Structure<T>& s, const GridFunction<T>& f) {
  const Topology& topo = s.topology();
  require_level(topo, f.level, f.size());
  const CellTable& cells = topo.cells(f.level);
  Vec<T> rw = cell_resistance_scales(s, f.level);
  Vec<T> out(f.size(), T(0));
  const int n0 = s.N0();
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    const std::uint32_t* cc = cells.cell(c);
    for (int a = 0; a < n0; ++a)
      for (int b = 0; b < n0; ++b)
        if (a != b) out[cc[a]] += s.conductance(a, b) * (f.values[cc[a]] - f.values[cc[b]]) / rw[c];
  }
  return out;
}

template <class T>
T discrete_laplacian(const Structure<T>& s, const GridFunction<T>& f, VertexId x) {
  const Topology& topo = s.topology();
  require_level(topo, f.level, f.size());
  if (x.index < static_cast<std::uint64_t>(s.N0())) throw std::invalid_argument("Laplacian at a boundary vertex");
  if (x.index >= f.size()) throw std::invalid_argument("vertex is not in V_m");
  T flux(0), mass(0);
  for (const Word& w : cells_containing(topo, x, f.level)) {
    auto corners = topo.cell_corners(w);
    T rw(1), mw(1);
    for (int i : w.letters()) {
      rw *= s.r(i);
      mw *= s.mu(i);
    }
    int a = static_cast<int>(std::find(corners.begin(), corners.end(), x) - corners.begin());
    for (int b = 0; b < s.N0(); ++b)
      if (b != a) flux += s.conductance(a, b) * (f[corners[b]] - f[x]) / rw;
    mass += mw * s.gamma()[a];
  }
  return flux / mass;
}

template <class T>
GridFunction<T> discrete_laplacian(const Structure<T>& s, const GridFunction<T>& f) {
  Vec<T> k = stiffness_apply(s, f);
  Vec<T> t = tent_integrals(s, f.level);
  GridFunction<T> out{f.level, Vec<T>(f.size(), T(0))};
  for (std::size_t x = static_cast<std::size_t>(s.N0()); x < f.size(); ++x) out.values[x] = -k[x] / t[x];
  return out;
}

// ---------------------------------------------------------------- Poisson

namespace {

GridFunction<double> sparse_poisson(const Structure<double>& s, const GridFunction<double>& g,
                                    const Vec<double>& boundary) {
  const Topology& topo = s.topology();
  const int m = g.level, n0 = s.N0();
  const std::size_t nv = topo.vertex_count(m), ni = nv - n0;
  GridFunction<double> u{m, Vec<double>(nv, 0.0)};
  for (int j = 0; j < n0; ++j) u.values[j] = boundary[j];
  if (ni == 0) return u;
  const CellTable& cells = topo.cells(m);
  Vec<double> rw = cell_resistance_scales(s, m);
  Vec<double> rhs = load_vector(s, g);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(cells.cell_count() * n0 * n0);
  Eigen::VectorXd b(static_cast<Eigen::Index>(ni));
  for (std::size_t x = 0; x < ni; ++x) b[static_cast<Eigen::Index>(x)] = rhs[x + n0];
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    const std::uint32_t* cc = cells.cell(c);
    for (int a = 0; a < n0; ++a) {
      if (cc[a] < static_cast<std::uint32_t>(n0)) continue;
      auto row = static_cast<Eigen::Index>(cc[a] - n0);
      for (int bb = 0; bb < n0; ++bb) {
        if (bb == a) continue;
        double w = s.conductance(a, bb) / rw[c];
        trip.emplace_back(row, row, w);
        if (cc[bb] < static_cast<std::uint32_t>(n0))
          b[row] += w * boundary[cc[bb]];
        else
          trip.emplace_back(row, static_cast<Eigen::Index>(cc[bb] - n0), -w);
      }
    }
  }
  Eigen::SparseMatrix<double> k(static_cast<Eigen::Index>(ni), static_cast<Eigen::Index>(ni));
  k.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(k);
  if (solver.info() != Eigen::Success) throw std::runtime_error("sparse factorization failed");
  Eigen::VectorXd x = solver.solve(b);
  if (solver.info() != Eigen::Success) throw std::runtime_error("sparse solve failed");
  double res = (k * x - b).lpNorm<Eigen::Infinity>();
  if (!(res <= 1e-8 * std::max(1.0, b.lpNorm<Eigen::Infinity>())))
    throw std::runtime_error("sparse solve did not converge (residual " + std::to_string(res) + ")");
  for (std::size_t i = 0; i < ni; ++i) u.values[i + n0] = x[static_cast<Eigen::Index>(i)];
  return u;
}

// Sums the Green's series: an upward pass collects the corner moments
// ∫_{F_w K} g · H_a∘F_w^{-1} dμ of every cell, a downward pass adds
// r_w Psi-weighted loads to the harmonic interpolation inside each cell.
template <class T>
GridFunction<T> green_poisson(const Structure<T>& s, const GridFunction<T>& g, const Vec<T>& boundary) {
  const Topology& topo = s.topology();
  const int m = g.level, n0 = s.N0(), N = s.N(), p = topo.template_size();
  const std::size_t npc = static_cast<std::size_t>(topo.new_per_cell());
  std::vector<Vec<T>> moments(m + 1);
  {
    const CellTable& cells = topo.cells(m);
    Vec<T> mw = cell_measures(s, m);
    const Mat<T>& q = s.harmonic_mass();
    moments[m].assign(cells.cell_count() * n0, T(0));
    for (std::size_t c = 0; c < cells.cell_count(); ++c) {
      const std::uint32_t* cc = cells.cell(c);
      for (int a = 0; a < n0; ++a) {
        T v(0);
        for (int b = 0; b < n0; ++b) v += q(a, b) * g.values[cc[b]];
        moments[m][c * n0 + a] = mw[c] * v;
      }
    }
  }
  const auto& maps = s.extension().maps;
  for (int k = m - 1; k >= 0; --k) {
    std::size_t count = topo.cell_count(k);
    moments[k].assign(count * n0, T(0));
    for (std::size_t c = 0; c < count; ++c)
      for (int i = 0; i < N; ++i) {
        const T* child = &moments[k + 1][(c * N + i) * n0];
        for (int a = 0; a < n0; ++a) {
          T v(0);
          for (int b = 0; b < n0; ++b) v += maps[i](b, a) * child[b];
          moments[k][c * n0 + a] += v;
        }
      }
  }
  GridFunction<T> u{0, boundary};
  u.values.resize(topo.vertex_count(m), T(0));
  const Mat<T>& e = s.extension().extension;
  const Mat<T>& psi = s.green_kernel();
  Vec<T> load(p - n0);
  for (int k = 0; k < m; ++k) {
    const CellTable& cells = topo.cells(k);
    Vec<T> rw = cell_resistance_scales(s, k);
    std::size_t base = topo.vertex_count(k);
    for (std::size_t c = 0; c < cells.cell_count(); ++c) {
      const std::uint32_t* cc = cells.cell(c);
      std::fill(load.begin(), load.end(), T(0));
      for (int i = 0; i < N; ++i)
        for (int a = 0; a < n0; ++a) {
          int q = topo.template_point(i, a);
          if (q >= n0) load[q - n0] += moments[k + 1][(c * N + i) * n0 + a];
        }
      for (int q = n0; q < p; ++q) {
        T v(0);
        for (int a = 0; a < n0; ++a) v += e(q, a) * u.values[cc[a]];
        T corr(0);
        for (int qq = 0; qq < p - n0; ++qq) corr += psi(q - n0, qq) * load[qq];
        u.values[base + c * npc + (q - n0)] = v + rw[c] * corr;
      }
    }
  }
  u.level = m;
  return u;
}

}  // namespace

template <class T>
GridFunction<T> solve_poisson(const Structure<T>& s, const GridFunction<T>& g, const Vec<T>& boundary,
                              PoissonMethod method) {
  require_level(s.topology(), g.level, g.size());
  if (static_cast<int>(boundary.size()) != s.N0()) throw std::invalid_argument("need N0 boundary values");
  if constexpr (std::is_same_v<T, double>) {
    if (method == PoissonMethod::sparse) return sparse_poisson(s, g, boundary);
  }
  (void)method;
  return green_poisson(s, g, boundary);
}

template <class T>
T green_partial(const Structure<T>& s, VertexId x, VertexId z, int M) {
  const Topology& topo = s.topology();
  const int n0 = s.N0(), p = topo.template_size();
  const Mat<T>& psi = s.green_kernel();
  // Level-1 tent values at F_w^{-1} y for every interior template point.
  auto tents = [&](VertexId y, const Word& w) {
    Vec<T> out(p - n0, T(0));
    auto rel = relative_address(topo, y, w);
    if (!rel || rel->word.empty()) return out;
    int i = rel->word[0];
    for (int a = 0; a < n0; ++a) {
      int q = topo.template_point(i, a);
      if (q < n0) continue;
      Vec<T> e(n0, T(0));
      e[a] = T(1);
      out[q - n0] += walk_harmonic(s, e, rel->word.suffix_from(1))[rel->corner];
    }
    return out;
  };
  T total(0);
  for (int k = 0; k < M; ++k) {
    auto cx = cells_containing(topo, x, k);
    auto cz = cells_containing(topo, z, k);
    for (const Word& w : cx) {
      if (std::find(cz.begin(), cz.end(), w) == cz.end()) continue;
      Vec<T> tx = tents(x, w), tz = tents(z, w);
      T rw(1);
      for (int i : w.letters()) rw *= s.r(i);
      T v(0);
      for (int a = 0; a < p - n0; ++a) {
        if (Num<T>::is_zero(tx[a], 0.0)) continue;
        for (int b = 0; b < p - n0; ++b) v += tx[a] * psi(a, b) * tz[b];
      }
      total += rw * v;
    }
  }
  return total;
}

template <class T>
double gauss_green_residual(const Structure<T>& s, const GridFunction<T>& u, const GridFunction<T>& v) {
  if (u.level != v.level) throw LevelMismatch("gauss-green on functions at different levels");
  const Topology& topo = s.topology();
  const int n0 = s.N0(), m = u.level;
  Vec<T> ku = stiffness_apply(s, u);
  GridFunction<T> lap = discrete_laplacian(s, u);
  // Boundary values of Δ_m u: mean over the other corners of the corner cell.
  for (int j = 0; j < n0 && m > 0; ++j) {
    auto corners = topo.cell_corners(Word::repeat(topo.fixed_map(j), m));
    T sum(0);
    for (int a = 0; a < n0; ++a)
      if (a != j) sum += lap.values[corners[a].index];
    lap.values[j] = sum / T(n0 - 1);
  }
  T lhs = energy(s, u, v);
  T rhs = -integrate_product(s, v, lap);
  for (int j = 0; j < n0; ++j) rhs += v.values[j] * ku[j];
  return std::fabs(to_double(lhs - rhs));
}

template <class T>
GridFunction<T> a_spline_grid(const Structure<T>& s, int corner, int k) {
  return GridFunction<T>{1, s.a_spline(corner, k)};
}

template <class T>
GridFunction<T> compose_inverse(const Structure<T>& s, const GridFunction<T>& f, const Word& u, int m) {
  const Topology& topo = s.topology();
  const int d = m - static_cast<int>(u.size());
  if (d < f.level) throw LevelMismatch("compose_inverse needs m >= |u| + level");
  GridFunction<T> fine = refine(s, f, d);
  GridFunction<T> out{m, Vec<T>(topo.vertex_count(m), T(0))};
  // Vertices of V_m inside F_u K are the corners of its level-m subcells.
  const CellTable& local = topo.cells(d);
  std::uint64_t first = topo.cell_index(u) * topo.cell_count(d);
  const CellTable& cells = topo.cells(m);
  for (std::size_t c = 0; c < local.cell_count(); ++c) {
    const std::uint32_t* lc = local.cell(c);
    const std::uint32_t* gc = cells.cell(first + c);
    for (int a = 0; a < s.N0(); ++a) out.values[gc[a]] = fine.values[lc[a]];
  }
  return out;
}

template <class T>
Mat<T> local_poisson_basis(const Structure<T>& s) {
  const Topology& topo = s.topology();
  const int n0 = s.N0(), p = topo.template_size();
  const Mat<T>& q = s.harmonic_mass();
  const auto& maps = s.extension().maps;
  // loads(q, b) = ∫ ψ_q H_b dμ over interior template points q.
  Mat<T> loads(p - n0, n0);
  for (int i = 0; i < s.N(); ++i)
    for (int c = 0; c < n0; ++c) {
      int pt = topo.template_point(i, c);
      if (pt < n0) continue;
      for (int b = 0; b < n0; ++b) {
        T v(0);
        for (int d = 0; d < n0; ++d) v += q(c, d) * maps[i](d, b);
        loads(pt - n0, b) += s.mu(i) * v;
      }
    }
  Mat<T> inner = s.green_kernel() * loads;
  Mat<T> out(p, n0);
  for (int pt = n0; pt < p; ++pt)
    for (int b = 0; b < n0; ++b) out(pt, b) = inner(pt - n0, b);
  return out;
}

// ---------------------------------------------------------------- PoissonFn

template <class T>
PoissonFn<T>::PoissonFn(std::shared_ptr<const Structure<T>> s, Vec<T> boundary, GridFunction<T> g,
                        PoissonMethod method)
    : s_(std::move(s)), g_(std::move(g)) {
  u_ = solve_poisson(*s_, g_, boundary, method);
  basis_ = local_poisson_basis(*s_);
}

template <class T>
PoissonFn<T> PoissonFn<T>::harmonic(std::shared_ptr<const Structure<T>> s, Vec<T> boundary) {
  GridFunction<T> g{0, Vec<T>(s->N0(), T(0))};
  return PoissonFn(std::move(s), std::move(boundary), std::move(g));
}

template <class T>
PoissonFn<T> PoissonFn<T>::constant_load(std::shared_ptr<const Structure<T>> s, const T& c, Vec<T> boundary) {
  GridFunction<T> g{0, Vec<T>(s->N0(), c)};
  return PoissonFn(std::move(s), std::move(boundary), std::move(g));
}

template <class T>
PoissonFn<T> PoissonFn<T>::from_solution(std::shared_ptr<const Structure<T>> s, GridFunction<T> u,
                                         GridFunction<T> g) {
  if (u.level != g.level) throw LevelMismatch("solution and load at different levels");
  PoissonFn f;
  f.basis_ = local_poisson_basis(*s);
  f.s_ = std::move(s);
  f.u_ = std::move(u);
  f.g_ = std::move(g);
  return f;
}

template <class T>
std::pair<Vec<T>, Vec<T>> PoissonFn<T>::cell_data(const Word& w) const {
  const Topology& topo = s_->topology();
  const int n0 = s_->N0(), L = g_.level;
  Word head = w.prefix(static_cast<std::size_t>(L));
  auto corners = topo.cell_corners(head);
  Vec<T> fb(n0), gb(n0);
  for (int a = 0; a < n0; ++a) {
    fb[a] = u_[corners[a]];
    gb[a] = g_[corners[a]];
  }
  T rw(1), mw(1);
  for (int i : head.letters()) {
    rw *= s_->r(i);
    mw *= s_->mu(i);
  }
  const auto& maps = s_->extension().maps;
  for (std::size_t d = head.size(); d < w.size(); ++d) {
    int i = w[d];
    Vec<T> nf = maps[i] * fb;
    T scale = rw * mw;
    for (int a = 0; a < n0; ++a) {
      int pt = topo.template_point(i, a);
      T corr(0);
      for (int b = 0; b < n0; ++b) corr += gb[b] * basis_(pt, b);
      nf[a] += scale * corr;
    }
    fb = std::move(nf);
    gb = maps[i] * gb;
    rw *= s_->r(i);
    mw *= s_->mu(i);
  }
  return {fb, gb};
}

template <class T>
T PoissonFn<T>::value(VertexId x) const {
  if (x.index < u_.size()) return u_.values[x.index];
  Address a = s_->topology().address(x);
  return cell_values(a.word)[a.corner];
}

template <class T>
GridFunction<T> PoissonFn<T>::sample(int m) const {
  const Topology& topo = s_->topology();
  const int L = g_.level;
  if (m <= L) {
    GridFunction<T> out{m, u_.values};
    out.values.resize(topo.vertex_count(m));
    return out;
  }
  const int n0 = s_->N0(), p = topo.template_size();
  const std::size_t npc = static_cast<std::size_t>(topo.new_per_cell());
  const Mat<T>& e = s_->extension().extension;
  GridFunction<T> f = u_, g = g_;
  for (int k = L; k < m; ++k) {
    const CellTable& cells = topo.cells(k);
    Vec<T> rw = cell_resistance_scales(*s_, k), mw = cell_measures(*s_, k);
    std::size_t base = topo.vertex_count(k);
    f.values.resize(topo.vertex_count(k + 1), T(0));
    for (std::size_t c = 0; c < cells.cell_count(); ++c) {
      const std::uint32_t* cc = cells.cell(c);
      T scale = rw[c] * mw[c];
      for (int q = n0; q < p; ++q) {
        T v(0), corr(0);
        for (int a = 0; a < n0; ++a) {
          v += e(q, a) * f.values[cc[a]];
          corr += g.values[cc[a]] * basis_(q, a);
        }
        f.values[base + c * npc + (q - n0)] = v + scale * corr;
      }
    }
    f.level = k + 1;
    g = refine(*s_, g, k + 1);
  }
  return f;
}

template <class T>
PoissonFn<T> PoissonFn<T>::operator+(const PoissonFn& o) const {
  int L = std::max(g_.level, o.g_.level);
  GridFunction<T> ua = sample(L), ub = o.sample(L);
  GridFunction<T> ga = refine(*s_, g_, L), gb = refine(*s_, o.g_, L);
  for (std::size_t x = 0; x < ua.size(); ++x) {
    ua.values[x] += ub.values[x];
    ga.values[x] += gb.values[x];
  }
  return from_solution(s_, std::move(ua), std::move(ga));
}

template <class T>
PoissonFn<T> PoissonFn<T>::scaled(const T& c) const {
  PoissonFn out = *this;
  for (auto& v : out.u_.values) v *= c;
  for (auto& v : out.g_.values) v *= c;
  return out;
}

// ---------------------------------------------------------------- patches

template <class T>
std::optional<T> CellPatch<T>::value(const Structure<T>& s, VertexId x) const {
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto rel = relative_address(s.topology(), x, cells[c]);
    if (rel) return walk_harmonic(s, corner_values[c], rel->word)[rel->corner];
  }
  return std::nullopt;
}

std::vector<VertexId> patch_boundary(const Topology& topo, const std::vector<Word>& cells) {
  if (cells.empty()) return {};
  const int level = static_cast<int>(cells.front().size());
  std::set<Word> inside(cells.begin(), cells.end());
  std::set<VertexId> out;
  for (const Word& w : cells) {
    if (static_cast<int>(w.size()) != level) throw std::invalid_argument("patch cells must share a level");
    for (VertexId v : topo.cell_corners(w)) {
      if (v.index < static_cast<std::uint64_t>(topo.N0())) {
        out.insert(v);
        continue;
      }
      for (const Word& c : cells_containing(topo, v, level))
        if (!inside.count(c)) {
          out.insert(v);
          break;
        }
    }
  }
  return {out.begin(), out.end()};
}

template <class T>
CellPatch<T> solve_dirichlet(const Structure<T>& s, const std::vector<Word>& cells,
                             const std::function<T(VertexId)>& boundary) {
  const Topology& topo = s.topology();
  if (cells.empty()) throw std::invalid_argument("empty patch");
  CellPatch<T> out;
  out.level = static_cast<int>(cells.front().size());
  out.cells = cells;
  auto bnd = patch_boundary(topo, cells);
  std::set<VertexId> bset(bnd.begin(), bnd.end());
  std::map<VertexId, int> unknown;
  std::vector<std::vector<VertexId>> corners;
  for (const Word& w : cells) {
    corners.push_back(topo.cell_corners(w));
    for (VertexId v : corners.back())
      if (!bset.count(v) && !unknown.count(v)) {
        int idx = static_cast<int>(unknown.size());
        unknown[v] = idx;
      }
  }
  std::map<VertexId, T> known;
  for (VertexId v : bnd) known[v] = boundary(v);
  const std::size_t n = unknown.size();
  Mat<T> k(n, n);
  Vec<T> rhs(n, T(0));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    T rw(1);
    for (int i : cells[c].letters()) rw *= s.r(i);
    for (int a = 0; a < s.N0(); ++a) {
      auto ia = unknown.find(corners[c][a]);
      if (ia == unknown.end()) continue;
      for (int b = 0; b < s.N0(); ++b) {
        if (a == b) continue;
        T w = s.conductance(a, b) / rw;
        k(ia->second, ia->second) += w;
        auto ib = unknown.find(corners[c][b]);
        if (ib == unknown.end())
          rhs[ia->second] += w * known.at(corners[c][b]);
        else
          k(ia->second, ib->second) -= w;
      }
    }
  }
  Vec<T> sol;
  if (n > 0) {
    try {
      sol = solve(k, rhs);
    } catch (const SingularMatrix&) {
      throw std::runtime_error("Dirichlet problem is singular (disconnected patch)");
    }
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    Vec<T> vals(s.N0());
    for (int a = 0; a < s.N0(); ++a) {
      VertexId v = corners[c][a];
      auto it = unknown.find(v);
      vals[a] = it == unknown.end() ? known.at(v) : sol[it->second];
    }
    out.corner_values.push_back(std::move(vals));
  }
  return out;
}

// ---------------------------------------------------------------- I/O

namespace {

std::string value_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
std::string value_text(const Rational& v) { return v.get_str(); }

}  // namespace

template <class T>
void write_csv(std::ostream& os, const Topology& topo, const GridFunction<T>& f) {
  os << "word,corner,level,value\n";
  for (std::size_t x = 0; x < f.size(); ++x) {
    VertexId v{x};
    Address a = topo.address(v);
    std::string w = a.word.empty() ? "" : a.word.str();
    os << w << ',' << a.corner + 1 << ',' << topo.level_of(v) << ',' << value_text(f.values[x]) << '\n';
  }
}

template <class T>
GridFunction<T> read_csv(std::istream& is, const Topology& topo) {
  std::string line;
  std::vector<std::pair<VertexId, T>> rows;
  int level = 0;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("word", 0) == 0) continue;
    }
    std::stringstream ss(line);
    std::string w, corner, lev, val;
    if (!std::getline(ss, w, ',') || !std::getline(ss, corner, ',') || !std::getline(ss, lev, ',') ||
        !std::getline(ss, val))
      throw std::invalid_argument("malformed CSV row: " + line);
    VertexId v = topo.canonicalize(Word::parse(w), std::stoi(corner) - 1);
    level = std::max(level, std::stoi(lev));
    if constexpr (std::is_same_v<T, double>)
      rows.emplace_back(v, std::stod(val));
    else
      rows.emplace_back(v, parse_rational(val));
  }
  GridFunction<T> f{level, Vec<T>(topo.vertex_count(level), T(0))};
  std::vector<bool> seen(f.size(), false);
  for (auto& [v, x] : rows) {
    if (v.index >= f.size()) throw std::invalid_argument("CSV vertex beyond its level");
    f.values[v.index] = x;
    seen[v.index] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw std::invalid_argument("CSV does not cover every vertex of V_" + std::to_string(level));
  return f;
}

template <class T>
PoissonFn<T> parse_function(std::shared_ptr<const Structure<T>> s, const std::string& text) {
  auto numbers = [](const std::string& list) {
    std::vector<Rational> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_rational(item));
    return out;
  };
  auto term = [&](const std::string& t) -> PoissonFn<T> {
    const int n0 = s->N0();
    if (t == "zero") return PoissonFn<T>::harmonic(s, Vec<T>(n0, T(0)));
    auto colon = t.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("unknown function '" + t + "'");
    std::string kind = t.substr(0, colon), arg = t.substr(colon + 1);
    if (kind == "harmonic") {
      auto q = numbers(arg);
      if (static_cast<int>(q.size()) != n0) throw std::invalid_argument("harmonic: needs N0 values");
      Vec<T> b;
      for (auto& v : q) b.push_back(from_q<T>(v));
      return PoissonFn<T>::harmonic(s, b);
    }
    if (kind == "hjk") {
      auto q = numbers(arg);
      if (q.size() != 2) throw std::invalid_argument("hjk: needs j,k");
      int j = static_cast<int>(q[0].get_d()) - 1, k = static_cast<int>(q[1].get_d()) - 1;
      if (j < 0 || j >= n0 || k < 0 || k >= n0) throw std::invalid_argument("hjk: index out of range");
      return PoissonFn<T>::harmonic(s, s->eigen(j).alpha_row(k));
    }
    if (kind == "poisson") {
      if (arg.rfind("const=", 0) != 0) throw std::invalid_argument("poisson: expected const=<value>");
      T c = from_q<T>(parse_rational(arg.substr(6)));
      return PoissonFn<T>::constant_load(s, c, Vec<T>(n0, T(0)));
    }
    throw std::invalid_argument("unknown function kind '" + kind + "'");
  };
  std::stringstream ss(text);
  std::string item;
  std::optional<PoissonFn<T>> total;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    PoissonFn<T> f = term(item);
    total = total ? *total + f : f;
  }
  if (!total) throw std::invalid_argument("empty function description");
  return *total;
}

// ---------------------------------------------------------------- instantiation

#define FRACTAL_CALCULUS_INSTANTIATE(T)                                                                      \
  template struct GridFunction<T>;                                                                           \
  template Vec<T> cell_resistance_scales(const Structure<T>&, int);                                          \
  template Vec<T> cell_measures(const Structure<T>&, int);                                                   \
  template GridFunction<T> harmonic_extend(const Structure<T>&, const Vec<T>&, int);                         \
  template GridFunction<T> refine(const Structure<T>&, const GridFunction<T>&, int);                         \
  template T energy(const Structure<T>&, const GridFunction<T>&, const GridFunction<T>&);                    \
  template T integrate(const Structure<T>&, const GridFunction<T>&);                                         \
  template T integrate_product(const Structure<T>&, const GridFunction<T>&, const GridFunction<T>&);         \
  template Vec<T> tent_integrals(const Structure<T>&, int);                                                  \
  template Vec<T> load_vector(const Structure<T>&, const GridFunction<T>&);                                  \
  template Vec<T> stiffness_apply(const Structure<T>&, const GridFunction<T>&);                              \
  template T discrete_laplacian(const Structure<T>&, const GridFunction<T>&, VertexId);                      \
  template GridFunction<T> discrete_laplacian(const Structure<T>&, const GridFunction<T>&);                  \
  template GridFunction<T> solve_poisson(const Structure<T>&, const GridFunction<T>&, const Vec<T>&,         \
                                         PoissonMethod);                                                     \
  template T green_partial(const Structure<T>&, VertexId, VertexId, int);                                    \
  template double gauss_green_residual(const Structure<T>&, const GridFunction<T>&, const GridFunction<T>&); \
  template GridFunction<T> a_spline_grid(const Structure<T>&, int, int);                                     \
  template GridFunction<T> compose_inverse(const Structure<T>&, const GridFunction<T>&, const Word&, int);   \
  template Mat<T> local_poisson_basis(const Structure<T>&);                                                  \
  template Vec<T> walk_harmonic(const Structure<T>&, Vec<T>, const Word&);                                   \
  template class PoissonFn<T>;                                                                               \
  template struct CellPatch<T>;                                                                              \
  template CellPatch<T> solve_dirichlet(const Structure<T>&, const std::vector<Word>&,                       \
                                        const std::function<T(VertexId)>&);                                  \
  template void write_csv(std::ostream&, const Topology&, const GridFunction<T>&);                           \
  template GridFunction<T> read_csv(std::istream&, const Topology&);                                         \
  template PoissonFn<T> parse_function(std::shared_ptr<const Structure<T>>, const std::string&);

FRACTAL_CALCULUS_INSTANTIATE(double)
FRACTAL_CALCULUS_INSTANTIATE(Rational)

}  // namespace fractal
