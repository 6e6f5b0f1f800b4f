#include "fractal/structure.hpp"

#include <algorithm>
#include <complex>
#include <numeric>
#include <random>
#include <sstream>

namespace fractal {

namespace {

using cld = std::complex<long double>;

// Characteristic polynomial coefficients (ascending powers, monic) by
// Faddeev-LeVerrier in extended precision.
std::vector<long double> characteristic_polynomial(const Mat<double>& a) {
  const std::size_t n = a.rows();
  std::vector<long double> coeff(n + 1, 0.0L);
  coeff[n] = 1.0L;
  std::vector<long double> mk(n * n, 0.0L), tmp(n * n);
  for (std::size_t k = 1; k <= n; ++k) {
    // M_k = A M_{k-1} + c_{n-k+1} I
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        long double s = 0;
        for (std::size_t l = 0; l < n; ++l) s += static_cast<long double>(a(i, l)) * mk[l * n + j];
        tmp[i * n + j] = s + (i == j ? coeff[n - k + 1] : 0.0L);
      }
    mk = tmp;
    long double tr = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l) tr += static_cast<long double>(a(i, l)) * mk[l * n + i];
    coeff[n - k] = -tr / static_cast<long double>(k);
  }
  return coeff;
}

cld eval_poly(const std::vector<long double>& c, cld z) {
  cld v = 0;
  for (std::size_t i = c.size(); i-- > 0;) v = v * z + c[i];
  return v;
}

cld eval_dpoly(const std::vector<long double>& c, cld z) {
  cld v = 0;
  for (std::size_t i = c.size(); i-- > 1;) v = v * z + static_cast<long double>(i) * c[i];
  return v;
}

// Roots of a monic polynomial by Weierstrass (Durand-Kerner) iteration.
std::vector<cld> poly_roots(const std::vector<long double>& c) {
  const std::size_t d = c.size() - 1;
  std::vector<cld> z(d);
  cld seed(0.4L, 0.9L), p = 1;
  for (auto& zi : z) {
    p *= seed;
    zi = p;
  }
  for (int iter = 0; iter < 2000; ++iter) {
    long double change = 0;
    for (std::size_t i = 0; i < d; ++i) {
      cld den = 1;
      for (std::size_t j = 0; j < d; ++j)
        if (j != i) den *= (z[i] - z[j]);
      if (std::abs(den) == 0) den = 1e-30L;
      cld step = eval_poly(c, z[i]) / den;
      z[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-30L) break;
  }
  return z;
}

template <class T>
Mat<T> laplacian_of(const Mat<T>& c) {
  const std::size_t n = c.rows();
  Mat<T> l(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) {
        l(a, b) -= c(a, b);
        l(a, a) += c(a, b);
      }
  return l;
}

// Level-1 Laplacian with cell i weighted by weight[i].
template <class T>
Mat<T> level1_laplacian(const Topology& topo, const Mat<T>& c, const Vec<T>& weight) {
  const int p = topo.template_size(), n0 = topo.N0();
  Mat<T> l(p, p);
  for (int i = 0; i < topo.N(); ++i)
    for (int a = 0; a < n0; ++a)
      for (int b = a + 1; b < n0; ++b) {
        T w = weight[i] * c(a, b);
        int pa = topo.template_point(i, a), pb = topo.template_point(i, b);
        l(pa, pa) += w;
        l(pb, pb) += w;
        l(pa, pb) -= w;
        l(pb, pa) -= w;
      }
  return l;
}

struct Blocks {
  template <class T>
  static Mat<T> sub(const Mat<T>& m, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    Mat<T> out(r1 - r0, c1 - c0);
    for (std::size_t i = r0; i < r1; ++i)
      for (std::size_t j = c0; j < c1; ++j) out(i - r0, j - c0) = m(i, j);
    return out;
  }
};

// Harmonic extension (interior rows) and Schur complement of a level-1 Laplacian.
template <class T>
std::pair<Mat<T>, Mat<T>> extension_and_schur(const Mat<T>& l, std::size_t n0) {
  const std::size_t p = l.rows();
  Mat<T> lii = Blocks::sub(l, n0, p, n0, p);
  Mat<T> lib = Blocks::sub(l, n0, p, 0, n0);
  Mat<T> lbi = Blocks::sub(l, 0, n0, n0, p);
  Mat<T> lbb = Blocks::sub(l, 0, n0, 0, n0);
  Mat<T> ei;
  try {
    ei = T(-1) * solve(lii, lib);
  } catch (const SingularMatrix&) {
    throw StructureError("singular interior block: disconnected level-1 graph or zero conductances");
  }
  Mat<T> schur = lbb + lbi * ei;
  return {ei, schur};
}

}  // namespace

// ---------------------------------------------------------------- inputs

HarmonicStructure HarmonicStructure::from_rational(const StructureInputs<Rational>& q) {
  HarmonicStructure h;
  h.exact = q;
  h.values.conductance = q.conductance.cast<double>();
  for (const auto& v : q.r) h.values.r.push_back(v.get_d());
  for (const auto& v : q.mu) h.values.mu.push_back(v.get_d());
  return h;
}

// ---------------------------------------------------------------- eigen

std::vector<double> real_eigenvalues(const Mat<double>& m) {
  auto coeff = characteristic_polynomial(m);
  // Deflate the eigenvalue 1 (constants are harmonic) when present.
  std::vector<cld> roots;
  std::vector<long double> work = coeff;
  if (std::abs(eval_poly(coeff, cld(1.0L))) < 1e-12L) {
    std::vector<long double> q(work.size() - 1);
    long double carry = 0;
    for (std::size_t i = work.size(); i-- > 1;) {
      carry = work[i] + carry;
      q[i - 1] = carry;
    }
    work = q;
    roots.push_back(cld(1.0L));
  }
  if (work.size() > 1) {
    auto rest = poly_roots(work);
    // Newton polish on the full polynomial.
    for (auto& z : rest) {
      for (int it = 0; it < 6; ++it) {
        cld d = eval_dpoly(coeff, z);
        if (std::abs(d) < 1e-20L) break;
        cld step = eval_poly(coeff, z) / d;
        if (!std::isfinite(std::abs(step))) break;
        z -= step;
      }
      roots.push_back(z);
    }
  }
  std::vector<double> out;
  for (const auto& z : roots) {
    long double scale = std::max(1.0L, std::abs(z));
    if (std::abs(z) < 1e-7L) {
      out.push_back(0.0);  // reported as degenerate by the caller
      continue;
    }
    if (std::abs(z.imag()) > 1e-8L * scale) {
      std::ostringstream os;
      os << "non-real eigenvalue " << static_cast<double>(z.real()) << (z.imag() < 0 ? "-" : "+")
         << static_cast<double>(std::abs(z.imag())) << "i";
      throw ComplexSpectrum(os.str());
    }
    out.push_back(static_cast<double>(z.real()));
  }
  std::sort(out.begin(), out.end(), [](double a, double b) {
    if (std::fabs(std::fabs(a) - std::fabs(b)) > 1e-12) return std::fabs(a) > std::fabs(b);
    return a > b;
  });
  return out;
}

namespace {

template <class T>
T to_scalar_eigenvalue(double v, const Mat<T>& m) {
  if constexpr (std::is_same_v<T, double>) {
    (void)m;
    return v;
  } else {
    Rational q = rationalize(v, 1000000);
    Mat<Rational> shifted = m - q * Mat<Rational>::identity(m.rows());
    if (null_space(shifted, 0.0).empty())
      throw StructureError("eigenvalue " + std::to_string(v) + " is not rational; exact mode unavailable");
    return q;
  }
}

template <class T>
bool approx_equal(const T& a, const T& b, double tol) {
  if constexpr (Num<T>::exact) {
    (void)tol;
    return a == b;
  } else {
    return std::fabs(a - b) <= tol;
  }
}

template <class T>
void normalize_beta(Vec<T>& b) {
  double mx = 0;
  for (const auto& v : b) mx = std::max(mx, std::fabs(to_double(v)));
  if (mx == 0) return;
  // Scale so the largest magnitude is 1 and the first non-negligible entry is positive.
  std::size_t arg = 0;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (std::fabs(to_double(b[i])) >= mx * (1 - 1e-12)) {
      arg = i;
      break;
    }
  T scale = Num<T>::abs(b[arg]);
  for (auto& v : b) v /= scale;
  for (const auto& v : b) {
    double d = to_double(v);
    if (std::fabs(d) > 1e-9) {
      if (d < 0)
        for (auto& w : b) w = -w;
      break;
    }
  }
}

}  // namespace

template <class T>
EigenSystem<T> spectral_data(const Mat<T>& m, int corner, const Mat<T>& conductance) {
  const std::size_t n = m.rows();
  const int j = corner;
  std::vector<double> approx = real_eigenvalues(m.template cast<double>());
  for (std::size_t k = 0; k < approx.size(); ++k)
    if (std::fabs(approx[k]) < 1e-9) {
      std::ostringstream os;
      os << "M_" << j + 1 << " has a zero eigenvalue (spectrum:";
      for (double v : approx) os << " " << v;
      os << ")";
      throw DegenerateStructure(os.str());
    }
  EigenSystem<T> out;
  out.corner = j;
  for (double v : approx) out.lambda.push_back(to_scalar_eigenvalue<T>(v, m));
  if (!approx_equal(out.lambda[0], T(1), 1e-9))
    throw DegenerateStructure("largest eigenvalue of M_" + std::to_string(j + 1) + " is not 1");

  out.beta = Mat<T>(n, n);
  out.beta(0, j) = T(1);
  if (n >= 2) {
    for (std::size_t l = 0; l < n; ++l)
      if (static_cast<int>(l) != j) {
        out.beta(1, l) = -conductance(l, j);
        out.beta(1, j) += conductance(l, j);
      }
    Vec<T> b2 = out.beta.row(1);
    Vec<T> b2m = b2 * m;
    double res = 0;
    for (std::size_t l = 0; l < n; ++l) res = std::max(res, std::fabs(to_double(b2m[l] - out.lambda[1] * b2[l])));
    if (res > 1e-8 * std::max(1.0, std::fabs(to_double(b2[j]))))
      throw DegenerateStructure("conductance vector of corner " + std::to_string(j + 1) +
                                " is not the left eigenvector of the second eigenvalue");
  }
  // Remaining eigenvalues, grouped by value.
  std::size_t k = 2;
  while (k < n) {
    std::size_t mult = 1;
    while (k + mult < n && approx_equal(out.lambda[k + mult], out.lambda[k], 1e-8)) ++mult;
    if (approx_equal(out.lambda[k], out.lambda[1], 1e-8) || approx_equal(out.lambda[k], T(1), 1e-8))
      throw DegenerateStructure("second eigenvalue of M_" + std::to_string(j + 1) + " is not simple");
    Mat<T> shifted = (m - out.lambda[k] * Mat<T>::identity(n)).transpose();
    auto basis = null_space(shifted, Num<T>::exact ? 0.0 : 1e-8);
    if (basis.size() < mult)
      throw DegenerateStructure("M_" + std::to_string(j + 1) + " lacks a complete set of eigenvectors");
    for (std::size_t q = 0; q < mult; ++q) {
      Vec<T> b = basis[q];
      normalize_beta(b);
      for (std::size_t l = 0; l < n; ++l) out.beta(k + q, l) = b[l];
    }
    k += mult;
  }
  Mat<T> inv;
  try {
    inv = inverse(out.beta);
  } catch (const SingularMatrix&) {
    throw DegenerateStructure("left eigenvectors of M_" + std::to_string(j + 1) + " are not independent");
  }
  out.alpha = inv.transpose();
  double bio = 0, eres = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      T d = dot(out.beta.row(a), out.alpha.row(b)) - (a == b ? T(1) : T(0));
      bio = std::max(bio, std::fabs(to_double(d)));
    }
    Vec<T> bm = out.beta.row(a) * m;
    Vec<T> ma = m * out.alpha.row(a);
    for (std::size_t l = 0; l < n; ++l) {
      eres = std::max(eres, std::fabs(to_double(bm[l] - out.lambda[a] * out.beta(a, l))));
      eres = std::max(eres, std::fabs(to_double(ma[l] - out.lambda[a] * out.alpha(a, l))));
    }
  }
  out.biorthogonality_residual = bio;
  out.eigen_residual = eres;
  return out;
}

template <class T>
Prop23Status prop23_status(const EigenSystem<T>& eig, const Mat<T>& m, double tol) {
  const std::size_t n = m.rows();
  const int j = eig.corner;
  Prop23Status st;
  for (std::size_t k = 2; k < n; ++k) st.residual_a = std::max(st.residual_a, std::fabs(to_double(eig.beta(k, j))));
  // (b): alpha_j2 vanishes at j and is constant elsewhere.
  {
    double res = std::fabs(to_double(eig.alpha(1, j)));
    std::optional<T> ref;
    for (std::size_t l = 0; l < n; ++l) {
      if (static_cast<int>(l) == j) continue;
      if (!ref) {
        ref = eig.alpha(1, l);
        continue;
      }
      res = std::max(res, std::fabs(to_double(eig.alpha(1, l) - *ref)));
    }
    if (ref && std::fabs(to_double(*ref)) <= tol) res = std::max(res, 1.0);
    st.residual_b = res;
  }
  for (std::size_t l = 0; l < n; ++l) {
    T expect = static_cast<int>(l) == j ? T(1) : T(1) - eig.lambda[1];
    st.residual_c = std::max(st.residual_c, std::fabs(to_double(m(l, j) - expect)));
  }
  auto holds = [&](double r) { return Num<T>::exact ? r == 0.0 : r < tol; };
  st.cond_a = holds(st.residual_a);
  st.cond_b = holds(st.residual_b);
  st.cond_c = holds(st.residual_c);
  if (!(st.cond_a == st.cond_b && st.cond_b == st.cond_c)) {
    std::ostringstream os;
    os << "eigenvector conditions disagree at corner " << j + 1 << " (residuals " << st.residual_a << ", "
       << st.residual_b << ", " << st.residual_c << ")";
    throw EquivalenceViolation(os.str());
  }
  return st;
}

template <class T>
Vec<T> measure_gamma(const ExtensionData<T>& ext, const Vec<T>& mu) {
  const std::size_t n0 = ext.extension.cols();
  Mat<T> avg(n0, n0);
  for (std::size_t i = 0; i < ext.maps.size(); ++i) avg = avg + mu[i] * ext.maps[i];
  // gamma^T (avg - I) = 0 and sum gamma = 1.
  Mat<T> sys(n0 + 1, n0);
  Vec<T> rhs(n0 + 1, T(0));
  Mat<T> shifted = (avg - Mat<T>::identity(n0)).transpose();
  for (std::size_t a = 0; a < n0; ++a)
    for (std::size_t b = 0; b < n0; ++b) sys(a, b) = shifted(a, b);
  for (std::size_t b = 0; b < n0; ++b) sys(n0, b) = T(1);
  rhs[n0] = T(1);
  try {
    return solve_consistent(sys, rhs);
  } catch (const SingularMatrix&) {
    throw NonUniqueFixedVector("measure-averaged transformation has a degenerate fixed space");
  }
}

// ---------------------------------------------------------------- Structure

template <class T>
Structure<T>::Structure(std::shared_ptr<const Topology> topology, StructureInputs<T> inputs)
    : topology_(std::move(topology)), inputs_(std::move(inputs)) {
  const int n = N(), n0 = N0();
  if (inputs_.conductance.rows() != static_cast<std::size_t>(n0) ||
      inputs_.conductance.cols() != static_cast<std::size_t>(n0))
    throw std::invalid_argument("conductance matrix must be N0 x N0");
  if (inputs_.r.size() != static_cast<std::size_t>(n) || inputs_.mu.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("r and mu need one entry per map");
  for (int a = 0; a < n0; ++a)
    for (int b = 0; b < n0; ++b) {
      if (to_double(inputs_.conductance(a, b) - inputs_.conductance(b, a)) != 0)
        throw std::invalid_argument("conductances must be symmetric");
      if (a != b && to_double(inputs_.conductance(a, b)) < 0) throw std::invalid_argument("negative conductance");
    }
  for (const auto& v : inputs_.r)
    if (to_double(v) <= 0) throw std::invalid_argument("renormalization factors must be positive");
  for (const auto& v : inputs_.mu)
    if (to_double(v) <= 0) throw std::invalid_argument("measure weights must be positive");
  build_extension();
  build_measure();
  build_eigen();
}

template <class T>
void Structure<T>::build_extension() {
  const Topology& topo = *topology_;
  const int n0 = N0(), p = topo.template_size();
  Vec<T> weight(N());
  for (int i = 0; i < N(); ++i) weight[i] = T(1) / inputs_.r[i];
  ext_.level1_laplacian = level1_laplacian(topo, inputs_.conductance, weight);
  auto [ei, schur] = extension_and_schur(ext_.level1_laplacian, static_cast<std::size_t>(n0));
  ext_.extension = Mat<T>(p, n0);
  for (int a = 0; a < n0; ++a) ext_.extension(a, a) = T(1);
  for (int q = n0; q < p; ++q)
    for (int a = 0; a < n0; ++a) ext_.extension(q, a) = ei(q - n0, a);
  ext_.renormalization_residual = (schur - laplacian_of(inputs_.conductance)).max_abs();
  ext_.maps.assign(N(), Mat<T>(n0, n0));
  for (int i = 0; i < N(); ++i)
    for (int a = 0; a < n0; ++a)
      for (int b = 0; b < n0; ++b) ext_.maps[i](a, b) = ext_.extension(topo.template_point(i, a), b);
  ext_.corner.clear();
  for (int j = 0; j < n0; ++j) ext_.corner.push_back(ext_.maps[topo.fixed_map(j)]);
  Mat<T> lii = Blocks::sub(ext_.level1_laplacian, n0, p, n0, p);
  psi_ = inverse(lii);
}

template <class T>
void Structure<T>::build_measure() {
  gamma_ = measure_gamma(ext_, inputs_.mu);
  const std::size_t n0 = static_cast<std::size_t>(N0());
  const std::size_t u = n0 * n0;
  Mat<T> sys(u + 1, u);
  Vec<T> rhs(u + 1, T(0));
  for (std::size_t a = 0; a < n0; ++a)
    for (std::size_t b = 0; b < n0; ++b) {
      std::size_t row = a * n0 + b;
      sys(row, row) += T(1);
      for (std::size_t i = 0; i < ext_.maps.size(); ++i) {
        const Mat<T>& m = ext_.maps[i];
        for (std::size_t c = 0; c < n0; ++c) {
          if (Num<T>::is_zero(m(c, a), 0.0)) continue;
          for (std::size_t d = 0; d < n0; ++d) sys(row, c * n0 + d) -= inputs_.mu[i] * m(c, a) * m(d, b);
        }
      }
    }
  for (std::size_t q = 0; q < u; ++q) sys(u, q) = T(1);
  rhs[u] = T(1);
  Vec<T> flat;
  try {
    flat = solve_consistent(sys, rhs);
  } catch (const SingularMatrix&) {
    throw NonUniqueFixedVector("harmonic product integrals are not uniquely determined");
  }
  mass_ = Mat<T>(n0, n0);
  for (std::size_t a = 0; a < n0; ++a)
    for (std::size_t b = 0; b < n0; ++b) mass_(a, b) = flat[a * n0 + b];
}

template <class T>
void Structure<T>::build_eigen() {
  eig_.clear();
  try {
    for (int j = 0; j < N0(); ++j) eig_.push_back(spectral_data(ext_.corner[j], j, inputs_.conductance));
  } catch (const StructureError& e) {
    eig_.clear();
    eigen_error_ = e.what();
    if (eigen_error_.empty()) eigen_error_ = "degenerate";
  }
}

template <class T>
const EigenSystem<T>& Structure<T>::eigen(int corner) const {
  require_nondegenerate();
  return eig_.at(corner);
}

template <class T>
void Structure<T>::require_nondegenerate() const {
  if (!eigen_error_.empty()) throw DegenerateStructure(eigen_error_);
}

template <class T>
T Structure<T>::degree(int corner) const {
  T s(0);
  for (int i = 0; i < N0(); ++i)
    if (i != corner) s += inputs_.conductance(i, corner);
  return s;
}

template <class T>
Vec<T> Structure<T>::a_spline(int corner, int k) const {
  const EigenSystem<T>& e = eigen(corner);
  if (k < 1 || k >= N0()) throw std::invalid_argument("a_spline needs 2 <= k <= N0");
  const Topology& topo = *topology_;
  const int n0 = N0(), p = topo.template_size();
  const int cell = topo.fixed_map(corner);
  // d_ik psi_p(v_i) for every interior template point p.
  Vec<T> dpsi(p - n0, T(0));
  for (int a = 0; a < n0; ++a) {
    int q = topo.template_point(cell, a);
    if (q >= n0) dpsi[q - n0] += e.beta(k, a);
  }
  for (auto& v : dpsi) v /= e.lambda[k];
  Vec<T> out(p, T(0));
  for (int q = n0; q < p; ++q)
    for (int pp = n0; pp < p; ++pp) out[q] += psi_(pp - n0, q - n0) * dpsi[pp - n0];
  return out;
}

// ---------------------------------------------------------------- bilateral

BilateralFamily bilateral_family(double c) {
  if (!(c > 0)) throw NoPositiveRoot("bilateral family needs c > 0");
  const double qa = 3 * c * c + 2 * c, qb = -2 * c * c, qc = -(2 * c + 1);
  const double disc = qb * qb - 4 * qa * qc;
  if (disc < 0) throw NoPositiveRoot("renormalization quadratic has no real root");
  const double s = (-qb + std::sqrt(disc)) / (2 * qa);
  if (!(s > 0)) throw NoPositiveRoot("renormalization quadratic has no positive root");

  BilateralFamily out;
  out.c = c;
  out.s = s;
  out.eta = (2 * c + s * c + 1) / (2 * s * c + 2 * s + 4 * c + 2);

  FractalSpec spec;
  spec.name = "bilateral-sg";
  spec.map_count = 3;
  spec.boundary_count = 3;
  spec.glue = {{0, 1, 1, 0}, {0, 2, 2, 0}, {1, 2, 2, 1}};
  spec.fixed_map = {0, 1, 2};
  Topology topo(spec);

  auto build = [&](auto cval, auto sval) {
    using T = decltype(cval);
    Mat<T> cond(3, 3);
    cond(0, 1) = cond(1, 0) = T(1);
    cond(0, 2) = cond(2, 0) = T(1);
    cond(1, 2) = cond(2, 1) = cval;
    Vec<T> weight{sval, T(1), T(1)};
    auto lap = level1_laplacian(topo, cond, weight);
    auto schur = extension_and_schur(lap, 3).second;
    Mat<T> l0 = laplacian_of(cond);
    T num(0), den(0);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        num += schur(a, b) * l0(a, b);
        den += l0(a, b) * l0(a, b);
      }
    T kappa = num / den;
    double res = (schur - kappa * l0).max_abs();
    StructureInputs<T> in;
    in.conductance = cond;
    in.r = {kappa / sval, kappa, kappa};
    in.mu = {T(1) / T(3), T(1) / T(3), T(1) / T(3)};
    return std::make_pair(in, res);
  };

  auto [in, res] = build(c, s);
  out.proportionality_residual = res;
  if (res > 1e-9) throw ProportionalityFailure("minimized level-1 form is not proportional to E_0");
  out.structure.values = in;
  // Exact form when c and s are (small-denominator) rationals solving the quadratic.
  Rational cq = rationalize(c, 100000), sq = rationalize(s, 100000);
  if (cq.get_d() == c && 3 * sq * sq * cq * cq + 2 * sq * sq * cq - 2 * sq * cq * cq - 2 * cq - 1 == 0) {
    auto [qin, qres] = build(cq, sq);
    if (qres == 0) out.structure.exact = qin;
  }
  return out;
}

// ---------------------------------------------------------------- validate

template <class T>
ValidationReport validate(const Structure<T>& s, const std::string& name) {
  ValidationReport rep;
  rep.name = name;
  auto add = [&](std::string check, bool pass, double residual, std::string detail = {}) {
    rep.checks.push_back({std::move(check), pass, residual, std::move(detail)});
    if (!pass) rep.pass = false;
  };
  const double tol = 1e-10;
  add("renormalization", s.extension().renormalization_residual < tol, s.extension().renormalization_residual);
  double rbad = 0;
  for (int i = 0; i < s.N(); ++i) {
    double r = to_double(s.r(i));
    if (!(r > 0 && r < 1)) rbad = std::max(rbad, 1.0);
  }
  add("r_in_unit_interval", rbad == 0, rbad);
  T musum(0);
  for (int i = 0; i < s.N(); ++i) musum += s.mu(i);
  add("mu_sums_to_one", std::fabs(to_double(musum) - 1) < tol, std::fabs(to_double(musum) - 1));

  double rows = 0;
  for (int j = 0; j < s.N0(); ++j) {
    const Mat<T>& m = s.corner_matrix(j);
    for (int a = 0; a < s.N0(); ++a) {
      T sum(0);
      for (int b = 0; b < s.N0(); ++b) sum += m(a, b);
      rows = std::max(rows, std::fabs(to_double(sum) - 1));
      rows = std::max(rows, std::fabs(to_double(m(j, a)) - (a == j ? 1.0 : 0.0)));
    }
  }
  add("transformation_rows", rows < tol, rows);

  {
    T gsum(0);
    for (const auto& g : s.gamma()) gsum += g;
    add("gamma_normalized", std::fabs(to_double(gsum) - 1) < tol, std::fabs(to_double(gsum) - 1));
  }

  if (!s.nondegenerate()) {
    rep.pass = false;
    rep.failure = "DegenerateStructure: " + s.degeneracy_reason();
    add("nondegenerate", false, 0, s.degeneracy_reason());
    return rep;
  }
  for (int j = 0; j < s.N0(); ++j) {
    const auto& e = s.eigen(j);
    const Mat<T>& m = s.corner_matrix(j);
    std::string tag = "_" + std::to_string(j + 1);
    add("lambda1_is_1" + tag, std::fabs(to_double(e.lambda[0]) - 1) < tol, std::fabs(to_double(e.lambda[0]) - 1));
    double r = to_double(s.r(s.topology().fixed_map(j)));
    add("lambda2_is_r" + tag, std::fabs(to_double(e.lambda[1]) - r) < tol, std::fabs(to_double(e.lambda[1]) - r));
    double gap = -1;
    for (int k = 2; k < s.N0(); ++k) gap = std::max(gap, std::fabs(to_double(e.lambda[k])) - to_double(e.lambda[1]));
    add("spectral_gap" + tag, gap < 0, gap);
    add("biorthogonal" + tag, e.biorthogonality_residual < tol, e.biorthogonality_residual);
    add("eigen_equations" + tag, e.eigen_residual < tol, e.eigen_residual);
    double prop_e = 0;
    for (int k = 1; k < s.N0(); ++k) {
      T sum(0);
      for (int l = 0; l < s.N0(); ++l) sum += e.beta(k, l);
      prop_e = std::max(prop_e, std::fabs(to_double(sum)));
      prop_e = std::max(prop_e, std::fabs(to_double(e.alpha(k, j))));
    }
    add("beta_sums_alpha_vanish" + tag, prop_e < tol, prop_e);
    double prop_a = 0;
    for (int l = 0; l < s.N0(); ++l) prop_a = std::max(prop_a, std::fabs(to_double(e.alpha(0, l)) - 1));
    add("alpha1_constant" + tag, prop_a < tol, prop_a);
    // Representation of a random harmonic function through h_jk.
    std::mt19937 rng(1234 + j);
    std::uniform_int_distribution<int> dist(-9, 9);
    Vec<T> h(s.N0());
    for (auto& v : h) v = T(dist(rng)) / T(7);
    Vec<T> rebuilt(s.N0(), h[j]);
    for (int k = 1; k < s.N0(); ++k) {
      T d = dot(e.beta_row(k), h);
      for (int l = 0; l < s.N0(); ++l) rebuilt[l] += d * e.alpha(k, l);
    }
    double rep_res = 0;
    for (int l = 0; l < s.N0(); ++l) rep_res = std::max(rep_res, std::fabs(to_double(rebuilt[l] - h[l])));
    add("harmonic_representation" + tag, rep_res < tol, rep_res);
    try {
      auto st = prop23_status(e, m, tol);
      std::ostringstream os;
      os << "(a,b,c) = (" << st.cond_a << "," << st.cond_b << "," << st.cond_c << ")";
      add("prop23_equivalence" + tag, true, std::max({st.residual_a, st.residual_b, st.residual_c}), os.str());
    } catch (const EquivalenceViolation& ex) {
      add("prop23_equivalence" + tag, false, 0, ex.what());
    }
  }
  return rep;
}

ValidationReport validate(std::shared_ptr<const Topology> topology, const HarmonicStructure& h,
                          const std::string& name) {
  try {
    Structure<double> s(std::move(topology), h.values);
    return validate(s, name);
  } catch (const StructureError& e) {
    ValidationReport rep;
    rep.name = name;
    rep.pass = false;
    rep.failure = e.what();
    return rep;
  }
}

template class Structure<double>;
template class Structure<Rational>;
template EigenSystem<double> spectral_data(const Mat<double>&, int, const Mat<double>&);
template EigenSystem<Rational> spectral_data(const Mat<Rational>&, int, const Mat<Rational>&);
template Prop23Status prop23_status(const EigenSystem<double>&, const Mat<double>&, double);
template Prop23Status prop23_status(const EigenSystem<Rational>&, const Mat<Rational>&, double);
template Vec<double> measure_gamma(const ExtensionData<double>&, const Vec<double>&);
template Vec<Rational> measure_gamma(const ExtensionData<Rational>&, const Vec<Rational>&);
template ValidationReport validate(const Structure<double>&, const std::string&);
template ValidationReport validate(const Structure<Rational>&, const std::string&);

}  // namespace fractal
