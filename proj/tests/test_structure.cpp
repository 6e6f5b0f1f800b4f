#include <doctest.h>

#include "fractal/derivatives.hpp"
#include "fractal/presets.hpp"
#include "oracles.hpp"

using namespace fractal;

namespace {
const std::vector<std::string> kNondegenerate = {"sg", "sg3", "hexagasket"};
}

TEST_CASE("standard gasket spectrum is exact") {
  Structure<Rational> s = preset("sg").build_exact();
  for (int j = 0; j < 3; ++j) {
    const auto& e = s.eigen(j);
    CHECK(e.lambda[0] == Rational(1));
    CHECK(e.lambda[1] == Rational(3, 5));
    CHECK(e.lambda[2] == Rational(1, 5));
  }
  // β_12 = (2, -1, -1).
  CHECK(s.eigen(0).beta_row(1) == Vec<Rational>{Rational(2), Rational(-1), Rational(-1)});
}

TEST_CASE("M_1 of the gasket is the 2/5-1/5 rule") {
  Structure<Rational> s = preset("sg").build_exact();
  const Mat<Rational>& m = s.corner_matrix(0);
  Rational t(2, 5), o(1, 5);
  CHECK(m(0, 0) == 1);
  CHECK(m(1, 0) == t);
  CHECK(m(1, 1) == t);
  CHECK(m(1, 2) == o);
  CHECK(m(2, 1) == o);
}

TEST_CASE("hexagasket and level-3 gasket third eigenvalues") {
  CHECK(preset("hexagasket").build().eigen(0).lambda[2] == doctest::Approx(1.0 / 7).epsilon(1e-8));
  CHECK(preset("sg3").build().eigen(0).lambda[2] == doctest::Approx(1.0 / 15).epsilon(1e-8));
  // r_j μ_j for the rate selection.
  Structure<Rational> hex = preset("hexagasket").build_exact();
  CHECK(hex.r(0) * hex.mu(0) == Rational(1, 14));
  Structure<Rational> sg3 = preset("sg3").build_exact();
  CHECK(sg3.r(0) * sg3.mu(0) == Rational(7, 90));
}

TEST_CASE("Vicsek set is refused") {
  Structure<double> s = preset("vicsek").build();
  CHECK_FALSE(s.nondegenerate());
  CHECK_THROWS_AS(s.require_nondegenerate(), DegenerateStructure);
  CHECK_THROWS_AS(s.eigen(0), DegenerateStructure);
  auto ev = oracle::eigenvalues(s.corner_matrix(0));
  CHECK(ev[0] == doctest::Approx(1));
  CHECK(ev[1] == doctest::Approx(1.0 / 3));
  CHECK(std::fabs(ev[2]) < 1e-12);
  CHECK(std::fabs(ev[3]) < 1e-12);
}

TEST_CASE("eigen-data invariants on every nondegenerate preset (property)") {
  for (const auto& name : kNondegenerate) {
    CAPTURE(name);
    Structure<double> s = preset(name).build();
    const int n0 = s.N0();
    for (int j = 0; j < n0; ++j) {
      const auto& e = s.eigen(j);
      const Mat<double>& m = s.corner_matrix(j);
      // (a) λ1 = 1, α1 constant, β1 = δ_j.
      CHECK(e.lambda[0] == doctest::Approx(1).epsilon(1e-12));
      for (int l = 0; l < n0; ++l) {
        CHECK(std::fabs(e.alpha(0, l) - 1) < 1e-10);
        CHECK(std::fabs(e.beta(0, l) - (l == j ? 1 : 0)) < 1e-10);
      }
      // (b) λ2 = r_j and β_j2 from the conductances.
      CHECK(std::fabs(e.lambda[1] - s.r(s.topology().fixed_map(j))) < 1e-10);
      CHECK(std::fabs(e.beta(1, j) - s.degree(j)) < 1e-10);
      for (int l = 0; l < n0; ++l)
        if (l != j) CHECK(std::fabs(e.beta(1, l) + s.conductance(l, j)) < 1e-10);
      // (c) strict gap.
      for (int k = 2; k < n0; ++k) CHECK(std::fabs(e.lambda[k]) < e.lambda[1]);
      // (d) biorthogonality, eigen equations.
      for (int k = 0; k < n0; ++k) {
        Vec<double> bm = e.beta_row(k) * m, ma = m * e.alpha_row(k);
        for (int l = 0; l < n0; ++l) {
          CHECK(std::fabs(bm[l] - e.lambda[k] * e.beta(k, l)) < 1e-10);
          CHECK(std::fabs(ma[l] - e.lambda[k] * e.alpha(k, l)) < 1e-10);
          CHECK(std::fabs(dot(e.beta_row(k), e.alpha_row(l)) - (k == l ? 1 : 0)) < 1e-10);
        }
      }
      // (e) β_jk sums to zero and α_jk vanishes at v_j for k >= 2.
      for (int k = 1; k < n0; ++k) {
        double sum = 0;
        for (int l = 0; l < n0; ++l) sum += e.beta(k, l);
        CHECK(std::fabs(sum) < 1e-10);
        CHECK(std::fabs(e.alpha(k, j)) < 1e-10);
      }
    }
    ValidationReport rep = validate(s, name);
    CHECK(rep.pass);
    for (const auto& c : rep.checks) {
      CAPTURE(c.name);
      CHECK(c.residual < 1e-10);
    }
  }
}

TEST_CASE("h_jk scale by λ_jk under F_j and have d_jk h_jl = δ (property)") {
  for (const auto& name : kNondegenerate) {
    CAPTURE(name);
    auto s = std::make_shared<const Structure<double>>(preset(name).build());
    const int n0 = s->N0();
    for (int j = 0; j < n0; ++j) {
      const auto& e = s->eigen(j);
      const int fm = s->topology().fixed_map(j);
      for (int l = 1; l < n0; ++l) {
        Vec<double> a = e.alpha_row(l);
        Vec<double> on_cell = s->extension().maps[fm] * a;
        for (int p = 0; p < n0; ++p) CHECK(std::fabs(on_cell[p] - e.lambda[l] * a[p]) < 1e-10);
        CHECK(std::fabs(a[j]) < 1e-12);  // h_jl(v_j) = 0
        auto h = PoissonFn<double>::harmonic(s, a);
        for (int k = 1; k < n0; ++k) {
          double d = exact_derivative(h, Side{Word(), j}, k).value;
          CHECK(std::fabs(d - (k == l ? 1 : 0)) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("three-way equivalence: symmetric presets satisfy all, bilateral c=1.1 none off-axis") {
  for (const auto& name : kNondegenerate) {
    Structure<double> s = preset(name).build();
    for (int j = 0; j < s.N0(); ++j) {
      Prop23Status p = prop23_status(s.eigen(j), s.corner_matrix(j));
      CHECK(p.cond_a);
      CHECK(p.cond_b);
      CHECK(p.cond_c);
    }
  }
  Structure<double> b = preset("bilateral-sg", 1.1).build();
  for (int j = 1; j < 3; ++j) {
    Prop23Status p = prop23_status(b.eigen(j), b.corner_matrix(j));
    CHECK_FALSE(p.cond_a);
    CHECK_FALSE(p.cond_b);
    CHECK_FALSE(p.cond_c);
  }
}

TEST_CASE("bilateral family") {
  BilateralFamily one = bilateral_family(1.0);
  CHECK(one.s == doctest::Approx(1).epsilon(1e-12));
  Structure<double> s1(preset("sg").topology, one.structure.values);
  Structure<double> sg = preset("sg").build();
  CHECK((s1.corner_matrix(1) - sg.corner_matrix(1)).max_abs() < 1e-12);
  for (double c : {0.5, 1.0, 1.1, 2.0}) {
    BilateralFamily f = bilateral_family(c);
    CHECK(f.proportionality_residual < 1e-10);
    // Renormalization quadratic in s.
    double q = 3 * f.s * f.s * c * c + 2 * f.s * f.s * c - 2 * f.s * c * c - 2 * c - 1;
    CHECK(std::fabs(q) < 1e-10);
    CHECK(f.s > 0);
  }
}

TEST_CASE("harmonic mass and Green kernel") {
  Structure<Rational> s = preset("sg").build_exact();
  // ∫H_i = 1/3 on the gasket.
  for (const auto& g : s.gamma()) CHECK(g == Rational(1, 3));
  Rational total(0);
  const Mat<Rational>& q = s.harmonic_mass();
  for (int i = 0; i < 3; ++i)
    for (int l = 0; l < 3; ++l) total += q(i, l);
  CHECK(total == Rational(1));
  // Ψ is the inverse of the interior block of the level-1 form.
  const Mat<Rational>& psi = s.green_kernel();
  const Mat<Rational>& lap = s.extension().level1_laplacian;
  const int p = s.topology().template_size();
  for (int a = 3; a < p; ++a)
    for (int b = 3; b < p; ++b) {
      Rational sum(0);
      for (int c = 3; c < p; ++c) sum += lap(a, c) * psi(c - 3, b - 3);
      CHECK(sum == Rational(a == b ? 1 : 0));
    }
}
