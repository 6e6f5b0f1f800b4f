#include <doctest.h>

#include <random>

#include "fractal/derivatives.hpp"
#include "fractal/presets.hpp"

using namespace fractal;

namespace {

std::shared_ptr<const Structure<Rational>> exact_sg() {
  return std::make_shared<const Structure<Rational>>(preset("sg").build_exact());
}

}  // namespace

TEST_CASE("derivatives of h = (0,1,1) at v_1") {
  auto s = exact_sg();
  auto h = PoissonFn<Rational>::harmonic(s, Vec<Rational>{0, 1, 1});
  CHECK(exact_derivative_value(h, Side{Word(), 0}, 1) == -2);
  CHECK(exact_derivative_value(h, Side{Word(), 0}, 2) == 0);
}

TEST_CASE("tangential derivatives of h = (0,1,1) along the edge") {
  auto s = exact_sg();
  auto h = PoissonFn<Rational>::harmonic(s, Vec<Rational>{0, 1, 1});
  const Topology& topo = s->topology();
  for (int m = 0; m <= 6; ++m) {
    // F_1^m F_2 v_3 seen from F_1^m F_2 (corner 3).
    Word w = Word::repeat(0, m) + 1;
    CHECK(exact_derivative_value(h, Side{w, 2}, 1) == 0);
    if (m >= 1) {
      // F_1^m v_2 seen from F_1^{m-1} F_2 (corner 1).
      Word c = Word::repeat(0, m - 1) + 1;
      CHECK(topo.canonicalize(c, 0) == topo.canonicalize(Word::repeat(0, m), 1));
      CHECK(exact_derivative_value(h, Side{c, 0}, 2) == Rational(1, 3));
    }
  }
}

TEST_CASE("approximant sequence of a harmonic function is constant") {
  auto s = exact_sg();
  Vec<Rational> b{Rational(1, 7), Rational(-2), Rational(3)};
  CellOracle<Rational> oracle = [&](const Word& w) { return walk_harmonic(*s, b, w); };
  for (int k = 1; k < 3; ++k) {
    Vec<Rational> seq = derivative_approximants(*s, oracle, Side{Word::parse("21"), 2}, k, 6);
    for (const auto& v : seq) CHECK(v == seq[0]);
  }
}

TEST_CASE("extrapolation recovers geometric limits") {
  std::vector<double> v;
  for (int m = 0; m < 12; ++m) v.push_back(2.5 - 0.7 * std::pow(0.4, m));
  Extrapolation e = extrapolate(v);
  CHECK(e.converged);
  CHECK(e.limit == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(e.ratio == doctest::Approx(0.4).epsilon(1e-8));
  std::vector<double> grow;
  for (int m = 0; m < 12; ++m) grow.push_back(std::pow(1.7, m));
  CHECK_FALSE(extrapolate(grow).converged);
  CHECK(extrapolate(std::vector<double>(6, 3.0)).limit == 3.0);
}

TEST_CASE("constant load: boundary fluxes are -1/3 each") {
  // -Δu = 1 with zero boundary: total flux -∫1 = -1, split by symmetry.
  auto s = exact_sg();
  auto u = PoissonFn<Rational>::constant_load(s, Rational(1), Vec<Rational>(3, Rational(0)));
  for (int j = 0; j < 3; ++j) CHECK(exact_derivative_value(u, Side{Word(), j}, 1) == Rational(-1, 3));
}

TEST_CASE("exact derivatives agree with the approximant limits (property)") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> pick(0, 2);
  for (const char* name : {"sg", "sg3", "hexagasket"}) {
    CAPTURE(name);
    auto s = std::make_shared<const Structure<double>>(preset(name).build());
    auto u = PoissonFn<double>::constant_load(s, 1.0, Vec<double>(s->N0(), 0.0));
    CellOracle<double> oracle = [&](const Word& w) { return u.cell_values(w); };
    for (int trial = 0; trial < 3; ++trial) {
      Word w;
      for (int l = 0; l < 2; ++l) w = w + pick(rng);
      Side side{w, pick(rng)};
      for (int k = 1; k < s->N0(); ++k) {
        double ex = exact_derivative(u, side, k).value;
        DerivativeEstimate est = derivative_sequence(*s, oracle, side, k, 10);
        CHECK(est.fit.converged);
        CHECK(std::fabs(est.fit.limit - ex) < 1e-6 * std::max(1.0, std::fabs(ex)));
      }
    }
  }
}

TEST_CASE("rational and binary64 exact derivatives agree") {
  auto sq = exact_sg();
  auto sd = std::make_shared<const Structure<double>>(preset("sg").build());
  auto uq = PoissonFn<Rational>::constant_load(sq, Rational(1), Vec<Rational>{0, 1, 0});
  auto ud = PoissonFn<double>::constant_load(sd, 1.0, Vec<double>{0, 1, 0});
  for (const char* w : {"", "1", "23", "312"})
    for (int c = 0; c < 3; ++c)
      for (int k = 1; k < 3; ++k) {
        Side side{Word::parse(w), c};
        CHECK(exact_derivative_value(uq, side, k).get_d() ==
              doctest::Approx(exact_derivative(ud, side, k).value).epsilon(1e-12));
      }
}

TEST_CASE("normal derivatives sum to zero at junctions (property)") {
  for (const char* name : {"sg", "sg3", "hexagasket"}) {
    CAPTURE(name);
    auto s = std::make_shared<const Structure<double>>(preset(name).build());
    auto u = PoissonFn<double>::constant_load(s, 1.0, Vec<double>(s->N0(), 0.0));
    for (VertexId x : s->topology().vertex_set(2)) {
      if (x.index < static_cast<std::uint64_t>(s->N0())) continue;
      Gradient g = gradient(u, x);
      CHECK(g.junction == (s->topology().sides(x).size() > 1));
      CHECK(std::fabs(g.compatibility_residual) < 1e-10);
      CHECK(g.differentiable);
    }
  }
}

TEST_CASE("weak tangent of a harmonic function is itself") {
  auto s = std::make_shared<const Structure<double>>(preset("sg").build());
  Vec<double> b{0.2, -0.4, 1.0};
  auto h = PoissonFn<double>::harmonic(s, b);
  VertexId x = s->topology().canonicalize(Word::parse("1"), 1);
  WeakTangent t = weak_tangent(h, x);
  CHECK(t.value == doctest::Approx(h.value(x)));
  for (std::size_t c = 0; c < t.patch.cells.size(); ++c) {
    Vec<double> want = h.cell_values(t.patch.cells[c]);
    for (int a = 0; a < 3; ++a) CHECK(t.patch.corner_values[c][a] == doctest::Approx(want[a]).epsilon(1e-12));
  }
}

TEST_CASE("h_m approximants: fixed points on harmonic data, convergence to the tangent") {
  auto s = std::make_shared<const Structure<double>>(preset("sg").build());
  const Topology& topo = s->topology();
  VertexId x = topo.canonicalize(Word::parse("1"), 1);
  auto h = PoissonFn<double>::harmonic(s, Vec<double>{1, 0, -2});
  std::function<double(VertexId)> hv = [&](VertexId v) { return h.value(v); };
  for (int m = 0; m <= 4; ++m) {
    CellPatch<double> p = hm_approximant<double>(*s, hv, x, m);
    for (std::size_t c = 0; c < p.cells.size(); ++c) {
      Vec<double> want = h.cell_values(p.cells[c]);
      for (int a = 0; a < 3; ++a) CHECK(std::fabs(p.corner_values[c][a] - want[a]) < 1e-9);
    }
  }
  auto u = PoissonFn<double>::constant_load(s, 1.0, Vec<double>(3, 0.0));
  std::function<double(VertexId)> uv = [&](VertexId v) { return u.value(v); };
  WeakTangent t = weak_tangent(u, x);
  double prev = 1e9;
  for (int m = 2; m <= 8; ++m) {
    double d = patch_distance(*s, hm_approximant<double>(*s, uv, x, m), t.patch, 2);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("patch derivatives of a harmonic patch equal the exact values") {
  auto s = exact_sg();
  auto h = PoissonFn<Rational>::harmonic(s, Vec<Rational>{0, 1, 1});
  VertexId x = s->topology().canonicalize(Word::parse("2"), 2);
  std::function<Rational(VertexId)> hv = [&](VertexId v) { return h.value(v); };
  CellPatch<Rational> p = hm_approximant<Rational>(*s, hv, x, 2);
  for (const Side& side : s->topology().sides(x))
    for (int k = 1; k < 3; ++k) CHECK(patch_derivative(*s, p, side, k) == exact_derivative_value(h, side, k));
}

TEST_CASE("derivative index is validated") {
  auto s = exact_sg();
  auto h = PoissonFn<Rational>::harmonic(s, Vec<Rational>{0, 1, 1});
  CHECK_THROWS(exact_derivative(h, Side{Word(), 0}, 0));
  CHECK_THROWS(exact_derivative(h, Side{Word(), 0}, 3));
}
