#include <doctest.h>

#include <random>
#include <sstream>

#include "fractal/calculus.hpp"
#include "fractal/presets.hpp"
#include "oracles.hpp"

using namespace fractal;

namespace {

Vec<double> random_boundary(std::mt19937_64& rng, int n0) {
  std::uniform_real_distribution<double> u(-1, 1);
  Vec<double> b(n0);
  for (auto& v : b) v = u(rng);
  return b;
}

}  // namespace

TEST_CASE("harmonic extension of (0,1,1) on the gasket") {
  Structure<Rational> s = preset("sg").build_exact();
  const Topology& topo = s.topology();
  GridFunction<Rational> h = harmonic_extend(s, Vec<Rational>{0, 1, 1}, 2);
  auto at = [&](const char* w, int c) { return h[topo.canonicalize(Word::parse(w), c)]; };
  CHECK(at("1", 1) == Rational(3, 5));
  CHECK(at("1", 2) == Rational(3, 5));
  CHECK(at("2", 2) == Rational(4, 5));
  CHECK(at("11", 1) == Rational(9, 25));
  CHECK(at("11", 2) == Rational(9, 25));
  CHECK(at("12", 2) == Rational(12, 25));
}

TEST_CASE("harmonic extension minimizes the level-m energy (oracle)") {
  std::mt19937_64 rng(11);
  for (const char* name : {"sg", "sg3", "hexagasket", "vicsek"}) {
    CAPTURE(name);
    Structure<double> s = preset(name).build();
    const int m = std::string(name) == "sg" ? 5 : 2;
    Vec<double> b = random_boundary(rng, s.N0());
    GridFunction<double> h = harmonic_extend(s, b, m);
    Eigen::VectorXd ref = oracle::harmonic(s, b, m);
    REQUIRE(h.size() == static_cast<std::size_t>(ref.size()));
    for (std::size_t v = 0; v < h.size(); ++v) CHECK(std::fabs(h.values[v] - ref(v)) < 1e-11);
  }
}

TEST_CASE("energy of a harmonic function is level independent (property)") {
  std::mt19937_64 rng(5);
  for (const char* name : {"sg", "sg3", "hexagasket"}) {
    Structure<double> s = preset(name).build();
    Vec<double> b = random_boundary(rng, s.N0());
    double e0 = energy(s, harmonic_extend(s, b, 0), harmonic_extend(s, b, 0));
    for (int m = 1; m <= 3; ++m) {
      GridFunction<double> h = harmonic_extend(s, b, m);
      CHECK(energy(s, h, h) == doctest::Approx(e0).epsilon(1e-11));
    }
  }
}

TEST_CASE("refinement is consistent with harmonic extension") {
  Structure<Rational> s = preset("sg").build_exact();
  Vec<Rational> b{Rational(1, 2), Rational(-1), Rational(2, 3)};
  GridFunction<Rational> coarse = harmonic_extend(s, b, 1);
  GridFunction<Rational> fine = refine(s, coarse, 4);
  GridFunction<Rational> direct = harmonic_extend(s, b, 4);
  CHECK(fine.values == direct.values);
  CHECK(coarse.restrict_to(s.topology(), 0).values == b);
}

TEST_CASE("integrals of piecewise harmonic functions") {
  Structure<Rational> s = preset("sg").build_exact();
  GridFunction<Rational> one{3, Vec<Rational>(s.topology().vertex_count(3), Rational(1))};
  CHECK(integrate(s, one) == 1);
  for (int i = 0; i < 3; ++i) {
    Vec<Rational> e(3, Rational(0));
    e[i] = 1;
    CHECK(integrate(s, harmonic_extend(s, e, 2)) == Rational(1, 3));
  }
  Vec<Rational> t = tent_integrals(s, 2);
  Rational sum(0);
  for (auto& v : t) sum += v;
  CHECK(sum == 1);
  CHECK(t[4] == Rational(2, 27));  // interior tent at level 2
  GridFunction<Rational> f = harmonic_extend(s, Vec<Rational>{1, 2, 3}, 2);
  GridFunction<Rational> g = harmonic_extend(s, Vec<Rational>{0, -1, 5}, 2);
  CHECK(integrate_product(s, f, g) == integrate_product(s, g, f));
  // Refining does not change an integral of piecewise harmonic data.
  CHECK(integrate_product(s, f, g) == integrate_product(s, refine(s, f, 4), refine(s, g, 4)));
}

TEST_CASE("Poisson solve with constant load matches the graph oracle") {
  // G(x, .) is piecewise harmonic at level m for x in V_m, so the Galerkin
  // system with tent loads is exact at the vertices.
  Structure<double> s = preset("sg").build();
  for (int m = 1; m <= 6; ++m) {
    GridFunction<double> g{m, Vec<double>(s.topology().vertex_count(m), 1.0)};
    GridFunction<double> u = solve_poisson(s, g, Vec<double>(3, 0.0));
    Eigen::VectorXd ref = oracle::sg_lumped_poisson(s, m);
    for (std::size_t v = 0; v < u.size(); ++v) CHECK(std::fabs(u.values[v] - ref(v)) < 1e-12);
  }
}

TEST_CASE("Poisson solution at a finer level restricts to the coarse solution (property)") {
  auto s = std::make_shared<const Structure<double>>(preset("sg3").build());
  auto u = PoissonFn<double>::constant_load(s, 1.0, Vec<double>{0.0, 0.5, -0.25});
  GridFunction<double> fine = u.sample(4);
  GridFunction<double> g4{4, Vec<double>(s->topology().vertex_count(4), 1.0)};
  GridFunction<double> direct = solve_poisson(*s, g4, Vec<double>{0.0, 0.5, -0.25});
  for (std::size_t v = 0; v < direct.size(); ++v) CHECK(std::fabs(fine.values[v] - direct.values[v]) < 1e-12);
}

TEST_CASE("Green series and sparse solve agree, exact arithmetic agrees with binary64") {
  auto sq = std::make_shared<const Structure<Rational>>(preset("sg").build_exact());
  auto sd = std::make_shared<const Structure<double>>(preset("sg").build());
  const int m = 3;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(-5, 5);
  GridFunction<Rational> gq{m, Vec<Rational>(sq->topology().vertex_count(m))};
  GridFunction<double> gd{m, Vec<double>(gq.size())};
  for (std::size_t v = 0; v < gq.size(); ++v) {
    gq.values[v] = Rational(d(rng), 3);
    gd.values[v] = gq.values[v].get_d();
  }
  Vec<Rational> bq{Rational(1), Rational(0), Rational(-1, 2)};
  GridFunction<Rational> uq = solve_poisson(*sq, gq, bq, PoissonMethod::green);
  GridFunction<double> us = solve_poisson(*sd, gd, Vec<double>{1, 0, -0.5});
  GridFunction<double> ug = solve_poisson(*sd, gd, Vec<double>{1, 0, -0.5}, PoissonMethod::green);
  for (std::size_t v = 0; v < uq.size(); ++v) {
    CHECK(std::fabs(uq.values[v].get_d() - us.values[v]) < 1e-12);
    CHECK(std::fabs(ug.values[v] - us.values[v]) < 1e-12);
  }
}

TEST_CASE("discrete Gauss-Green residual shrinks like 3^-m") {
  auto s = std::make_shared<const Structure<double>>(preset("sg").build());
  auto u = PoissonFn<double>::constant_load(s, 1.0, Vec<double>(3, 0.0));
  double prev = 0;
  for (int m = 2; m <= 6; ++m) {
    double r = gauss_green_residual(*s, u.sample(m), harmonic_extend(*s, Vec<double>{2, 1, 0}, m));
    if (m > 2) CHECK(r / prev == doctest::Approx(1.0 / 3).epsilon(1e-6));
    prev = r;
  }
}

TEST_CASE("Green kernel is symmetric") {
  Structure<Rational> s = preset("sg").build_exact();
  auto verts = s.topology().vertex_set(2);
  for (VertexId x : verts)
    for (VertexId z : verts) CHECK(green_partial(s, x, z, 3) == green_partial(s, z, x, 3));
  // Zero on the boundary.
  CHECK(green_partial(s, VertexId{0}, verts.back(), 3) == 0);
}

TEST_CASE("discrete Laplacian of the exact constant-load solution") {
  Structure<double> s = preset("sg").build();
  auto sp = std::make_shared<const Structure<double>>(s);
  auto u = PoissonFn<double>::constant_load(sp, 1.0, Vec<double>(3, 0.0));
  double prev = 0;
  for (int m = 3; m <= 6; ++m) {
    GridFunction<double> lap = discrete_laplacian(s, u.sample(m));
    double err = 0;
    for (std::size_t v = 3; v < lap.size(); ++v) err = std::max(err, std::fabs(lap.values[v] + 1));
    prev = std::max(prev, err);
  }
  // Constant load: the discrete Laplacian of the exact solution is exactly -1.
  CHECK(prev < 1e-10);
}

TEST_CASE("splines vanish on V_0 and compose_inverse is supported on the cell") {
  Structure<Rational> s = preset("sg").build_exact();
  for (int j = 0; j < 3; ++j)
    for (int k = 1; k < 3; ++k) {
      GridFunction<Rational> a = a_spline_grid(s, j, k);
      for (int v = 0; v < 3; ++v) CHECK(a.values[v] == 0);
    }
  GridFunction<Rational> a = a_spline_grid(s, 0, 2);
  Word u = Word::parse("12");
  GridFunction<Rational> c = compose_inverse(s, a, u, 4);
  const Topology& topo = s.topology();
  for (VertexId v : topo.vertex_set(4)) {
    if (relative_address(topo, v, u)) continue;
    CHECK(c[v] == 0);
  }
  CHECK_THROWS_AS(compose_inverse(s, a, u, 2), LevelMismatch);
}

TEST_CASE("Dirichlet problem on a patch reproduces harmonic functions") {
  Structure<double> s = preset("sg").build();
  GridFunction<double> h = harmonic_extend(s, Vec<double>{0.3, -1, 2}, 6);
  const Topology& topo = s.topology();
  std::function<double(VertexId)> data = [&](VertexId v) { return h[v]; };
  std::vector<Word> cells{Word::parse("23"), Word::parse("32")};
  CellPatch<double> p = solve_dirichlet(s, cells, data);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto corners = topo.cell_corners(cells[c]);
    for (int a = 0; a < 3; ++a) CHECK(std::fabs(p.corner_values[c][a] - h[corners[a]]) < 1e-12);
  }
}

TEST_CASE("CSV round trip is exact") {
  Structure<Rational> s = preset("sg").build_exact();
  GridFunction<Rational> h = harmonic_extend(s, Vec<Rational>{0, 1, 1}, 3);
  std::stringstream ss;
  write_csv(ss, s.topology(), h);
  GridFunction<Rational> back = read_csv<Rational>(ss, s.topology());
  CHECK(back.level == 3);
  CHECK(back.values == h.values);
}

TEST_CASE("function mini-language") {
  auto s = std::make_shared<const Structure<double>>(preset("sg").build());
  auto f = parse_function<double>(s, "harmonic:0,1,1;poisson:const=2");
  CHECK(f.value(VertexId{1}) == doctest::Approx(1));
  CHECK_THROWS(parse_function<double>(s, "harmonic:0,1"));
  CHECK_THROWS(parse_function<double>(s, "sine:1"));
  CHECK_THROWS(parse_function<double>(s, ""));
}
