#include <doctest.h>

#include <random>
#include <set>

#include "fractal/presets.hpp"
#include "oracles.hpp"

using namespace fractal;

TEST_CASE("rational parsing and printing") {
  CHECK(parse_rational("3/5") == Rational(3, 5));
  CHECK(parse_rational("-2") == Rational(-2));
  CHECK(to_string(Rational(12, 25)) == "12/25");
  CHECK(rationalize(0.6) == Rational(3, 5));
  CHECK_THROWS(parse_rational("x/2"));
}

TEST_CASE("dense solve and inverse agree with Eigen") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4;
    Mat<double> a(n, n);
    Eigen::MatrixXd e(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e(i, j) = a(i, j) = u(rng) + (i == j ? n : 0);
    Vec<double> b(n);
    Eigen::VectorXd eb(n);
    for (int i = 0; i < n; ++i) eb(i) = b[i] = u(rng);
    Vec<double> x = solve(a, b);
    Eigen::VectorXd ex = e.partialPivLu().solve(eb);
    for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(ex(i)).epsilon(1e-12));
    Mat<double> inv = inverse(a) * a;
    CHECK((inv - Mat<double>::identity(n)).max_abs() < 1e-12);
  }
}

TEST_CASE("exact solve is exact") {
  Mat<Rational> a{{Rational(2), Rational(1)}, {Rational(1), Rational(3)}};
  Vec<Rational> x = solve(a, Vec<Rational>{Rational(1), Rational(0)});
  CHECK(x[0] == Rational(3, 5));
  CHECK(x[1] == Rational(-1, 5));
}

TEST_CASE("null space dimension") {
  Mat<double> a{{1, 2, 3}, {2, 4, 6}};
  CHECK(null_space(a, 1e-12).size() == 2);
  CHECK(null_space(Mat<double>::identity(3), 1e-12).empty());
}

TEST_CASE("real eigenvalues match Eigen on the preset corner matrices") {
  for (const char* name : {"sg", "sg3", "hexagasket"}) {
    Structure<double> s = preset(name).build();
    for (int j = 0; j < s.N0(); ++j) {
      auto mine = real_eigenvalues(s.corner_matrix(j));
      auto ref = oracle::eigenvalues(s.corner_matrix(j));
      REQUIRE(mine.size() == ref.size());
      for (std::size_t k = 0; k < ref.size(); ++k) CHECK(mine[k] == doctest::Approx(ref[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("words print 1-based and parse back") {
  Word w = Word::parse("1123");
  CHECK(w.size() == 4);
  CHECK(w[0] == 0);
  CHECK(w[3] == 2);
  CHECK(w.str() == "1123");
  CHECK(Word().str() == "∅");
  CHECK((w.prefix(2) + w.suffix_from(2)) == w);
  CHECK(w.starts_with(Word::parse("11")));
  CHECK_FALSE(w.starts_with(Word::parse("12")));
}

TEST_CASE("gasket vertex counts") {
  FractalModel m = preset("sg");
  for (int level = 0; level <= 6; ++level) {
    std::uint64_t p = 1;
    for (int i = 0; i <= level; ++i) p *= 3;
    CHECK(m.topology->vertex_count(level) == (p + 3) / 2);
    CHECK(m.topology->cell_count(level) == p / 3);
  }
}

TEST_CASE("canonical ids are independent of the naming cell") {
  FractalModel model = preset("sg");
  const Topology& topo = *model.topology;
  // F_1 v_2 = F_2 v_1, F_12 v_3 = F_13 v_2.
  CHECK(topo.canonicalize(Word::parse("1"), 1) == topo.canonicalize(Word::parse("2"), 0));
  CHECK(topo.canonicalize(Word::parse("12"), 2) == topo.canonicalize(Word::parse("13"), 1));
  // Fixed points collapse to the boundary.
  CHECK(topo.canonicalize(Word::parse("111"), 0) == VertexId{0});
  CHECK(topo.parse_vertex(":1") == VertexId{0});
  CHECK(topo.parse_vertex("112:2") == topo.canonicalize(Word::parse("112"), 1));
  CHECK_THROWS(topo.parse_vertex("4:1"));
}

TEST_CASE("address round trip over every vertex (property)") {
  for (const char* name : {"sg", "sg3", "hexagasket", "vicsek"}) {
    FractalModel model = preset(name);
    const Topology& topo = *model.topology;
    const int level = 3;
    auto verts = topo.vertex_set(level);
    CHECK(verts.size() == topo.vertex_count(level));
    std::set<std::uint64_t> seen;
    for (VertexId v : verts) {
      Address a = topo.address(v);
      CHECK(topo.canonicalize(a.word, a.corner) == v);
      CHECK(topo.level_of(v) == (v.index < static_cast<std::uint64_t>(topo.N0()) ? 0 : static_cast<int>(a.word.size())));
      seen.insert(v.index);
    }
    CHECK(seen.size() == verts.size());
  }
}

TEST_CASE("cell corners agree with the cell table") {
  FractalModel model = preset("sg3");
  const Topology& topo = *model.topology;
  const auto& cells = topo.cells(2);
  for (std::size_t c = 0; c < cells.cell_count(); ++c) {
    Word w = topo.cell_word(c, 2);
    CHECK(topo.cell_index(w) == c);
    auto corners = topo.cell_corners(w);
    for (int a = 0; a < topo.N0(); ++a) CHECK(corners[a].index == cells.cell(c)[a]);
  }
}

TEST_CASE("junction point F_2 v_3 has two sides") {
  FractalModel model = preset("sg");
  const Topology& topo = *model.topology;
  VertexId x = topo.canonicalize(Word::parse("2"), 2);
  VertexClass cls = topo.classify(x);
  CHECK(cls.junction);
  auto sides = topo.sides(x);
  REQUIRE(sides.size() == 2);
  CHECK(sides[0] == Side{Word::parse("2"), 2});
  CHECK(sides[1] == Side{Word::parse("3"), 1});
  CHECK(cls.junction_set() == std::vector<int>{1, 2});
  // U_1(x) = F_23 K ∪ F_32 K.
  auto nb = topo.neighborhood(x, 1);
  CHECK(nb == std::vector<Word>{Word::parse("23"), Word::parse("32")});
}

TEST_CASE("boundary vertices have one side") {
  FractalModel model = preset("hexagasket");
  const Topology& topo = *model.topology;
  for (int j = 0; j < topo.N0(); ++j) {
    auto sides = topo.sides(VertexId{static_cast<std::uint64_t>(j)});
    REQUIRE(sides.size() == 1);
    CHECK(sides[0].cell.empty());
    CHECK(sides[0].corner == j);
  }
}

TEST_CASE("unknown preset is reported") {
  CHECK_THROWS_AS(preset("koch"), UnknownPreset);
  CHECK(preset_names().size() >= 5);
}

TEST_CASE("spec documents reproduce the gasket") {
  FractalModel m = parse_spec(R"({"name": "g", "maps": 3, "boundary": 3,
      "glue": [[1,2,2,1],[1,3,3,1],[2,3,3,2]], "r": "3/5", "mu": "1/3"})");
  Structure<Rational> a = m.build_exact();
  Structure<Rational> b = preset("sg").build_exact();
  for (int j = 0; j < 3; ++j)
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) CHECK(a.corner_matrix(j)(p, q) == b.corner_matrix(j)(p, q));
  CHECK_THROWS(parse_spec(R"({"maps": 3})"));
}
