#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fractal/experiments.hpp"

using namespace fractal;

TEST_CASE("rate fit on constructed series") {
  Series geo, mgeo, flat;
  for (int m = 1; m <= 8; ++m) {
    geo.emplace_back(m, std::pow(3.0, -m));
    mgeo.emplace_back(m, m * std::pow(3.0, -m));
    flat.emplace_back(m, 2.0);
  }
  RateFit a = rate_fit(geo);
  CHECK(a.ok);
  CHECK(a.slope == doctest::Approx(std::log(1.0 / 3)).epsilon(1e-12));
  CHECK(rate_fit(mgeo).m_corrected_slope == doctest::Approx(std::log(1.0 / 3)).epsilon(1e-6));
  CHECK(std::fabs(rate_fit(flat).slope) < 1e-12);
  Series short_series(geo.begin(), geo.begin() + 3);
  CHECK_FALSE(rate_fit(short_series).ok);
  Series zeros = geo;
  zeros[2].second = 0;
  RateFit z = rate_fit(zeros);
  CHECK_FALSE(z.ok);
  CHECK_FALSE(z.diagnostic.empty());
}

TEST_CASE("rate selection compares r mu with |lambda_3|") {
  RatePrediction sg = predict_rate(preset("sg"), 0);
  CHECK(sg.kind == RateCase::m_mu);
  CHECK(sg.r_mu == doctest::Approx(0.2));
  CHECK(sg.slope == doctest::Approx(std::log(1.0 / 3)));
  RatePrediction hex = predict_rate(preset("hexagasket"), 0);
  CHECK(hex.kind == RateCase::lambda_ratio);
  CHECK(hex.r_mu == doctest::Approx(1.0 / 14));
  CHECK(hex.lambda3 == doctest::Approx(1.0 / 7));
  CHECK(hex.slope == doctest::Approx(std::log(1.0 / 3)));
  RatePrediction sg3 = predict_rate(preset("sg3"), 0);
  CHECK(sg3.kind == RateCase::mu);
  CHECK(sg3.r_mu == doctest::Approx(7.0 / 90));
  CHECK(sg3.slope == doctest::Approx(std::log(1.0 / 6)));
}

TEST_CASE("two-harmonic fit is exact on its own span") {
  const double r = 0.6, rho = 0.2;
  std::vector<double> data;
  for (int m = 0; m <= 8; ++m) data.push_back(2 * std::pow(r, m) - std::pow(rho, m) + 0.5 * std::pow(r * rho, m));
  auto [rms, mx] = two_harmonic_fit(data, r, rho);
  CHECK(rms < 1e-9);
  CHECK(mx < 1e-9);
  std::vector<double> outside;
  for (int m = 0; m <= 8; ++m) outside.push_back(std::pow(0.16, m));
  CHECK(two_harmonic_fit(outside, r, rho).first > 0.1);
}

TEST_CASE("Green values from cell moments match a direct solve") {
  auto s = std::make_shared<const Structure<double>>(preset("sg").build());
  const Topology& topo = s->topology();
  const Word w = Word::parse("12");
  const int level = 5;
  GridFunction<double> g = compose_inverse(*s, a_spline_grid(*s, 0, 2), w, level);
  Vec<double> moments;
  for (int a = 0; a < 3; ++a) {
    Vec<double> e(3, 0.0);
    e[a] = 1;
    GridFunction<double> ha = compose_inverse(*s, harmonic_extend(*s, e, 1), w, level);
    moments.push_back(integrate_product(*s, ha, g));
  }
  PoissonFn<double> u(s, Vec<double>(3, 0.0), g);
  for (VertexId x : topo.vertex_set(3)) {
    auto rel = relative_address(topo, x, w);
    if (rel && !rel->word.empty()) continue;  // interior of F_w K
    double got = green_from_moments(*s, {{w, moments}}, x);
    CHECK(std::fabs(got - u.value(x)) < 1e-12);
  }
}

TEST_CASE("closed-form series for the unbounded tangential example matches direct solves") {
  auto sq = std::make_shared<const Structure<Rational>>(preset("sg").build_exact());
  Structure<double> sd = preset("sg").build();
  GridFunction<Rational> a = a_spline_grid(*sq, 2, 2);
  for (int l = 0; l <= 2; ++l) {
    GridFunction<Rational> load{l + 1, Vec<Rational>(sq->topology().vertex_count(l + 1), Rational(0))};
    for (int n = 0; n <= l; ++n) {
      GridFunction<Rational> t = compose_inverse(*sq, a, Word::repeat(2, n), l + 1);
      for (std::size_t v = 0; v < load.size(); ++v) load.values[v] += t.values[v];
    }
    PoissonFn<Rational> g(sq, Vec<Rational>(3, Rational(0)), load, PoissonMethod::green);
    double direct = exact_derivative_value(g, Side{Word(), 2}, 2).get_d();
    CHECK(example42_series(sd, l) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("corner family excludes the corner and lives in F_j^m K") {
  FractalModel model = preset("sg");
  const Topology& topo = *model.topology;
  auto fam = corner_family(topo, 1, 2, 1);
  CHECK(fam.size() == 5);  // V_1 has 6 points, minus v_2
  for (VertexId v : fam) {
    CHECK(v != VertexId{1});
    CHECK(relative_address(topo, v, Word::parse("22")).has_value());
  }
}

TEST_CASE("scenario parameters are validated") {
  ScenarioConfig cfg;
  cfg.params["c"] = 1.0;
  CHECK_THROWS_AS(run_example51(cfg), std::invalid_argument);
  cfg.params["c"] = 1.1;
  cfg.params["eta"] = 0.9;
  CHECK_THROWS_AS(run_example51(cfg), std::invalid_argument);
  ScenarioConfig c36;
  c36.params["power"] = 1.5;
  CHECK_THROWS_AS(run_example36(c36), std::invalid_argument);
  c36.params["power"] = 0;
  CHECK_THROWS_AS(run_example36(c36), std::invalid_argument);
  CHECK_THROWS_AS(run_scenario("thm9.9", ScenarioConfig{}), std::invalid_argument);
}

TEST_CASE("reports are deterministic and well formed") {
  ScenarioConfig cfg;
  ScenarioReport a = run_scenario("thm1.6", cfg);
  ScenarioReport b = run_scenario("thm1.6", cfg);
  CHECK(a.to_json() == b.to_json());
  std::ostringstream ca, cb;
  a.write_csv(ca);
  b.write_csv(cb);
  CHECK(ca.str() == cb.str());
  CHECK(ca.str().rfind("series,m,value\n", 0) == 0);
  CHECK(a.to_svg().find("<svg") != std::string::npos);
  CHECK(a.to_json().find("\"checks\"") != std::string::npos);
}

TEST_CASE("every registered scenario id dispatches") {
  auto ids = scenario_ids();
  for (const char* id : {"thm1.4", "thm1.6", "gauss-green", "fig3.1", "ex3.6", "ex4.2", "ex5.1", "ex5.4", "vicsek",
                         "bilateral"})
    CHECK(std::find(ids.begin(), ids.end(), id) != ids.end());
}
