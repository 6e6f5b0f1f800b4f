// Scenario runners: decay-rate experiments for the continuity theorems, the
// counter-examples, and the exact identities on the standard gasket. Every
// runner returns a ScenarioReport holding named checks and (m, value) series.
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fractal/derivatives.hpp"
#include "fractal/presets.hpp"

namespace fractal {

using Series = std::vector<std::pair<double, double>>;

struct RateFit {
  double slope = 0;              // d log(value) / dm
  double intercept = 0;
  double m_corrected_slope = 0;  // same fit on log(value) - log(m)
  double residual = 0;           // rms of the plain fit in log space
  int points = 0;
  bool ok = false;
  std::string diagnostic;
};

/// Least-squares log-slope. Needs at least 5 points with positive values;
/// otherwise ok = false and the diagnostic says why.
RateFit rate_fit(const Series& series);

enum class RateCase { mu, m_mu, lambda_ratio };

struct RatePrediction {
  RateCase kind = RateCase::mu;
  std::string label;   // "mu^m", "m mu^m" or "(lambda3/r)^m"
  double slope = 0;    // predicted log-slope
  double r_mu = 0;     // r_j mu_j
  double lambda3 = 0;  // |lambda_j3|
};

/// Compares r_j mu_j with |lambda_j3| (exactly when the structure is rational).
RatePrediction predict_rate(const FractalModel& model, int corner);

struct Check {
  std::string name;
  bool pass = false;
  double value = 0;
  double expected = 0;
  double tolerance = 0;
  std::string detail;
};

struct ScenarioConfig {
  std::string preset = "sg";
  int corner = 0;     // 0-based
  int m_max = -1;     // -1 = scenario default
  int level = 0;      // discretization level, 0 = scenario default
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const;
};

struct ScenarioReport {
  std::string id;
  std::string preset;
  std::vector<Check> checks;
  std::map<std::string, Series> series;
  std::optional<RateFit> fit;
  std::optional<RatePrediction> prediction;
  std::vector<std::pair<std::string, std::string>> notes;

  bool pass() const;
  Check& add(Check c);
  void note(std::string key, std::string value) { notes.emplace_back(std::move(key), std::move(value)); }

  std::string to_json() const;
  void write_csv(std::ostream& os) const;  // columns: series,m,value
  std::string to_svg() const;              // log10 |value| against m
};

std::vector<std::string> scenario_ids();
/// Dispatch by id (see scenario_ids). Throws std::invalid_argument on unknown ids.
ScenarioReport run_scenario(const std::string& id, const ScenarioConfig& cfg);

// Individual runners.
ScenarioReport run_fig31();
ScenarioReport run_thm14(const ScenarioConfig& cfg);
ScenarioReport run_gauss_green_mu(const ScenarioConfig& cfg);
ScenarioReport run_thm16(const ScenarioConfig& cfg);
ScenarioReport run_example36(const ScenarioConfig& cfg);
ScenarioReport run_example42(const ScenarioConfig& cfg);
ScenarioReport run_example51(const ScenarioConfig& cfg);
ScenarioReport run_example54(const ScenarioConfig& cfg);
ScenarioReport run_vicsek();
ScenarioReport run_bilateral();
ScenarioReport run_laplacian_series(const ScenarioConfig& cfg);
ScenarioReport run_spline_sum(const ScenarioConfig& cfg);
ScenarioReport run_boundedness(const ScenarioConfig& cfg);

// Pieces exposed for testing.

/// Vertices F_j^m y for y in V_depth, excluding v_j itself.
std::vector<VertexId> corner_family(const Topology& topo, int corner, int m, int depth);

/// Values at vertex x of u with -Δu = f, f given by moments on cells:
/// each load is (w, I) with I_a = ∫_{F_w K} H_a∘F_w^{-1} f dμ and f supported in F_w K.
/// x must not lie in the interior of any F_w K.
double green_from_moments(const Structure<double>& s, const std::vector<std::pair<Word, Vec<double>>>& loads,
                          VertexId x);

/// d_33 g_L(v_3) for -Δg_L = Σ_{n<=L} a_33∘F_3^{-n} on the standard gasket,
/// summed in closed form from the self-similar moments.
double example42_series(const Structure<double>& s, long L);

/// Weighted least squares of data against a r^m + b ρ^m + c (rρ)^m with
/// per-point relative weights; returns (rms, max) relative residual.
std::pair<double, double> two_harmonic_fit(const std::vector<double>& data, double r, double rho);

}  // namespace fractal
