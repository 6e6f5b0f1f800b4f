// fractal-calc: command-line front end over the fractal library.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "fractal/derivatives.hpp"
#include "fractal/experiments.hpp"
#include "fractal/presets.hpp"

using json = nlohmann::ordered_json;
using namespace fractal;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string target;  // preset name or spec path; experiment id for `experiment`
  std::string mode = "float";
  int level = 3;
  int max_m = -1;
  std::string fn;
  std::string vertex;
  int k = 0;  // 1-based; 0 = all
  std::string out;
  bool plot = false;
  std::string preset = "sg";
  int corner = 1;
  std::vector<std::string> params;
  std::string load_csv;
  std::string boundary;
  bool level_set = false;
};

template <class T>
Structure<T> build_as(const FractalModel& m) {
  if constexpr (std::is_same_v<T, double>) {
    return m.build();
  } else {
    return m.build_exact();
  }
}

template <class T>
T scalar_from_text(const std::string& text) {
  Rational q = parse_rational(text);
  if constexpr (std::is_same_v<T, double>) {
    return q.get_d();
  } else {
    return q;
  }
}

json num(double v) { return v; }
json num(const Rational& q) { return to_string(q); }

template <class T>
json vec_json(const Vec<T>& v) {
  json a = json::array();
  for (std::size_t i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

template <class T>
json mat_json(const Mat<T>& m) {
  json a = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    a.push_back(row);
  }
  return a;
}

FractalModel load_model(const Options& o, double c = 1.0) {
  try {
    return resolve_model(o.target, c);
  } catch (const UnknownPreset& e) {
    throw UsageError(e.what());
  }
}

bool rational_mode(const Options& o, const FractalModel& m) {
  if (o.mode == "float") return false;
  if (o.mode != "rational") throw UsageError("--mode must be rational or float");
  if (!m.structure.exact) throw UsageError("structure has irrational inputs; use --mode float");
  return true;
}

void emit(const Options& o, const std::string& file, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::filesystem::create_directories(o.out);
  std::ofstream(std::filesystem::path(o.out) / file) << text;
}

// ---------------------------------------------------------------- commands

int cmd_info(const Options& o) {
  FractalModel m = load_model(o);
  const Topology& topo = *m.topology;
  json doc;
  doc["name"] = m.name;
  doc["maps"] = topo.N();
  doc["boundary"] = topo.N0();
  json fixed = json::array();
  for (int j = 0; j < topo.N0(); ++j) fixed.push_back(topo.fixed_map(j) + 1);
  doc["fixed"] = fixed;
  if (m.structure.exact) {
    doc["r"] = vec_json(m.structure.exact->r);
    doc["mu"] = vec_json(m.structure.exact->mu);
    doc["conductances"] = mat_json(m.structure.exact->conductance);
  } else {
    doc["r"] = vec_json(m.structure.values.r);
    doc["mu"] = vec_json(m.structure.values.mu);
    doc["conductances"] = mat_json(m.structure.values.conductance);
  }
  json counts = json::array();
  for (int l = 0; l <= 4; ++l) counts.push_back(topo.vertex_count(l));
  doc["vertex_counts"] = counts;
  doc["exact"] = m.structure.exact.has_value();
  emit(o, "info.json", doc.dump(2) + "\n");
  return 0;
}

int cmd_validate(const Options& o) {
  FractalModel m = load_model(o);
  ValidationReport rep = validate(m.topology, m.structure, m.name);
  json doc;
  doc["name"] = rep.name;
  doc["pass"] = rep.pass;
  if (!rep.failure.empty()) doc["failure"] = rep.failure;
  json checks = json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"residual", c.residual}, {"detail", c.detail}});
  doc["checks"] = checks;
  emit(o, "validate.json", doc.dump(2) + "\n");
  return rep.pass ? 0 : 1;
}

template <class T>
json eig_doc(const Structure<T>& s) {
  json doc;
  doc["beta_convention"] = kBetaConvention;
  json corners = json::array();
  for (int j = 0; j < s.N0(); ++j) {
    const auto& e = s.eigen(j);
    Prop23Status p = prop23_status(e, s.corner_matrix(j));
    corners.push_back({{"corner", j + 1},
                       {"M", mat_json(s.corner_matrix(j))},
                       {"lambda", vec_json(e.lambda)},
                       {"beta", mat_json(e.beta)},
                       {"alpha", mat_json(e.alpha)},
                       {"prop23", {p.cond_a, p.cond_b, p.cond_c}}});
  }
  doc["corners"] = corners;
  return doc;
}

int cmd_eig(const Options& o) {
  FractalModel m = load_model(o);
  json doc;
  try {
    doc = rational_mode(o, m) ? eig_doc(m.build_exact()) : eig_doc(m.build());
  } catch (const DegenerateStructure& e) {
    doc = {{"name", m.name}, {"degenerate", e.what()}};
    emit(o, "eig.json", doc.dump(2) + "\n");
    return 1;
  }
  doc["name"] = m.name;
  emit(o, "eig.json", doc.dump(2) + "\n");
  return 0;
}

template <class T>
std::string sample_csv(const FractalModel& m, const std::shared_ptr<const Structure<T>>& s, const Options& o) {
  PoissonFn<T> f = parse_function<T>(s, o.fn.empty() ? "harmonic:0,1,1" : o.fn);
  std::ostringstream os;
  write_csv(os, *m.topology, f.sample(o.level));
  return os.str();
}

int cmd_extend(const Options& o) {
  FractalModel m = load_model(o);
  std::string csv = rational_mode(o, m)
                        ? sample_csv(m, std::make_shared<const Structure<Rational>>(m.build_exact()), o)
                        : sample_csv(m, std::make_shared<const Structure<double>>(m.build()), o);
  emit(o, "extend.csv", csv);
  return 0;
}

template <class T>
std::string solve_csv(const FractalModel& m, const Options& o) {
  auto s = std::make_shared<const Structure<T>>(build_as<T>(m));
  const Topology& topo = *m.topology;
  Vec<T> boundary(s->N0(), T(0));
  if (!o.boundary.empty()) {
    std::stringstream ss(o.boundary);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
      if (i >= boundary.size()) throw UsageError("--boundary: too many values");
      boundary[i++] = scalar_from_text<T>(item);
    }
    if (i != boundary.size()) throw UsageError("--boundary: needs N0 values");
  }
  GridFunction<T> g;
  if (o.load_csv.empty()) {
    g = GridFunction<T>{o.level, Vec<T>(topo.vertex_count(o.level), T(1))};
  } else {
    std::ifstream in(o.load_csv);
    if (!in) throw UsageError("cannot read " + o.load_csv);
    g = read_csv<T>(in, topo);
  }
  PoissonFn<T> u(s, boundary, g);
  std::ostringstream os;
  write_csv(os, topo, u.sample(std::max(o.level, g.level)));
  return os.str();
}

template <class T>
json derivative_doc(const std::shared_ptr<const Structure<T>>& s, const Options& o) {
  if (o.vertex.empty()) throw UsageError("--vertex is required");
  const Topology& topo = s->topology();
  VertexId x = topo.parse_vertex(o.vertex);
  PoissonFn<T> f = parse_function<T>(s, o.fn.empty() ? "harmonic:0,1,1" : o.fn);
  const int n0 = s->N0();
  if (o.k < 0 || o.k == 1 || o.k > n0) throw UsageError("--k must lie in 2.." + std::to_string(n0));
  const int m_max = o.max_m < 0 ? 12 : o.max_m;
  CellOracle<T> oracle = [&f](const Word& w) { return f.cell_values(w); };
  json doc;
  doc["vertex"] = topo.describe(x);
  doc["value"] = num(f.value(x));
  doc["beta_convention"] = kBetaConvention;
  json entries = json::array();
  for (const Side& side : topo.sides(x))
    for (int k = 1; k < n0; ++k) {
      if (o.k && k != o.k - 1) continue;
      ExactDerivative ex = exact_derivative(f, side, k);
      DerivativeEstimate est = derivative_sequence(*s, oracle, side, k, m_max);
      json e;
      e["side"] = side.cell.str() + ":" + std::to_string(side.corner + 1);
      e["k"] = k + 1;
      if (ex.exists) {
        e["limit"] = ex.value;
        if constexpr (std::is_same_v<T, Rational>) e["exact"] = to_string(exact_derivative_value(f, side, k));
      } else {
        e["limit"] = nullptr;
        e["diverges"] = true;
      }
      json approx = json::array();
      for (const auto& [m, v] : est.approximants) approx.push_back({m, v});
      e["approximants"] = approx;
      e["extrapolated"] = est.fit.limit;
      e["converged"] = est.fit.converged;
      entries.push_back(e);
    }
  doc["derivatives"] = entries;
  return doc;
}

int cmd_derivative(const Options& o) {
  FractalModel m = load_model(o);
  json doc = rational_mode(o, m) ? derivative_doc(std::make_shared<const Structure<Rational>>(m.build_exact()), o)
                                 : derivative_doc(std::make_shared<const Structure<double>>(m.build()), o);
  emit(o, "derivative.json", doc.dump(2) + "\n");
  return 0;
}

int cmd_tangent(const Options& o) {
  FractalModel m = load_model(o);
  if (o.vertex.empty()) throw UsageError("--vertex is required");
  auto s = std::make_shared<const Structure<double>>(m.build());
  VertexId x = s->topology().parse_vertex(o.vertex);
  PoissonFn<double> f = parse_function<double>(s, o.fn.empty() ? "poisson:const=1" : o.fn);
  WeakTangent t = weak_tangent(f, x, o.max_m < 0 ? 10 : o.max_m);
  json doc;
  doc["vertex"] = s->topology().describe(x);
  doc["value"] = t.value;
  doc["differentiable"] = t.gradient.differentiable;
  doc["compatibility_residual"] = t.gradient.compatibility_residual;
  json grad = json::array();
  for (const auto& e : t.gradient.entries)
    grad.push_back({{"side", e.side.cell.str() + ":" + std::to_string(e.side.corner + 1)},
                    {"k", e.k + 1},
                    {"value", e.exact.exists ? json(e.exact.value) : json(nullptr)}});
  doc["gradient"] = grad;
  json cells = json::array();
  for (std::size_t c = 0; c < t.patch.cells.size(); ++c)
    cells.push_back({{"cell", t.patch.cells[c].str()}, {"corner_values", vec_json(t.patch.corner_values[c])}});
  doc["tangent"] = cells;
  doc["beta_convention"] = kBetaConvention;
  emit(o, "tangent.json", doc.dump(2) + "\n");
  return 0;
}

int cmd_experiment(const Options& o) {
  ScenarioConfig cfg;
  cfg.preset = o.preset;
  cfg.corner = o.corner - 1;
  cfg.m_max = o.max_m;
  cfg.level = o.level_set ? o.level : 0;
  for (const auto& p : o.params) {
    auto eq = p.find('=');
    if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + p + "'");
    try {
      cfg.params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--param value is not a number: '" + p + "'");
    }
  }
  const auto ids = scenario_ids();
  if (std::find(ids.begin(), ids.end(), o.target) == ids.end()) throw UsageError("unknown experiment '" + o.target + "'");
  ScenarioReport rep;
  try {
    rep = run_scenario(o.target, cfg);
  } catch (const UnknownPreset& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const auto& c : rep.checks) std::cout << (c.pass ? "PASS  " : "FAIL  ") << c.name << "\n";
  if (o.out.empty()) {
    std::cout << rep.to_json() << "\n";
  } else {
    std::filesystem::create_directories(o.out);
    const auto dir = std::filesystem::path(o.out);
    std::ofstream(dir / (rep.id + ".json")) << rep.to_json() << "\n";
    std::ofstream csv(dir / (rep.id + ".csv"));
    rep.write_csv(csv);
    if (o.plot) std::ofstream(dir / (rep.id + ".svg")) << rep.to_svg();
  }
  return rep.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calculus on p.c.f. self-similar fractals"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub, bool needs_fn) {
    sub->add_option("preset", o.target, "preset name or spec file")->required();
    sub->add_option("--mode", o.mode, "rational | float")->check(CLI::IsMember({"rational", "float"}));
    sub->add_option("-m,--level", o.level, "vertex level");
    if (needs_fn) sub->add_option("--fn", o.fn, "function: harmonic:a,b,c | hjk:j,k | poisson:const=c, joined by ';'");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* info = app.add_subcommand("info", "topology and structure summary");
  common(info, false);
  auto* val = app.add_subcommand("validate", "check the structural invariants");
  common(val, false);
  auto* eig = app.add_subcommand("eig", "eigen-data of the corner matrices");
  common(eig, false);
  auto* ext = app.add_subcommand("extend", "sample a function on V_m as CSV");
  common(ext, true);
  auto* sol = app.add_subcommand("solve", "solve -Δu = g on V_m (g = 1 unless --load)");
  common(sol, false);
  sol->add_option("--load", o.load_csv, "CSV of g values (word,corner,level,value)");
  sol->add_option("--boundary", o.boundary, "V_0 values, comma separated");
  auto* der = app.add_subcommand("derivative", "derivatives d_jk f at a vertex");
  common(der, true);
  der->add_option("--vertex", o.vertex, "vertex address w:j (1-based), e.g. 112:2 or :1")->required();
  der->add_option("--k", o.k, "derivative index (2 = normal derivative)");
  der->add_option("--max-m", o.max_m, "approximant depth");
  auto* tan = app.add_subcommand("tangent", "weak tangent at a vertex");
  common(tan, true);
  tan->add_option("--vertex", o.vertex, "vertex address w:j")->required();
  tan->add_option("--max-m", o.max_m, "approximant depth");
  auto* exp = app.add_subcommand("experiment", "run a named scenario");
  exp->add_option("id", o.target, "scenario id")->required();
  exp->add_option("--preset", o.preset, "preset for scenarios that take one");
  exp->add_option("--corner", o.corner, "corner j (1-based)");
  exp->add_option("--max-m", o.max_m, "largest m");
  auto* lvl = exp->add_option("-m,--level", o.level, "discretization level");
  exp->add_option("--param", o.params, "scenario parameter key=value")->take_all();
  exp->add_option("--out", o.out, "write <id>.json and <id>.csv here");
  exp->add_flag("--plot", o.plot, "also write <id>.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  o.level_set = lvl->count() > 0;

  try {
    if (*info) return cmd_info(o);
    if (*val) return cmd_validate(o);
    if (*eig) return cmd_eig(o);
    if (*ext) return cmd_extend(o);
    if (*sol) {
      FractalModel m = load_model(o);
      emit(o, "solve.csv", rational_mode(o, m) ? solve_csv<Rational>(m, o) : solve_csv<double>(m, o));
      return 0;
    }
    if (*der) return cmd_derivative(o);
    if (*tan) return cmd_tangent(o);
    if (*exp) return cmd_experiment(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
