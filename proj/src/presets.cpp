#include "fractal/presets.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <sstream>

namespace fractal {

namespace {

using json = nlohmann::json;

FractalSpec make_spec(std::string name, int n, int n0, std::vector<std::array<int, 4>> glue1, std::vector<int> fixed1) {
  FractalSpec s;
  s.name = std::move(name);
  s.map_count = n;
  s.boundary_count = n0;
  for (const auto& g : glue1) s.glue.push_back({g[0] - 1, g[1] - 1, g[2] - 1, g[3] - 1});
  for (int f : fixed1) s.fixed_map.push_back(f - 1);
  return s;
}

StructureInputs<Rational> uniform_inputs(int n, int n0, const Rational& r) {
  StructureInputs<Rational> in;
  in.conductance = Mat<Rational>(n0, n0);
  for (int a = 0; a < n0; ++a)
    for (int b = 0; b < n0; ++b)
      if (a != b) in.conductance(a, b) = 1;
  in.r.assign(n, r);
  in.mu.assign(n, Rational(1, n));
  return in;
}

FractalModel model(FractalSpec spec, StructureInputs<Rational> in) {
  FractalModel m;
  m.name = spec.name;
  m.topology = std::make_shared<const Topology>(std::move(spec));
  m.structure = HarmonicStructure::from_rational(in);
  return m;
}

Rational number(const json& v) {
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<long>());
  if (v.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return parse_rational(os.str());
  }
  throw InvalidSpec("expected a number");
}

Vec<Rational> per_map(const json& v, int n, const char* field) {
  Vec<Rational> out;
  if (v.is_array()) {
    if (static_cast<int>(v.size()) != n) throw InvalidSpec(std::string(field) + " needs one entry per map");
    for (const auto& e : v) out.push_back(number(e));
  } else {
    out.assign(n, number(v));
  }
  return out;
}

}  // namespace

std::vector<std::string> preset_names() { return {"sg", "sg3", "hexagasket", "vicsek", "bilateral-sg"}; }

FractalModel preset(const std::string& name, double bilateral_c) {
  if (name == "sg") {
    auto spec = make_spec("sg", 3, 3, {{1, 2, 2, 1}, {1, 3, 3, 1}, {2, 3, 3, 2}}, {1, 2, 3});
    return model(spec, uniform_inputs(3, 3, Rational(3, 5)));
  }
  if (name == "hexagasket") {
    // Boundary: alternate hexagon corners, fixed by maps 1, 3, 5.
    auto spec = make_spec("hexagasket", 6, 3,
                          {{1, 2, 2, 3}, {2, 2, 3, 1}, {3, 3, 4, 1}, {4, 3, 5, 2}, {5, 1, 6, 1}, {6, 2, 1, 3}},
                          {1, 3, 5});
    return model(spec, uniform_inputs(6, 3, Rational(3, 7)));
  }
  if (name == "sg3") {
    // Cells in rows of a side-3 triangle: 1 | 2 3 | 4 5 6; the middle point is shared by cells 2, 3, 5.
    auto spec = make_spec("sg3", 6, 3,
                          {{1, 2, 2, 1},
                           {1, 3, 3, 1},
                           {2, 2, 4, 1},
                           {2, 3, 3, 2},
                           {2, 3, 5, 1},
                           {3, 2, 5, 1},
                           {3, 3, 6, 1},
                           {4, 3, 5, 2},
                           {5, 3, 6, 2}},
                          {1, 4, 6});
    return model(spec, uniform_inputs(6, 3, Rational(7, 15)));
  }
  if (name == "vicsek") {
    auto spec = make_spec("vicsek", 5, 4, {{1, 3, 5, 1}, {2, 4, 5, 2}, {3, 1, 5, 3}, {4, 2, 5, 4}}, {1, 2, 3, 4});
    return model(spec, uniform_inputs(5, 4, Rational(1, 3)));
  }
  if (name == "bilateral-sg" || name == "bilateral") {
    auto fam = bilateral_family(bilateral_c);
    auto spec = make_spec("bilateral-sg", 3, 3, {{1, 2, 2, 1}, {1, 3, 3, 1}, {2, 3, 3, 2}}, {1, 2, 3});
    FractalModel m;
    m.name = spec.name;
    m.topology = std::make_shared<const Topology>(std::move(spec));
    m.structure = fam.structure;
    return m;
  }
  throw UnknownPreset("unknown preset '" + name + "'");
}

FractalModel parse_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("spec file: ") + e.what());
  }
  FractalModel base;
  bool has_base = doc.contains("preset");
  if (has_base) base = preset(doc["preset"].get<std::string>(), doc.value("c", 1.0));

  FractalSpec spec = has_base ? base.topology->spec() : FractalSpec{};
  if (doc.contains("name")) spec.name = doc["name"].get<std::string>();
  if (spec.name.empty()) spec.name = "custom";
  if (doc.contains("maps")) spec.map_count = doc["maps"].get<int>();
  if (doc.contains("boundary")) spec.boundary_count = doc["boundary"].get<int>();
  if (doc.contains("glue")) {
    spec.glue.clear();
    for (const auto& g : doc["glue"]) {
      if (!g.is_array() || g.size() != 4) throw InvalidSpec("glue entries are [i,m,j,n]");
      spec.glue.push_back({g[0].get<int>() - 1, g[1].get<int>() - 1, g[2].get<int>() - 1, g[3].get<int>() - 1});
    }
  }
  if (doc.contains("fixed")) {
    spec.fixed_map.clear();
    for (const auto& f : doc["fixed"]) spec.fixed_map.push_back(f.get<int>() - 1);
  } else if (!has_base || doc.contains("maps") || doc.contains("boundary")) {
    spec.fixed_map.clear();
    for (int j = 0; j < spec.boundary_count; ++j) spec.fixed_map.push_back(j);
  }
  const int n = spec.map_count, n0 = spec.boundary_count;
  if (n <= 0 || n0 <= 0) throw InvalidSpec("spec needs positive maps and boundary counts");

  // Structure: start from the base when the shape is unchanged and it is exact.
  bool reuse = has_base && base.structure.exact && n == base.topology->N() && n0 == base.topology->N0();
  StructureInputs<Rational> in = reuse ? *base.structure.exact : uniform_inputs(n, n0, Rational(1, 2));
  if (doc.contains("conductances")) {
    in.conductance = Mat<Rational>(n0, n0);
    for (const auto& e : doc["conductances"]) {
      if (!e.is_array() || e.size() != 3) throw InvalidSpec("conductances entries are [a,b,value]");
      int a = e[0].get<int>() - 1, b = e[1].get<int>() - 1;
      if (a < 0 || b < 0 || a >= n0 || b >= n0 || a == b) throw InvalidSpec("conductance edge out of range");
      in.conductance(a, b) = in.conductance(b, a) = number(e[2]);
    }
  }
  if (doc.contains("r")) in.r = per_map(doc["r"], n, "r");
  else if (!reuse) throw InvalidSpec("spec needs renormalization factors 'r'");
  if (doc.contains("mu")) in.mu = per_map(doc["mu"], n, "mu");
  return model(spec, in);
}

FractalModel load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

FractalModel resolve_model(const std::string& name_or_path, double bilateral_c) {
  for (const auto& n : preset_names())
    if (n == name_or_path) return preset(n, bilateral_c);
  if (name_or_path == "bilateral") return preset("bilateral-sg", bilateral_c);
  std::ifstream probe(name_or_path);
  if (!probe) throw UnknownPreset("unknown preset or missing spec file '" + name_or_path + "'");
  return load_spec_file(name_or_path);
}

}  // namespace fractal
