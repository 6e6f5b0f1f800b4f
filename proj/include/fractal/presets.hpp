// Built-in fractals and the JSON spec-file reader.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fractal/structure.hpp"
#include "fractal/topology.hpp"

namespace fractal {

struct FractalModel {
  std::shared_ptr<const Topology> topology;
  HarmonicStructure structure;
  std::string name;

  Structure<double> build() const { return Structure<double>(topology, structure.values); }
  Structure<Rational> build_exact() const { return Structure<Rational>(topology, structure.as<Rational>()); }
};

struct UnknownPreset : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::vector<std::string> preset_names();

/// sg, sg3, hexagasket, vicsek, bilateral-sg (bilateral_c picks the member).
FractalModel preset(const std::string& name, double bilateral_c = 1.0);

/// Reads a spec document:
///   {"preset": "sg",                       optional base to override
///    "name": "...", "maps": N, "boundary": N0,
///    "glue": [[i,m,j,n], ...],             1-based
///    "fixed": [map of corner 1, ...],      default identity
///    "conductances": [[a,b,c], ...],       level-0 edges, default unit K_N0
///    "r": [..] or scalar, "mu": [..] or scalar (default uniform)}
/// Numbers may be JSON numbers or strings such as "3/5".
FractalModel parse_spec(const std::string& json_text);
FractalModel load_spec_file(const std::string& path);

/// Preset name, or path to a spec file.
FractalModel resolve_model(const std::string& name_or_path, double bilateral_c = 1.0);

}  // namespace fractal
