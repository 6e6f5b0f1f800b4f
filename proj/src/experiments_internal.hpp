// Helpers shared by the scenario runners.
#pragma once

#include <memory>
#include <string>

#include "fractal/experiments.hpp"

namespace fractal::detail {

std::shared_ptr<const Structure<double>> build_double(const FractalModel& m);
std::string fmt(double x);
Check within(std::string name, double value, double expected, double tol, std::string detail);
Check flag(std::string name, bool ok, std::string detail, double value);
Side side_with_corner(const Topology& topo, VertexId x, int corner);
PoissonFn<double> zero_flux_unit_laplacian(std::shared_ptr<const Structure<double>> s, int corner);

}  // namespace fractal::detail
