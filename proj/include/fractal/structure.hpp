// Harmonic structures: conductances, renormalization factors and measure
// weights, plus everything derived from them (harmonic extension, the
// transformation matrices M_j and their eigen-data, harmonic integrals, the
// level-1 Green's kernel and the a_ik splines).
#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fractal/linalg.hpp"
#include "fractal/topology.hpp"

namespace fractal {

struct StructureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateStructure : StructureError {
  using StructureError::StructureError;
};
struct ComplexSpectrum : StructureError {
  using StructureError::StructureError;
};
struct EquivalenceViolation : StructureError {
  using StructureError::StructureError;
};
struct NoPositiveRoot : StructureError {
  using StructureError::StructureError;
};
struct ProportionalityFailure : StructureError {
  using StructureError::StructureError;
};
struct NonUniqueFixedVector : StructureError {
  using StructureError::StructureError;
};

/// Raw inputs of a self-similar harmonic structure over scalar T.
template <class T>
struct StructureInputs {
  Mat<T> conductance;  // symmetric N0 x N0, zero diagonal
  Vec<T> r;            // N renormalization factors
  Vec<T> mu;           // N measure weights
};

/// User-facing structure description; the exact copy is present when every
/// input is a rational number.
struct HarmonicStructure {
  StructureInputs<double> values;
  std::optional<StructureInputs<Rational>> exact;

  static HarmonicStructure from_rational(const StructureInputs<Rational>& q);

  template <class T>
  StructureInputs<T> as() const {
    if constexpr (std::is_same_v<T, double>) {
      return values;
    } else {
      if (!exact) throw std::invalid_argument("structure has no exact rational form");
      return *exact;
    }
  }
};

template <class T>
struct ExtensionData {
  Mat<T> extension;            // template_size x N0: V_0 values -> V_1 values
  std::vector<Mat<T>> maps;    // N matrices: h|_{V_0} -> h|_{F_i V_0}
  std::vector<Mat<T>> corner;  // N0 matrices M_j = maps[fixed_map[j]]
  Mat<T> level1_laplacian;     // template_size x template_size, renormalized
  double renormalization_residual = 0;  // max |Schur(E_1) - E_0| entry
};

template <class T>
struct EigenSystem {
  int corner = 0;
  Vec<T> lambda;  // decreasing |lambda|
  Mat<T> beta;    // row k: left eigenvector beta_{j,k}
  Mat<T> alpha;   // row k: right eigenvector alpha_{j,k}
  double biorthogonality_residual = 0;
  double eigen_residual = 0;

  Vec<T> beta_row(int k) const { return beta.row(k); }
  Vec<T> alpha_row(int k) const { return alpha.row(k); }
};

struct Prop23Status {
  bool cond_a = false, cond_b = false, cond_c = false;
  double residual_a = 0, residual_b = 0, residual_c = 0;
};

/// All derived data of a harmonic structure. Immutable after construction.
template <class T>
class Structure {
 public:
  Structure(std::shared_ptr<const Topology> topology, StructureInputs<T> inputs);

  const Topology& topology() const { return *topology_; }
  std::shared_ptr<const Topology> topology_ptr() const { return topology_; }
  const StructureInputs<T>& inputs() const { return inputs_; }
  int N() const { return topology_->N(); }
  int N0() const { return topology_->N0(); }
  const T& r(int map) const { return inputs_.r[map]; }
  const T& mu(int map) const { return inputs_.mu[map]; }
  const T& conductance(int a, int b) const { return inputs_.conductance(a, b); }

  const ExtensionData<T>& extension() const { return ext_; }
  /// Harmonic boundary values transformation of the cell map fixing corner j.
  const Mat<T>& corner_matrix(int j) const { return ext_.corner[j]; }

  bool nondegenerate() const { return eigen_error_.empty(); }
  const std::string& degeneracy_reason() const { return eigen_error_; }
  /// Throws DegenerateStructure when the spectrum violates the hypotheses.
  const EigenSystem<T>& eigen(int corner) const;
  void require_nondegenerate() const;

  /// gamma_j = integral of the harmonic H_j.
  const Vec<T>& gamma() const { return gamma_; }
  /// Q_il = integral of H_i H_l.
  const Mat<T>& harmonic_mass() const { return mass_; }
  /// Inverse of the interior block of the level-1 form (template interior points).
  const Mat<T>& green_kernel() const { return psi_; }
  /// a_ik values at every template point (zero on V_0), k >= 1 (0-based index).
  Vec<T> a_spline(int corner, int k) const;

  /// Energy coefficient-weighted degree: sum_i c_ij.
  T degree(int corner) const;

 private:
  void build_extension();
  void build_measure();
  void build_eigen();

  std::shared_ptr<const Topology> topology_;
  StructureInputs<T> inputs_;
  ExtensionData<T> ext_;
  std::vector<EigenSystem<T>> eig_;
  std::string eigen_error_;
  Vec<T> gamma_;
  Mat<T> mass_;
  Mat<T> psi_;
};

/// Eigen-data of a single transformation matrix (left eigenvectors normalized
/// against the right ones, beta_j2 from the conductance formula).
template <class T>
EigenSystem<T> spectral_data(const Mat<T>& m, int corner, const Mat<T>& conductance);

/// Eigenvalues of a small real matrix, sorted by decreasing |lambda|.
/// Throws ComplexSpectrum when a non-real eigenvalue appears.
std::vector<double> real_eigenvalues(const Mat<double>& m);

template <class T>
Prop23Status prop23_status(const EigenSystem<T>& eig, const Mat<T>& m, double tol = 1e-10);

/// Left fixed vector of sum_i mu_i A_i normalized to total mass 1.
template <class T>
Vec<T> measure_gamma(const ExtensionData<T>& ext, const Vec<T>& mu);

struct BilateralFamily {
  double c = 1, s = 1, eta = 0;
  HarmonicStructure structure;
  double proportionality_residual = 0;
};

/// One-parameter family of SG structures with a single bilateral symmetry.
BilateralFamily bilateral_family(double c);

struct ValidationCheck {
  std::string name;
  bool pass = false;
  double residual = 0;
  std::string detail;
};

struct ValidationReport {
  std::string name;
  bool pass = true;
  std::string failure;  // e.g. "DegenerateStructure: ..."
  std::vector<ValidationCheck> checks;
};

/// Aggregates the structural invariants into a pass/fail report.
template <class T>
ValidationReport validate(const Structure<T>& s, const std::string& name);

/// Builds and validates in one go; degenerate structures produce a failed
/// report instead of an exception.
ValidationReport validate(std::shared_ptr<const Topology> topology, const HarmonicStructure& h, const std::string& name);

}  // namespace fractal
