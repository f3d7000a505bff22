#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qtomo/linalg.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

/// One projective component of an intensity operator:
/// weight * row^dagger row, where `row` is a bra of length s.
struct RowComponent {
  double weight = 1.0;
  CVector row;
};

struct ProtocolRow {
  std::vector<RowComponent> components;  // a pure row has exactly one
  double exposure = 1.0;

  static ProtocolRow pure(const CVector& row, double exposure = 1.0);
  bool is_pure() const noexcept { return components.size() == 1; }
  /// Lambda_j = sum_k f_k X^(k)dagger X^(k).
  CMatrix intensity_operator() const;
};

/// m measurement rows acting on an s-dimensional space.
class Protocol {
 public:
  Protocol(int dim, std::vector<ProtocolRow> rows, std::string label = {});

  int dim() const noexcept { return dim_; }
  int size() const noexcept { return static_cast<int>(rows_.size()); }
  const std::vector<ProtocolRow>& rows() const noexcept { return rows_; }
  const ProtocolRow& row(int j) const { return rows_.at(static_cast<std::size_t>(j)); }
  const std::string& label() const noexcept { return label_; }

  RVector exposures() const;
  Protocol with_exposures(const RVector& t) const;
  Protocol scaled(double factor) const;

  /// Sum_j t_j Lambda_j.
  CMatrix total_intensity_operator() const;

  bool all_pure() const noexcept;

 private:
  int dim_;
  std::vector<ProtocolRow> rows_;
  std::string label_;
};

enum class Solid {
  tetrahedron,
  cube,
  octahedron,
  dodecahedron,
  icosahedron,
  fullerene,
  pentakis_dodecahedron,
};

Solid solid_from_name(const std::string& name);
std::string solid_name(Solid s);
int face_count(Solid s);

/// Unit face-center directions of the solid in its canonical orientation.
std::vector<Eigen::Vector3d> face_directions(Solid s);

/// (cos(theta/2), e^{i phi} sin(theta/2)) for the spherical angles of n.
CVector bloch_ket(const Eigen::Vector3d& n);

/// Single-qubit rows <psi(n)| for each direction, then the l-fold tensor
/// power. Exposures are equal, which closes the unity decomposition for every
/// built-in solid.
Protocol polyhedron_protocol(Solid solid, int qubits);
Protocol direction_protocol(const std::vector<Eigen::Vector3d>& dirs, int qubits,
                            std::string label = {});

/// Row-wise tensor product: rows (a, b) -> a (x) b, exposures multiplied.
Protocol tensor_product(const Protocol& a, const Protocol& b);
Protocol tensor_power(const Protocol& p, int power);

struct WaveplateSpec {
  double delta = 0.0;  // optical thickness, rad
  double angle = 0.0;  // orientation, rad

  /// delta = pi h dn / lambda; all lengths in the same unit.
  static WaveplateSpec from_thickness(double thickness, double birefringence,
                                      double wavelength, double angle);
  /// delta mod pi, in [0, pi).
  double reduced_delta() const;
};

/// [[t, r], [-r*, t*]], t = cos d + i sin d cos 2a, r = i sin d sin 2a.
CMatrix waveplate_unitary(double delta, double angle);

/// Product G_k ... G_1 for plates listed in the order light meets them.
CMatrix plate_stack_unitary(const std::vector<WaveplateSpec>& plates);

/// One row per plate configuration: <analyzer| G_stack.
Protocol plate_series_protocol(const std::vector<std::vector<WaveplateSpec>>& configs,
                               const CVector& analyzer, std::string label = {});

CVector analyzer_vector(const std::string& name);  // "H" or "V"

/// Single plate at `count` orientations offset + k * step; B9 is (9, 20 deg),
/// B36 is (36, 10 deg).
Protocol single_plate_protocol(double delta, int count, double step, double offset,
                               const CVector& analyzer, std::string label = {});
Protocol b9_protocol(double delta);
Protocol b36_protocol(double delta);

struct ArmSpec {
  std::vector<WaveplateSpec> plates;  // base orientations of each plate
  std::vector<double> rotations;      // each setting rotates all plates together
  CVector analyzer;
};

/// Tensor product of per-arm rows; with `synchronized` both arms share a
/// setting index and only min(#settings) rows are produced.
Protocol two_arm_plate_protocol(const ArmSpec& arm1, const ArmSpec& arm2,
                                bool synchronized = false, std::string label = {});

/// Default B144: each arm carries plates (delta1, 0) and (delta2, pi/4),
/// rotated through 12 settings 30 deg apart, analyzer V.
Protocol b144_protocol(double delta1, double delta2, bool synchronized = false);

/// J4, R4, J16, R16, kosut8.
Protocol named_protocol(const std::string& name);

struct UnityCheck {
  bool holds = false;
  std::optional<double> intensity;  // I0 when holds
  double deviation = 0.0;           // max-norm of sum t Lambda - I0 E
};

/// lambda_j = tr(Lambda_j rho).
RVector intensities(const Protocol& p, const DensityMatrix& rho);
/// Same, for an (unnormalized) amplitude matrix L with rho = L L^dagger.
RVector intensities(const Protocol& p, const CMatrix& amplitudes);

UnityCheck unity_check(const Protocol& p, double tol = 1e-8);

/// Rescales all exposures by one factor so sum_j lambda_j t_j = n.
Protocol normalize_exposures(const Protocol& p, const DensityMatrix& rho, double n);

}  // namespace qtomo
