#include "qtomo/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "qtomo/error.hpp"

namespace qtomo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

CMatrix outer_row(const CVector& row) {
  return row.conjugate() * row.transpose();
}

}  // namespace

ProtocolRow ProtocolRow::pure(const CVector& row, double exposure) {
  ProtocolRow r;
  r.components.push_back({1.0, row});
  r.exposure = exposure;
  return r;
}

CMatrix ProtocolRow::intensity_operator() const {
  const auto s = components.front().row.size();
  CMatrix lam = CMatrix::Zero(s, s);
  for (const auto& c : components) lam += c.weight * outer_row(c.row);
  return lam;
}

Protocol::Protocol(int dim, std::vector<ProtocolRow> rows, std::string label)
    : dim_(dim), rows_(std::move(rows)), label_(std::move(label)) {
  if (dim_ < 1) throw InvalidArgument("protocol dimension must be positive");
  if (rows_.empty()) throw InvalidArgument("protocol needs at least one row");
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    const auto& r = rows_[j];
    if (!(r.exposure > 0.0) || !std::isfinite(r.exposure))
      throw InvalidArgument("row " + std::to_string(j) + ": exposure must be positive");
    if (r.components.empty())
      throw InvalidArgument("row " + std::to_string(j) + ": no components");
    for (const auto& c : r.components) {
      if (c.row.size() != dim_)
        throw DimensionMismatch("row " + std::to_string(j) + ": length differs from dim");
      if (!(c.weight > 0.0))
        throw InvalidArgument("row " + std::to_string(j) + ": mixture weights must be positive");
    }
  }
}

RVector Protocol::exposures() const {
  RVector t(size());
  for (int j = 0; j < size(); ++j) t(j) = rows_[static_cast<std::size_t>(j)].exposure;
  return t;
}

Protocol Protocol::with_exposures(const RVector& t) const {
  if (t.size() != size()) throw DimensionMismatch("exposure vector length differs from rows");
  auto rows = rows_;
  for (int j = 0; j < size(); ++j) rows[static_cast<std::size_t>(j)].exposure = t(j);
  return Protocol(dim_, std::move(rows), label_);
}

Protocol Protocol::scaled(double factor) const {
  if (!(factor > 0.0)) throw InvalidArgument("exposure scale must be positive");
  return with_exposures(exposures() * factor);
}

CMatrix Protocol::total_intensity_operator() const {
  CMatrix s = CMatrix::Zero(dim_, dim_);
  for (const auto& r : rows_) s += r.exposure * r.intensity_operator();
  return s;
}

bool Protocol::all_pure() const noexcept {
  return std::all_of(rows_.begin(), rows_.end(), [](const auto& r) { return r.is_pure(); });
}

// --- polyhedra ---------------------------------------------------------------

namespace {

struct SolidInfo {
  Solid solid;
  const char* name;
  int faces;
};

constexpr SolidInfo kSolids[] = {
    {Solid::tetrahedron, "tetrahedron", 4},
    {Solid::cube, "cube", 6},
    {Solid::octahedron, "octahedron", 8},
    {Solid::dodecahedron, "dodecahedron", 12},
    {Solid::icosahedron, "icosahedron", 20},
    {Solid::fullerene, "fullerene", 32},
    {Solid::pentakis_dodecahedron, "pentakis_dodecahedron", 60},
};

using Dirs = std::vector<Eigen::Vector3d>;

void push_cyclic(Dirs& out, double x, double y, double z) {
  out.emplace_back(x, y, z);
  out.emplace_back(z, x, y);
  out.emplace_back(y, z, x);
}

// (0, +-a, +-b) and cyclic permutations; zero signs are not duplicated.
void push_signed_cyclic(Dirs& out, double x, double y, double z) {
  for (double sx : {1.0, -1.0}) {
    if (x == 0.0 && sx < 0) continue;
    for (double sy : {1.0, -1.0}) {
      if (y == 0.0 && sy < 0) continue;
      for (double sz : {1.0, -1.0}) {
        if (z == 0.0 && sz < 0) continue;
        push_cyclic(out, sx * x, sy * y, sz * z);
      }
    }
  }
}

Dirs cube_corners() {
  Dirs out;
  for (double x : {1.0, -1.0})
    for (double y : {1.0, -1.0})
      for (double z : {1.0, -1.0}) out.emplace_back(x, y, z);
  return out;
}

Dirs icosahedron_vertices() {
  Dirs out;
  push_signed_cyclic(out, 0.0, 1.0, std::numbers::phi);
  return out;
}

Dirs dodecahedron_vertices() {
  constexpr double phi = std::numbers::phi;
  Dirs out = cube_corners();
  push_signed_cyclic(out, 0.0, 1.0 / phi, phi);
  return out;
}

Dirs truncated_icosahedron_vertices() {
  constexpr double phi = std::numbers::phi;
  Dirs out;
  push_signed_cyclic(out, 0.0, 1.0, 3.0 * phi);
  push_signed_cyclic(out, 1.0, 2.0 + phi, 2.0 * phi);
  push_signed_cyclic(out, phi, 2.0, phi * phi * phi);
  return out;
}

}  // namespace

Solid solid_from_name(const std::string& name) {
  for (const auto& info : kSolids)
    if (name == info.name) return info.solid;
  throw InvalidArgument("unknown solid '" + name + "'");
}

std::string solid_name(Solid s) {
  for (const auto& info : kSolids)
    if (info.solid == s) return info.name;
  return "unknown";
}

int face_count(Solid s) {
  for (const auto& info : kSolids)
    if (info.solid == s) return info.faces;
  return 0;
}

std::vector<Eigen::Vector3d> face_directions(Solid s) {
  Dirs out;
  switch (s) {
    case Solid::tetrahedron:
      for (const auto& v : cube_corners())
        if (v.x() * v.y() * v.z() > 0) out.push_back(v);
      break;
    case Solid::cube:
      for (int k = 0; k < 3; ++k) {
        out.push_back(Eigen::Vector3d::Unit(k));
        out.push_back(-Eigen::Vector3d::Unit(k));
      }
      break;
    case Solid::octahedron:
      out = cube_corners();
      break;
    case Solid::dodecahedron:
      out = icosahedron_vertices();
      break;
    case Solid::icosahedron:
      out = dodecahedron_vertices();
      break;
    case Solid::fullerene:
      out = icosahedron_vertices();  // pentagons
      for (const auto& v : dodecahedron_vertices()) out.push_back(v);  // hexagons
      break;
    case Solid::pentakis_dodecahedron:
      out = truncated_icosahedron_vertices();
      break;
  }
  for (auto& v : out) v.normalize();
  return out;
}

CVector bloch_ket(const Eigen::Vector3d& n) {
  const Eigen::Vector3d u = n.normalized();
  const double theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
  const double phi = std::atan2(u.y(), u.x());
  CVector k(2);
  k << std::cos(theta / 2.0), std::polar(std::sin(theta / 2.0), phi);
  return k;
}

Protocol direction_protocol(const std::vector<Eigen::Vector3d>& dirs, int qubits,
                            std::string label) {
  if (dirs.empty()) throw InvalidArgument("direction list is empty");
  std::vector<ProtocolRow> rows;
  rows.reserve(dirs.size());
  for (const auto& n : dirs) rows.push_back(ProtocolRow::pure(bloch_ket(n).conjugate()));
  return tensor_power(Protocol(2, std::move(rows), std::move(label)), qubits);
}

Protocol polyhedron_protocol(Solid solid, int qubits) {
  // Every built-in direction set sums to the zero vector, so equal exposures
  // already give sum_j Lambda_j = (m / 2) E.
  return direction_protocol(face_directions(solid), qubits, solid_name(solid));
}

Protocol tensor_product(const Protocol& a, const Protocol& b) {
  std::vector<ProtocolRow> rows;
  rows.reserve(static_cast<std::size_t>(a.size()) * static_cast<std::size_t>(b.size()));
  for (const auto& ra : a.rows()) {
    for (const auto& rb : b.rows()) {
      ProtocolRow r;
      r.exposure = ra.exposure * rb.exposure;
      for (const auto& ca : ra.components)
        for (const auto& cb : rb.components)
          r.components.push_back(
              {ca.weight * cb.weight, kron(ca.row.transpose(), cb.row.transpose()).transpose()});
      rows.push_back(std::move(r));
    }
  }
  std::string label = a.label().empty() || b.label().empty() ? std::string{}
                                                             : a.label() + "x" + b.label();
  return Protocol(a.dim() * b.dim(), std::move(rows), std::move(label));
}

Protocol tensor_power(const Protocol& p, int power) {
  if (power < 1) throw InvalidArgument("tensor power must be >= 1");
  Protocol out = p;
  for (int k = 1; k < power; ++k) out = tensor_product(out, p);
  if (power > 1 && !p.label().empty())
    out = Protocol(out.dim(), out.rows(), p.label() + "^" + std::to_string(power));
  return out;
}

// --- waveplates --------------------------------------------------------------

WaveplateSpec WaveplateSpec::from_thickness(double thickness, double birefringence,
                                            double wavelength, double angle) {
  if (!(wavelength > 0.0)) throw InvalidArgument("wavelength must be positive");
  return {kPi * thickness * birefringence / wavelength, angle};
}

double WaveplateSpec::reduced_delta() const {
  double r = std::fmod(delta, kPi);
  if (r < 0.0) r += kPi;
  return r;
}

CMatrix waveplate_unitary(double delta, double angle) {
  const Complex t(std::cos(delta), std::sin(delta) * std::cos(2.0 * angle));
  const Complex r(0.0, std::sin(delta) * std::sin(2.0 * angle));
  CMatrix g(2, 2);
  g << t, r, -std::conj(r), std::conj(t);
  return g;
}

CMatrix plate_stack_unitary(const std::vector<WaveplateSpec>& plates) {
  CMatrix g = CMatrix::Identity(2, 2);
  for (const auto& p : plates) g = waveplate_unitary(p.delta, p.angle) * g;
  return g;
}

namespace {

CVector analyzer_row(const CVector& analyzer, const CMatrix& stack) {
  if (analyzer.size() != 2) throw DimensionMismatch("analyzer must be a qubit vector");
  return (analyzer.adjoint() * stack).transpose();
}

}  // namespace

Protocol plate_series_protocol(const std::vector<std::vector<WaveplateSpec>>& configs,
                               const CVector& analyzer, std::string label) {
  if (configs.empty()) throw InvalidArgument("plate series needs at least one row");
  std::vector<ProtocolRow> rows;
  rows.reserve(configs.size());
  for (const auto& plates : configs) {
    if (plates.empty()) throw InvalidArgument("plate list is empty");
    rows.push_back(ProtocolRow::pure(analyzer_row(analyzer, plate_stack_unitary(plates))));
  }
  return Protocol(2, std::move(rows), std::move(label));
}

CVector analyzer_vector(const std::string& name) {
  CVector v = CVector::Zero(2);
  if (name == "H") v(0) = 1.0;
  else if (name == "V") v(1) = 1.0;
  else throw InvalidArgument("analyzer must be H or V");
  return v;
}

Protocol single_plate_protocol(double delta, int count, double step, double offset,
                               const CVector& analyzer, std::string label) {
  if (count < 1) throw InvalidArgument("orientation count must be positive");
  std::vector<std::vector<WaveplateSpec>> configs;
  for (int k = 0; k < count; ++k) configs.push_back({{delta, offset + k * step}});
  return plate_series_protocol(configs, analyzer, std::move(label));
}

Protocol b9_protocol(double delta) {
  return single_plate_protocol(delta, 9, 20.0 * kDeg, 0.0, analyzer_vector("V"), "B9");
}

Protocol b36_protocol(double delta) {
  return single_plate_protocol(delta, 36, 10.0 * kDeg, 0.0, analyzer_vector("V"), "B36");
}

namespace {

std::vector<CVector> arm_rows(const ArmSpec& arm) {
  if (arm.plates.empty()) throw InvalidArgument("arm has no plates");
  if (arm.rotations.empty()) throw InvalidArgument("arm has no settings");
  std::vector<CVector> out;
  for (double rot : arm.rotations) {
    auto plates = arm.plates;
    for (auto& p : plates) p.angle += rot;
    out.push_back(analyzer_row(arm.analyzer, plate_stack_unitary(plates)));
  }
  return out;
}

}  // namespace

Protocol two_arm_plate_protocol(const ArmSpec& arm1, const ArmSpec& arm2, bool synchronized,
                                std::string label) {
  const auto a = arm_rows(arm1);
  const auto b = arm_rows(arm2);
  std::vector<ProtocolRow> rows;
  auto push = [&](const CVector& x, const CVector& y) {
    rows.push_back(ProtocolRow::pure(kron(x.transpose(), y.transpose()).transpose()));
  };
  if (synchronized) {
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) push(a[k], b[k]);
  } else {
    for (const auto& x : a)
      for (const auto& y : b) push(x, y);
  }
  return Protocol(4, std::move(rows), std::move(label));
}

Protocol b144_protocol(double delta1, double delta2, bool synchronized) {
  ArmSpec arm;
  arm.plates = {{delta1, 0.0}, {delta2, kPi / 4.0}};
  for (int k = 0; k < 12; ++k) arm.rotations.push_back(30.0 * kDeg * k);
  arm.analyzer = analyzer_vector("V");
  return two_arm_plate_protocol(arm, arm, synchronized, synchronized ? "B144-sync" : "B144");
}

namespace {

Protocol kets_protocol(const std::vector<CVector>& kets, std::string label) {
  std::vector<ProtocolRow> rows;
  for (const auto& k : kets) rows.push_back(ProtocolRow::pure(k.conjugate()));
  return Protocol(static_cast<int>(kets.front().size()), std::move(rows), std::move(label));
}

Protocol j4_protocol() {
  const double a = 1.0 / std::numbers::sqrt2;
  CVector h(2), v(2), d(2), r(2);
  h << 1.0, 0.0;
  v << 0.0, 1.0;
  d << a, a;
  r << a, Complex(0.0, a);
  return kets_protocol({h, v, d, r}, "J4");
}

Protocol kosut8_protocol() {
  // (h, q) plate angles in degrees; each setting yields both output ports.
  constexpr std::pair<double, double> angles[] = {{0, 0}, {20, 45}, {25, 45}, {45, 0}};
  const double a = 1.0 / std::numbers::sqrt2;
  std::vector<CVector> kets;
  for (const auto& [hd, qd] : angles) {
    const double h = hd * kDeg;
    const double q = qd * kDeg;
    CVector psi1(2), psi2(2);
    psi1 << a * Complex(std::sin(2 * h), std::sin(2 * (h - q))),
        a * Complex(std::cos(2 * h), -std::cos(2 * (h - q)));
    psi2 << a * Complex(std::cos(2 * h), std::cos(2 * (h - q))),
        a * Complex(-std::sin(2 * h), std::sin(2 * (h - q)));
    kets.push_back(psi1);
    kets.push_back(psi2);
  }
  return kets_protocol(kets, "kosut8");
}

}  // namespace

Protocol named_protocol(const std::string& name) {
  if (name == "J4") return j4_protocol();
  if (name == "R4") {
    Protocol p = polyhedron_protocol(Solid::tetrahedron, 1);
    return Protocol(p.dim(), p.rows(), "R4");
  }
  if (name == "J16") {
    Protocol p = tensor_power(j4_protocol(), 2);
    return Protocol(p.dim(), p.rows(), "J16");
  }
  if (name == "R16") {
    Protocol p = polyhedron_protocol(Solid::tetrahedron, 2);
    return Protocol(p.dim(), p.rows(), "R16");
  }
  if (name == "kosut8") return kosut8_protocol();
  throw InvalidArgument("unknown protocol '" + name + "'");
}

// --- intensities -------------------------------------------------------------

RVector intensities(const Protocol& p, const DensityMatrix& rho) {
  if (rho.dim() != p.dim()) throw DimensionMismatch("intensities: state dimension mismatch");
  RVector lam(p.size());
  for (int j = 0; j < p.size(); ++j) {
    double v = 0.0;
    for (const auto& c : p.row(j).components)
      v += c.weight * c.row.conjugate().dot(rho.matrix() * c.row.conjugate()).real();
    lam(j) = std::max(0.0, v);
  }
  return lam;
}

RVector intensities(const Protocol& p, const CMatrix& amplitudes) {
  if (amplitudes.rows() != p.dim())
    throw DimensionMismatch("intensities: amplitude dimension mismatch");
  RVector lam(p.size());
  for (int j = 0; j < p.size(); ++j) {
    double v = 0.0;
    for (const auto& c : p.row(j).components)
      v += c.weight * (c.row.transpose() * amplitudes).squaredNorm();
    lam(j) = v;
  }
  return lam;
}

UnityCheck unity_check(const Protocol& p, double tol) {
  const CMatrix total = p.total_intensity_operator();
  const double i0 = total.trace().real() / p.dim();
  UnityCheck out;
  out.deviation =
      (total - i0 * CMatrix::Identity(p.dim(), p.dim())).cwiseAbs().maxCoeff() /
      std::max(i0, std::numeric_limits<double>::min());
  out.holds = i0 > 0.0 && out.deviation < tol;
  if (out.holds) out.intensity = i0;
  return out;
}

Protocol normalize_exposures(const Protocol& p, const DensityMatrix& rho, double n) {
  if (!(n > 0.0)) throw InvalidArgument("sample size n must be positive");
  const double total = intensities(p, rho).dot(p.exposures());
  if (!(total > 0.0)) throw InvalidArgument("all expected counts are zero");
  return p.scaled(n / total);
}

}  // namespace qtomo
