#include "qtomo/precision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "qtomo/analysis.hpp"
#include "qtomo/error.hpp"
#include "qtomo/parallel.hpp"
#include "qtomo/simulation.hpp"
#include "row_cache.hpp"

namespace qtomo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

struct SymEig {
  RVector values;  // descending
  RMatrix vectors;
};

SymEig eig_descending(const RMatrix& h) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(h);
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

/// d for the amplitudes `l` (trace one) with exposures rescaled to total n.
RVector loss_coefficients(const detail::RowCache& cache, const CMatrix& l, double n,
                          std::vector<int>* degenerate) {
  const int s = cache.dim();
  const int r = static_cast<int>(l.cols());
  const RVector lam = cache.intensities(l);
  const double total = lam.dot(cache.exposures());
  if (!(total > 0.0)) throw IncompleteProtocol("all expected counts vanish for this state");
  const RVector t = cache.exposures() * (n / total);

  const auto eig = eig_descending(cache.information(l, t, degenerate));
  const int nz = (2 * s - r) * r;
  const double hmax = eig.values(0);
  if (!(hmax > 0.0) || eig.values(nz - 1) <= 1e-12 * hmax)
    throw IncompleteProtocol("information matrix has fewer than (2s - r) r positive eigenvalues");

  // Covariance of the fluctuation is (2H)^+ on the non-gauge directions; the
  // fidelity loss sees its part orthogonal to the state itself.
  const RMatrix u = eig.vectors.leftCols(nz);
  const RVector inv = (2.0 * eig.values.head(nz)).cwiseInverse();
  RVector c = realify(l);
  c /= c.norm();
  const RMatrix pu = u - c * (c.transpose() * u);
  const RMatrix m = pu * inv.asDiagonal() * pu.transpose();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  RVector d = es.eigenvalues().reverse().head(nz - 1).cwiseMax(0.0);
  return d;
}

CMatrix column(const CVector& c) {
  CMatrix l(c.size(), 1);
  l.col(0) = c / c.norm();
  return l;
}

}  // namespace

// --- information matrix ------------------------------------------------------

int InformationMatrix::positive_count(double rel_tol) const {
  if (eigenvalues.size() == 0 || !(eigenvalues(0) > 0.0)) return 0;
  return static_cast<int>((eigenvalues.array() > rel_tol * eigenvalues(0)).count());
}

InformationMatrix information_matrix(const Protocol& p, const CMatrix& amplitudes) {
  if (amplitudes.rows() != p.dim())
    throw DimensionMismatch("information_matrix: state dimension differs from protocol");
  const detail::RowCache cache(p);
  InformationMatrix out;
  out.h = cache.information(amplitudes, cache.exposures(), &out.degenerate_rows);
  auto eig = eig_descending(out.h);
  out.eigenvalues = std::move(eig.values);
  out.eigenvectors = std::move(eig.vectors);
  return out;
}

InformationMatrix information_matrix(const Protocol& p, const PurifiedState& state) {
  return information_matrix(p, state.amplitudes());
}

// --- weighted chi-square -----------------------------------------------------

WeightedChiSquare::WeightedChiSquare(RVector weights) : d_(std::move(weights)) {
  if (d_.size() == 0) throw InvalidArgument("weighted chi-square needs at least one weight");
  if ((d_.array() < 0.0).any() || !d_.allFinite())
    throw InvalidArgument("weights must be finite and non-negative");
  scale_ = d_.maxCoeff();
  if (scale_ <= 0.0) return;

  std::vector<double> sorted(d_.data(), d_.data() + d_.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double smallest = scale_;
  for (double v : sorted) {
    if (v <= 0.0) break;
    smallest = v;
    const double x = v / scale_;
    if (!scaled_.empty() && std::abs(scaled_.back() - x) <= 1e-12 * scaled_.back()) {
      multiplicity_.back() += 1.0;
    } else {
      scaled_.push_back(x);
      multiplicity_.push_back(1.0);
    }
  }
  use_monte_carlo_ = scale_ / smallest > 1e12;
  if (use_monte_carlo_) {
    constexpr int kDraws = 1'000'000;
    PhiloxStream rng(0x5eedc0ffeeULL, 0);
    mc_samples_.resize(kDraws);
    for (auto& q : mc_samples_) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < d_.size(); ++j) {
        const double z = rng.next_normal();
        acc += d_(j) * z * z;
      }
      q = acc;
    }
    std::sort(mc_samples_.begin(), mc_samples_.end());
  }
}

double WeightedChiSquare::mean() const {
  return d_.sum();
}

double WeightedChiSquare::variance() const {
  return 2.0 * d_.squaredNorm();
}

double WeightedChiSquare::monte_carlo_cdf(double x) const {
  const auto it = std::upper_bound(mc_samples_.begin(), mc_samples_.end(), x);
  return static_cast<double>(it - mc_samples_.begin()) / static_cast<double>(mc_samples_.size());
}

namespace {

/// Wynn epsilon extrapolation of a sequence of partial sums, one
/// anti-diagonal of the epsilon table at a time.
class WynnEpsilon {
 public:
  double push(double s) {
    std::vector<double> next{s};
    for (std::size_t k = 0; k < diag_.size(); ++k) {
      const double diff = next[k] - diag_[k];
      if (diff == 0.0) break;
      next.push_back((k == 0 ? 0.0 : diag_[k - 1]) + 1.0 / diff);
    }
    diag_ = std::move(next);
    for (std::size_t k = diag_.size(); k-- > 0;)
      if (k % 2 == 0 && std::isfinite(diag_[k])) return diag_[k];
    return s;
  }

 private:
  std::vector<double> diag_;
};

}  // namespace

double WeightedChiSquare::imhof_upper_tail(double x) const {
  const double xs = x / scale_;
  const auto& d = scaled_;
  const auto& w = multiplicity_;
  auto theta = [&](double u) {
    double a = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) a += w[j] * std::atan(d[j] * u);
    return 0.5 * a - 0.5 * xs * u;
  };
  auto dtheta = [&](double u) {
    double a = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) a += w[j] * d[j] / (1.0 + d[j] * d[j] * u * u);
    return 0.5 * a - 0.5 * xs;
  };
  auto integrand = [&](double u) {
    if (u <= 0.0) return dtheta(0.0);
    double lr = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) lr += w[j] * std::log1p(d[j] * d[j] * u * u);
    return std::sin(theta(u)) / (u * std::exp(0.25 * lr));
  };
  auto piece = [&](double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 12,
                                                                          1e-13);
  };
  // First u > lo with theta(u) = level, theta monotone on [lo, hi].
  auto solve_level = [&](double lo, double hi, double level) {
    const bool rising = theta(hi) > theta(lo);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((theta(mid) < level) == rising) lo = mid; else hi = mid;
      if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
  };

  // theta is concave; it rises up to u_star and falls without bound after.
  double u_star = 0.0;
  if (dtheta(0.0) > 0.0) {
    double hi = 1.0;
    while (dtheta(hi) > 0.0) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (dtheta(mid) > 0.0) lo = mid; else hi = mid;
    }
    u_star = 0.5 * (lo + hi);
  }

  double total = 0.0;
  double a = 0.0;
  const double theta_star = theta(u_star);
  if (u_star > 0.0) {
    for (int k = 1; k * kPi < theta_star; ++k) {
      const double b = solve_level(a, u_star, k * kPi);
      total += piece(a, b);
      a = b;
    }
    total += piece(a, u_star);
    a = u_star;
  }

  // Falling branch: split at theta = k pi and sum the alternating pieces.
  WynnEpsilon wynn;
  double level = std::floor(theta_star / kPi) * kPi;
  if (level >= theta_star) level -= kPi;
  double sum = total;
  double estimate = sum;
  double previous = std::numeric_limits<double>::quiet_NaN();
  int stable = 0;
  for (int k = 0; k < 2000; ++k) {
    double hi = std::max(a, 1.0) * 2.0;
    while (theta(hi) > level) hi *= 2.0;
    const double b = solve_level(a, hi, level);
    const double term = piece(a, b);
    sum += term;
    estimate = wynn.push(sum);
    if (std::abs(term) < 1e-16 || (std::isfinite(previous) && std::abs(estimate - previous) < 1e-13)) {
      if (++stable >= 3) break;
    } else {
      stable = 0;
    }
    previous = estimate;
    a = b;
    level -= kPi;
  }
  return 0.5 + estimate / kPi;
}

double WeightedChiSquare::cdf(double x) const {
  if (!(x > 0.0) || scale_ <= 0.0) return x >= 0.0 ? (scale_ <= 0.0 ? 1.0 : 0.0) : 0.0;
  if (use_monte_carlo_) return monte_carlo_cdf(x);
  return std::clamp(1.0 - imhof_upper_tail(x), 0.0, 1.0);
}

double WeightedChiSquare::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile level must lie in (0, 1)");
  if (scale_ <= 0.0) return 0.0;
  double hi = mean() + 10.0 * std::sqrt(variance());
  while (cdf(hi) < p) hi *= 2.0;
  double lo = 0.0;
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(
      [&](double x) { return cdf(x) - p; }, lo, hi, -p, cdf(hi) - p,
      boost::math::tools::eps_tolerance<double>(45), iters);
  return 0.5 * (a + b);
}

// --- loss model --------------------------------------------------------------

LossModel loss_model(const Protocol& p, const PurifiedState& state, double n) {
  if (!(n > 0.0)) throw InvalidArgument("sample size n must be positive");
  if (state.dim() != p.dim()) throw DimensionMismatch("loss_model: state dimension mismatch");
  const detail::RowCache cache(p);
  LossModel m;
  m.n = n;
  m.dim = state.dim();
  m.rank = state.rank();
  m.d = loss_coefficients(cache, state.amplitudes(), n, &m.degenerate_rows);
  return m;
}

LossModel loss_model(const Protocol& p, const DensityMatrix& rho, double n) {
  return loss_model(p, purify(rho), n);
}

LossMoments loss_moments(const LossModel& m) {
  LossMoments out;
  out.mean = m.d.sum();
  out.variance = 2.0 * m.d.squaredNorm();
  if (out.variance > 0.0) {
    const double sigma = std::sqrt(out.variance);
    out.skewness = 8.0 * m.d.array().cube().sum() / (sigma * sigma * sigma);
    out.excess_kurtosis = 48.0 * m.d.array().square().square().sum() / (out.variance * out.variance);
  }
  return out;
}

double loss_L(const LossModel& m) {
  return m.n * m.d.sum();
}

double loss_cdf(const LossModel& m, double x) {
  return m.distribution().cdf(x);
}

double loss_quantile(const LossModel& m, double p) {
  return m.distribution().quantile(p);
}

double z_value(double loss) {
  return loss > 0.0 ? -std::log10(loss) : kInf;
}

LossBounds min_loss_bounds(int dim, int rank) {
  if (dim < 2) throw InvalidArgument("bounds need dimension >= 2");
  if (rank < 1 || rank > dim) throw InvalidArgument("rank must lie in [1, s]");
  LossBounds b;
  b.nu = (2 * dim - rank) * rank - 1;
  b.l_min_opt = static_cast<double>(b.nu) * b.nu / (4.0 * (dim - 1));
  return b;
}

double polyhedron_mixed_floor(int qubits) {
  if (qubits < 1) throw InvalidArgument("qubit count must be positive");
  return (std::pow(10.0, qubits) - 1.0) / 4.0;
}

// --- scans -------------------------------------------------------------------

ScanField::Summary ScanField::summary(int value_column) const {
  Summary s;
  for (int i = 0; i < size(); ++i) {
    if (singular[static_cast<std::size_t>(i)]) continue;
    const double v = values(i, value_column);
    if (!std::isfinite(v)) continue;
    if (s.argmin < 0 || v < s.min) { s.min = v; s.argmin = i; }
    if (s.argmax < 0 || v > s.max) { s.max = v; s.argmax = i; }
  }
  return s;
}

std::vector<int> ScanField::singular_points() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (singular[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

std::vector<Eigen::Vector3d> fibonacci_sphere(int points) {
  if (points < 1) throw InvalidArgument("grid needs at least one point");
  std::vector<Eigen::Vector3d> out;
  out.reserve(static_cast<std::size_t>(points));
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < points; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / points;
    const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * (i + 0.5);
    out.emplace_back(rr * std::cos(phi), rr * std::sin(phi), z);
  }
  return out;
}

namespace {

double cached_pure_loss(const detail::RowCache& cache, const CVector& c,
                        std::vector<int>* degenerate = nullptr) {
  return loss_coefficients(cache, column(c), 1.0, degenerate).sum();
}

}  // namespace

double pure_state_loss(const Protocol& p, const CVector& c) {
  if (c.size() != p.dim()) throw DimensionMismatch("pure_state_loss: dimension mismatch");
  return cached_pure_loss(detail::RowCache(p), c);
}

ScanField bloch_scan(const Protocol& p, int grid_points, int threads) {
  if (p.dim() != 2) throw DimensionMismatch("bloch_scan needs a single-qubit protocol");
  const auto dirs = fibonacci_sphere(grid_points);
  const detail::RowCache cache(p);
  ScanField f;
  f.coordinate_names = {"x", "y", "z"};
  f.value_names = {"L"};
  f.coordinates.resize(grid_points, 3);
  f.values.resize(grid_points, 1);
  f.singular.assign(static_cast<std::size_t>(grid_points), false);
  std::vector<char> bad(static_cast<std::size_t>(grid_points), 0);
  parallel_for(static_cast<std::size_t>(grid_points), threads, [&](std::size_t i) {
    const auto k = static_cast<Eigen::Index>(i);
    f.coordinates.row(k) = dirs[i].transpose();
    try {
      std::vector<int> degenerate;
      f.values(k, 0) = cached_pure_loss(cache, bloch_ket(dirs[i]), &degenerate);
      if (!std::isfinite(f.values(k, 0)) || !degenerate.empty()) bad[i] = 1;
    } catch (const Error&) {
      f.values(k, 0) = kInf;
      bad[i] = 1;
    }
  });
  for (std::size_t i = 0; i < bad.size(); ++i) f.singular[i] = bad[i] != 0;
  return f;
}

// --- maximum search ----------------------------------------------------------

namespace {

/// 2s - 2 angles: s - 1 hyperspherical magnitudes then s - 1 relative phases.
CVector state_from_angles(const RVector& x, int s) {
  CVector c(s);
  double tail = 1.0;
  for (int k = 0; k < s - 1; ++k) {
    c(k) = tail * std::cos(x(k));
    tail *= std::sin(x(k));
  }
  c(s - 1) = tail;
  for (int k = 1; k < s; ++k) c(k) *= std::polar(1.0, x(s - 2 + k));
  return c;
}

RVector angles_from_state(const CVector& c_in) {
  const int s = static_cast<int>(c_in.size());
  const CVector c = fix_global_phase(c_in / c_in.norm());
  RVector x(2 * s - 2);
  for (int k = 0; k < s - 1; ++k) {
    const double rest = c.tail(s - 1 - k).norm();
    x(k) = std::atan2(rest, std::abs(c(k)));
  }
  // Signs of the magnitudes are folded into the phases.
  const double ph0 = std::arg(c(0));
  for (int k = 1; k < s; ++k) x(s - 2 + k) = std::arg(c(k)) - ph0;
  return x;
}

struct SimplexResult {
  RVector x;
  double f = kInf;
  long evaluations = 0;
};

template <typename F>
SimplexResult nelder_mead(F&& f, const RVector& x0, double step, long budget) {
  const Eigen::Index n = x0.size();
  std::vector<RVector> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> val(static_cast<std::size_t>(n + 1));
  SimplexResult res;
  auto eval = [&](const RVector& x) {
    ++res.evaluations;
    return f(x);
  };
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step;
  for (std::size_t i = 0; i < pts.size(); ++i) val[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  while (res.evaluations < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return val[a] < val[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    double spread = 0.0;
    for (const auto& p : pts) spread = std::max(spread, (p - pts[best]).cwiseAbs().maxCoeff());
    if (std::abs(val[worst] - val[best]) <= 1e-14 * (std::abs(val[best]) + 1e-300) &&
        spread < 1e-9)
      break;

    RVector centroid = RVector::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const RVector xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < val[best]) {
      const RVector xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) { pts[worst] = xe; val[worst] = fe; }
      else { pts[worst] = xr; val[worst] = fr; }
    } else if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
    } else {
      const bool outside = fr < val[worst];
      const RVector xc = outside ? RVector(centroid + 0.5 * (xr - centroid))
                                 : RVector(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : val[worst])) {
        pts[worst] = xc;
        val[worst] = fc;
      } else {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          val[i] = eval(pts[i]);
        }
      }
    }
  }
  const auto it = std::min_element(val.begin(), val.end());
  res.x = pts[static_cast<std::size_t>(it - val.begin())];
  res.f = *it;
  return res;
}

}  // namespace

namespace {

/// Multi-start simplex search of sign * L over pure states.
MaxLossResult extremum_search(const Protocol& p, const MaxLossOptions& opts, double sign) {
  const int s = p.dim();
  if (s < 2) throw InvalidArgument("max_loss_search needs dimension >= 2");
  if (!(opts.intensity_margin >= 0.0 && opts.intensity_margin < 1.0))
    throw InvalidArgument("intensity_margin must lie in [0, 1)");
  const detail::RowCache cache(p);

  std::vector<CVector> seeds;
  if (s == 2 && opts.grid_seeds > 0 && opts.grid_points > 0) {
    const auto grid = bloch_scan(p, opts.grid_points, opts.threads);
    std::vector<int> idx(static_cast<std::size_t>(grid.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return sign * grid.values(a, 0) > sign * grid.values(b, 0);
    });
    for (int k = 0; k < std::min<int>(opts.grid_seeds, grid.size()); ++k) {
      if (grid.singular[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])]) continue;
      seeds.push_back(bloch_ket(grid.coordinates.row(idx[static_cast<std::size_t>(k)]).transpose()));
    }
  }
  for (int i = 0; i < opts.restarts; ++i) {
    PhiloxStream rng(opts.seed, static_cast<std::uint64_t>(i));
    CVector c(s);
    for (int k = 0; k < s; ++k) {
      const double re = rng.next_normal();
      const double im = rng.next_normal();
      c(k) = Complex(re, im);
    }
    seeds.push_back(c / c.norm());
  }
  if (seeds.empty()) throw InvalidArgument("max_loss_search needs at least one start");

  // The loss jumps at states orthogonal to some row (that row drops out of H),
  // so those measure-zero points are excluded from the search.
  auto objective = [&](const RVector& x) {
    try {
      const CVector c = state_from_angles(x, s);
      if (opts.intensity_margin > 0.0) {
        const RVector lam = cache.intensities(column(c));
        if (lam.minCoeff() < opts.intensity_margin * lam.maxCoeff()) return kInf;
      }
      std::vector<int> degenerate;
      const double v = cached_pure_loss(cache, c, &degenerate);
      return std::isfinite(v) && degenerate.empty() ? -sign * v : kInf;
    } catch (const Error&) {
      return kInf;
    }
  };

  std::vector<SimplexResult> results(seeds.size());
  const long budget = std::max<long>(opts.max_evaluations, 8);
  parallel_for(seeds.size(), opts.threads, [&](std::size_t i) {
    SimplexResult r = nelder_mead(objective, angles_from_state(seeds[i]), 0.25, budget / 2);
    long used = r.evaluations;
    for (double step : {0.05, 0.005}) {
      SimplexResult polish = nelder_mead(objective, r.x, step, budget / 4);
      used += polish.evaluations;
      if (polish.f <= r.f) r = std::move(polish);
    }
    r.evaluations = used;
    results[i] = std::move(r);
  });

  MaxLossResult out;
  out.restarts = static_cast<int>(seeds.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    out.evaluations += results[i].evaluations;
    if (results[i].f < results[best].f) best = i;
  }
  if (!std::isfinite(results[best].f))
    throw IncompleteProtocol("no start produced a finite loss");
  out.l_max = -sign * results[best].f;
  out.argmax = fix_global_phase(state_from_angles(results[best].x, s));
  return out;
}

}  // namespace

MaxLossResult max_loss_search(const Protocol& p, const MaxLossOptions& opts) {
  return extremum_search(p, opts, 1.0);
}

MaxLossResult min_loss_search(const Protocol& p, const MaxLossOptions& opts) {
  return extremum_search(p, opts, -1.0);
}

namespace {

double condition_number_or_inf(const Protocol& p) {
  Eigen::JacobiSVD<CMatrix> svd(MeasurementMatrix(p).matrix());
  const auto& sv = svd.singularValues();
  const auto s2 = static_cast<Eigen::Index>(p.dim()) * p.dim();
  if (sv.size() < s2 || !(sv(0) > 0.0) || sv(s2 - 1) <= 1e-10 * sv(0)) return kInf;
  return sv(0) / sv(s2 - 1);
}

}  // namespace

ScanField delta_scan(double delta_lo, double delta_hi, int points, int grid_points,
                     int threads, int refine_restarts) {
  if (points < 2) throw InvalidArgument("delta scan needs at least two points");
  if (!(delta_hi > delta_lo)) throw InvalidArgument("delta range is empty");
  ScanField f;
  f.coordinate_names = {"delta"};
  f.value_names = {"K", "max_L"};
  f.coordinates.resize(points, 1);
  f.values.resize(points, 2);
  f.singular.assign(static_cast<std::size_t>(points), false);
  std::vector<char> bad(static_cast<std::size_t>(points), 0);
  parallel_for(static_cast<std::size_t>(points), threads, [&](std::size_t i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double delta = delta_lo + (delta_hi - delta_lo) * static_cast<double>(i) / (points - 1);
    const Protocol p = b9_protocol(delta);
    f.coordinates(k, 0) = delta;
    f.values(k, 0) = condition_number_or_inf(p);
    if (!std::isfinite(f.values(k, 0))) {
      f.values(k, 1) = kInf;
      bad[i] = 1;
      return;
    }
    // The grid alone misses the maximum by ~1e-2 near the optimum; polish the
    // best grid points and a few random starts.
    MaxLossOptions opts;
    opts.grid_points = grid_points;
    opts.restarts = refine_restarts;
    opts.max_evaluations = 2000;
    opts.threads = 1;
    try {
      f.values(k, 1) = max_loss_search(p, opts).l_max;
    } catch (const Error&) {
      f.values(k, 1) = kInf;
    }
    if (!std::isfinite(f.values(k, 1))) bad[i] = 1;
  });
  for (std::size_t i = 0; i < bad.size(); ++i) f.singular[i] = bad[i] != 0;
  return f;
}

ScanField thickness_scan(const ThicknessGrid& g, int threads) {
  if (g.h1_points < 1 || g.h2_points < 1) throw InvalidArgument("thickness grid is empty");
  if (!(g.birefringence > 0.0) || !(g.wavelength > 0.0))
    throw InvalidArgument("birefringence and wavelength must be positive");
  const int total = g.h1_points * g.h2_points;
  auto axis = [](double lo, double hi, int n, int i) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  };
  ScanField f;
  f.coordinate_names = {"h1", "h2"};
  f.value_names = {"K", "log10K"};
  f.coordinates.resize(total, 2);
  f.values.resize(total, 2);
  f.singular.assign(static_cast<std::size_t>(total), false);
  std::vector<char> bad(static_cast<std::size_t>(total), 0);
  parallel_for(static_cast<std::size_t>(total), threads, [&](std::size_t i) {
    const auto k = static_cast<Eigen::Index>(i);
    const int i1 = static_cast<int>(i) / g.h2_points;
    const int i2 = static_cast<int>(i) % g.h2_points;
    const double h1 = axis(g.h1_lo, g.h1_hi, g.h1_points, i1);
    const double h2 = axis(g.h2_lo, g.h2_hi, g.h2_points, i2);
    const double d1 = WaveplateSpec::from_thickness(h1, g.birefringence, g.wavelength, 0.0).delta;
    const double d2 = WaveplateSpec::from_thickness(h2, g.birefringence, g.wavelength, 0.0).delta;
    f.coordinates(k, 0) = h1;
    f.coordinates(k, 1) = h2;
    const double kappa = condition_number_or_inf(b144_protocol(d1, d2));
    f.values(k, 0) = kappa;
    f.values(k, 1) = std::log10(kappa);
    if (!std::isfinite(kappa)) bad[i] = 1;
  });
  for (std::size_t i = 0; i < bad.size(); ++i) f.singular[i] = bad[i] != 0;
  return f;
}

}  // namespace qtomo
