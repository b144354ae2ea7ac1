#include "phasetherm/probe.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <limits>

namespace phasetherm {

void ProbeState::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probe population must lie in [0, 1]");
  if (std::norm(c) > p * (1.0 - p) + 1e-12)
    throw ConfigError("probe coherence violates |c|^2 <= p (1 - p)");
}

Eigen::Matrix2cd ProbeState::density() const {
  Eigen::Matrix2cd rho;
  rho << p, c, std::conj(c), 1.0 - p;
  return rho;
}

ProbeState evolve_probe(const ProbeState& initial, cplx r, double omega_p, double t) {
  initial.validate();
  ProbeState out = initial;
  out.c = initial.c * std::polar(1.0, -omega_p * t) * r;
  return out;
}

double qfi_from_r(cplx r, cplx dr, double tolerance) {
  const double m2 = std::norm(r);
  if (m2 > (1.0 + tolerance) * (1.0 + tolerance)) return std::numeric_limits<double>::quiet_NaN();
  const double den = 1.0 - m2;
  const double re = (std::conj(r) * dr).real();
  if (den <= 1e-14) {
    if (std::norm(dr) == 0.0) return 0.0;
    return std::numeric_limits<double>::quiet_NaN();
  }
  return std::norm(dr) + re * re / den;
}

double qfi_sld_oracle(const Eigen::Matrix2cd& rho, const Eigen::Matrix2cd& drho) {
  if ((rho - rho.adjoint()).norm() > 1e-12 || (drho - drho.adjoint()).norm() > 1e-12)
    throw ConfigError("SLD oracle requires Hermitian rho and d rho");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> eig(rho);
  const auto& vals = eig.eigenvalues();
  const Eigen::Matrix2cd d = eig.eigenvectors().adjoint() * drho * eig.eigenvectors();
  double f = 0.0;
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n) {
      const double s = vals(n) + vals(m);
      if (s < 1e-14) continue;
      f += 2.0 * std::norm(d(m, n)) / s;
    }
  return f;
}

std::pair<Eigen::Matrix2cd, Eigen::Matrix2cd> probe_state_from_r(cplx r, cplx dr) {
  Eigen::Matrix2cd rho, drho;
  rho << 0.5, 0.5 * r, 0.5 * std::conj(r), 0.5;
  drho << 0.0, 0.5 * dr, 0.5 * std::conj(dr), 0.0;
  return {rho, drho};
}

double qfi_standard_error(cplx r, cplx dr, cplx se_r, cplx se_dr) {
  const std::array<double, 4> x{r.real(), r.imag(), dr.real(), dr.imag()};
  const std::array<double, 4> se{se_r.real(), se_r.imag(), se_dr.real(), se_dr.imag()};
  auto f = [](const std::array<double, 4>& v) {
    return qfi_from_r({v[0], v[1]}, {v[2], v[3]});
  };
  double var = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (se[k] == 0.0) continue;
    const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
    auto up = x, dn = x;
    up[k] += h;
    dn[k] -= h;
    double deriv = (f(up) - f(dn)) / (2.0 * h);
    if (!std::isfinite(deriv)) {
      deriv = (f(x) - f(dn)) / h;  // one-sided at the |r| = 1 boundary
      if (!std::isfinite(deriv)) continue;
    }
    var += deriv * deriv * se[k] * se[k];
  }
  return std::sqrt(var);
}

namespace {

void fill_revivals(QfiCurve& curve) {
  for (std::size_t i = 0; i < curve.qfi.size(); ++i) {
    if (!std::isnan(curve.qfi[i])) continue;
    if (curve.t[i] == 0.0) {
      curve.qfi[i] = 0.0;
      continue;
    }
    curve.extrapolated.push_back(i);
    if (i < 3) {
      curve.qfi[i] = i > 0 ? curve.qfi[i - 1] : 0.0;
      continue;
    }
    // Quadratic through the three preceding points, evaluated at t[i].
    const double t0 = curve.t[i - 3], t1 = curve.t[i - 2], t2 = curve.t[i - 1], t = curve.t[i];
    const double f0 = curve.qfi[i - 3], f1 = curve.qfi[i - 2], f2 = curve.qfi[i - 1];
    const double l0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2));
    const double l1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2));
    const double l2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
    curve.qfi[i] = std::max(0.0, f0 * l0 + f1 * l1 + f2 * l2);
  }
  if (!curve.extrapolated.empty())
    curve.warnings.push_back("|r| = 1 at t > 0: QFI extrapolated at " +
                             std::to_string(curve.extrapolated.size()) + " grid point(s)");
}

std::size_t grid_argmax(const QfiCurve& curve) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.qfi.size(); ++i)
    if (curve.qfi[i] > curve.qfi[best]) best = i;
  return best;
}

void check_boundary(QfiCurve& curve, std::size_t best) {
  // Index 0 is t = 0 where the QFI vanishes; a maximum at the first point
  // after it, or at the end of the grid, means the grid does not bracket it.
  const std::size_t n = curve.qfi.size();
  const std::size_t first = (n > 1 && curve.t[0] == 0.0) ? 1 : 0;
  if (best <= first || best + 1 >= n) {
    curve.boundary_warning = true;
    curve.warnings.push_back("QFI maximum sits on the time-grid boundary");
  }
}

void validate_grid(std::span<const double> t) {
  if (t.empty()) throw ConfigError("time grid must be nonempty");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw ConfigError("time grid must be strictly increasing");
}

template <class F>
std::pair<double, double> golden_maximize(F&& f, double a, double b) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  const double tm = 0.5 * (a + b);
  return {tm, f(tm)};
}

}  // namespace

QfiCurve qfi_curve(const DecoherenceSeries& series) {
  validate_grid(series.t);
  QfiCurve curve;
  curve.beta = series.beta;
  curve.t = series.t;
  curve.qfi.resize(series.size());
  curve.qfi_se.resize(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    curve.qfi[i] = series.t[i] == 0.0 ? 0.0 : qfi_from_r(series.r[i], series.dr[i]);
    curve.qfi_se[i] = series.t[i] == 0.0
                          ? 0.0
                          : qfi_standard_error(series.r[i], series.dr[i], series.se_r[i],
                                               series.se_dr[i]);
    if (std::norm(series.r[i]) > 1.0 + 1e-6 + 9.0 * std::norm(series.se_r[i]))
      throw DomainError("|r| > 1 beyond statistical tolerance at t = " +
                        std::to_string(series.t[i]));
  }
  fill_revivals(curve);
  return curve;
}

QfiCurve optimize_qfi(const DecoherenceSeries& series) {
  QfiCurve curve = qfi_curve(series);
  const std::size_t best = grid_argmax(curve);
  check_boundary(curve, best);
  curve.t_opt = curve.t[best];
  curve.qfi_opt = curve.qfi[best];
  curve.qfi_opt_se = curve.qfi_se[best];
  if (!curve.boundary_warning) {
    // Lagrange interpolant through up to five points around the grid maximum.
    const std::size_t lo = best >= 2 ? best - 2 : 0;
    const std::size_t hi = std::min(best + 2, curve.t.size() - 1);
    auto interp = [&](double x) {
      double sum = 0.0;
      for (std::size_t i = lo; i <= hi; ++i) {
        double w = curve.qfi[i];
        for (std::size_t j = lo; j <= hi; ++j)
          if (j != i) w *= (x - curve.t[j]) / (curve.t[i] - curve.t[j]);
        sum += w;
      }
      return sum;
    };
    const auto [tm, fm] = golden_maximize(interp, curve.t[best - 1], curve.t[best + 1]);
    if (fm > curve.qfi_opt) {
      curve.t_opt = tm;
      curve.qfi_opt = fm;
    }
  }
  return curve;
}

DecoherenceSeries sample_model(const DecoherenceModel& model, std::span<const double> t_grid,
                               double beta) {
  DecoherenceSeries s;
  s.beta = beta;
  s.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    s.t[i] = t_grid[i];
    const auto p = model(t_grid[i]);
    s.r[i] = p.r;
    s.dr[i] = p.dr;
  }
  return s;
}

QfiCurve optimize_qfi(const DecoherenceModel& model, std::span<const double> t_grid,
                      double beta) {
  QfiCurve curve = qfi_curve(sample_model(model, t_grid, beta));
  const std::size_t best = grid_argmax(curve);
  check_boundary(curve, best);
  curve.t_opt = curve.t[best];
  curve.qfi_opt = curve.qfi[best];
  curve.qfi_opt_se = curve.qfi_se[best];
  if (curve.boundary_warning) return curve;

  auto f = [&](double t) {
    const auto p = model(t);
    const double v = qfi_from_r(p.r, p.dr);
    return std::isnan(v) ? -1.0 : v;
  };
  const auto [tm, fm] = golden_maximize(f, curve.t[best - 1], curve.t[best + 1]);
  if (fm > curve.qfi_opt) {
    curve.t_opt = tm;
    curve.qfi_opt = fm;
  }
  return curve;
}

QfiCurve optimize_function(const std::function<double(double)>& f,
                           std::span<const double> t_grid, double beta) {
  validate_grid(t_grid);
  QfiCurve curve;
  curve.beta = beta;
  curve.t.assign(t_grid.begin(), t_grid.end());
  curve.qfi.resize(t_grid.size());
  curve.qfi_se.assign(t_grid.size(), 0.0);
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    curve.qfi[i] = t_grid[i] == 0.0 ? 0.0 : f(t_grid[i]);
  fill_revivals(curve);
  const std::size_t best = grid_argmax(curve);
  check_boundary(curve, best);
  curve.t_opt = curve.t[best];
  curve.qfi_opt = curve.qfi[best];
  if (curve.boundary_warning) return curve;
  auto safe = [&](double t) {
    const double v = f(t);
    return std::isnan(v) ? -1.0 : v;
  };
  const auto [tm, fm] = golden_maximize(safe, curve.t[best - 1], curve.t[best + 1]);
  if (fm > curve.qfi_opt) {
    curve.t_opt = tm;
    curve.qfi_opt = fm;
  }
  return curve;
}

std::optional<double> coherence_time(const DecoherenceModel& model, double t_max, double level,
                                     std::size_t scan_points) {
  double t_prev = 0.0, a_prev = std::abs(model(0.0).r);
  for (std::size_t i = 1; i <= scan_points; ++i) {
    const double t = t_max * static_cast<double>(i) / static_cast<double>(scan_points);
    const double a = std::abs(model(t).r);
    if (a <= level) {
      if (a_prev == a) return t;
      return t_prev + (t - t_prev) * (a_prev - level) / (a_prev - a);
    }
    t_prev = t;
    a_prev = a;
  }
  return std::nullopt;
}

std::vector<double> default_time_grid(const DecoherenceModel& model, double t_cap,
                                      std::size_t points) {
  if (!(t_cap > 0.0)) throw ConfigError("time-grid cap must be > 0");
  const auto tau = coherence_time(model, t_cap, std::exp(-1.0), 2000);
  const double t_max = tau ? std::min(6.0 * *tau, t_cap) : t_cap;
  return linspace(0.0, t_max, points);
}

double reparametrize(double F_beta, double beta) {
  if (!(beta > 0.0)) throw ConfigError("reparametrize requires beta > 0");
  return beta * beta * beta * beta * F_beta;
}

}  // namespace phasetherm
