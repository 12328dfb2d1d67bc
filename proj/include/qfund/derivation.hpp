#pragma once

// Numerical residual checks for the two routes that single out quadratic
// funding among separable mechanisms g(sum h(c_i)):
//
//  * the categorical-imperative matching condition
//        dF/dc_j = sum_i h(c_i) / h(c_j),
//    whose separated form requires g'(x) proportional to x;
//  * the welfare-extremization ODEs (h')^3 = -k h'' for the weight and
//    g'/g'' = const * x for the lever, solvable by Taylor recursion with
//    general solution a * sqrt(y + shift) + offset;
//  * the homogeneous-mechanism route, where the optimality identity
//        sum_i c_i^((q-1)/q) / (sum_j c_j^(1/q))^(q-1) = 1
//    holds identically only at q = 2 (Hoelder's inequality).
//
// All residuals use the families' exact derivatives; the test suite
// cross-checks those once against finite differences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "qfund/errors.hpp"
#include "qfund/mechanism.hpp"

namespace qfund {

namespace detail {
inline void check_grid(const std::vector<double>& grid) {
  require(!grid.empty(), "grid must not be empty");
  for (double x : grid) require(std::isfinite(x) && x > 0.0, "grid points must be positive");
}
}  // namespace detail

// Residuals of one scalar identity over a grid, with the free constant
// fitted at the grid midpoint (the checks test constancy, not a particular
// value of the constant).
struct ResidualReport {
  std::vector<double> grid;
  std::vector<double> residuals;
  double fitted_constant = std::numeric_limits<double>::quiet_NaN();
  double max_abs_residual = 0.0;
  bool degenerate = false;  // a required second derivative vanished on the grid

  [[nodiscard]] bool constant_within(double tol) const {
    return !degenerate && max_abs_residual <= tol;
  }
};

// Residual of the matching condition at citizen j:
// g'(Sigma) h'(c_j) - Sigma / h(c_j). Zero identically for quadratic funding.
inline double ci_residual(const MechanismSpec& mech, const ContributionProfile& c,
                          std::size_t j) {
  require(j < c.size(), "citizen index out of range");
  for (double ci : c.values()) {
    if (ci == 0.0) throw DomainError("ci_residual needs strictly positive contributions");
  }
  const double sigma = total_weight(mech, c);
  const double lhs = mech.lever.derivative(sigma) * mech.weight.derivative(c[j]);
  return lhs - sigma / mech.weight.value(c[j]);
}

// Separated lever equation g'(x) = k x, with k fitted at the grid midpoint.
// Exact (k = q s at q = 2) only when the lever is quadratic.
template <TwiceDifferentiable G>
ResidualReport ci_separated_residuals(const G& lever, const std::vector<double>& grid) {
  detail::check_grid(grid);
  ResidualReport report;
  report.grid = grid;
  const double x_mid = grid[(grid.size() - 1) / 2];
  report.fitted_constant = lever.derivative(x_mid) / x_mid;
  report.residuals.reserve(grid.size());
  for (double x : grid) {
    const double r = lever.derivative(x) - report.fitted_constant * x;
    report.residuals.push_back(r);
    report.max_abs_residual = std::max(report.max_abs_residual, std::abs(r));
  }
  return report;
}

inline ResidualReport ci_separated_residuals(const MechanismSpec& mech,
                                             const std::vector<double>& grid) {
  return ci_separated_residuals(mech.lever, grid);
}

// Weight uniqueness ODE (h')^3 = -k h''. The bracket -(h')^3 / h'' must be
// constant in y; k is fitted at the grid midpoint and the residual
// (h')^3 + k h'' is reported per point. A vanishing h'' anywhere on the grid
// (e.g. a linear weight) makes the bracket undefined: reported as a
// degenerate, non-constant verdict rather than a failure.
template <TwiceDifferentiable H>
ResidualReport uniqueness_ode_residual_h(const H& weight, const std::vector<double>& grid) {
  detail::check_grid(grid);
  ResidualReport report;
  report.grid = grid;
  for (double y : grid) {
    if (weight.second_derivative(y) == 0.0) report.degenerate = true;
  }
  double k = std::numeric_limits<double>::quiet_NaN();
  if (!report.degenerate) {
    const double y_mid = grid[(grid.size() - 1) / 2];
    const double d1 = weight.derivative(y_mid);
    k = -(d1 * d1 * d1) / weight.second_derivative(y_mid);
    report.fitted_constant = k;
  }
  report.residuals.reserve(grid.size());
  for (double y : grid) {
    const double d1 = weight.derivative(y);
    const double cube = d1 * d1 * d1;
    // with h'' = 0 the identity is unsatisfiable; report the unmatched side
    const double r = report.degenerate ? cube : cube + k * weight.second_derivative(y);
    report.residuals.push_back(r);
    report.max_abs_residual = std::max(report.max_abs_residual, std::abs(r));
  }
  return report;
}

// Lever uniqueness ODE g'/g'' = const * x: reports the curvature ratio
// g'(x) / (x g''(x)) relative to its value at the grid midpoint. The ratio
// is constant iff g is a power law and equals 1 exactly for g = s x^2.
template <TwiceDifferentiable G>
ResidualReport uniqueness_ode_residual_g(const G& lever, const std::vector<double>& grid) {
  detail::check_grid(grid);
  for (double x : grid) {
    if (lever.second_derivative(x) == 0.0) {
      throw DegenerateSecondDerivative("lever curvature ratio undefined: g'' = 0 on the grid");
    }
  }
  ResidualReport report;
  report.grid = grid;
  const double x_mid = grid[(grid.size() - 1) / 2];
  report.fitted_constant = lever.derivative(x_mid) / (x_mid * lever.second_derivative(x_mid));
  report.residuals.reserve(grid.size());
  for (double x : grid) {
    const double ratio = lever.derivative(x) / (x * lever.second_derivative(x));
    const double r = ratio - report.fitted_constant;
    report.residuals.push_back(r);
    report.max_abs_residual = std::max(report.max_abs_residual, std::abs(r));
  }
  return report;
}

// Truncated Taylor solution of h'' = -(h')^3 / k around one expansion point.
// Plain polynomial evaluation is accurate within [y0 - trust_radius,
// y0 + trust_radius]; use continue_uniqueness_ode to reach further.
struct SeriesSolution {
  double expansion_point;
  std::vector<double> coefficients;  // c_m of (y - y0)^m, m = 0..order
  double trust_radius;

  [[nodiscard]] double evaluate(double y) const {
    const double t = y - expansion_point;
    double acc = 0.0;
    for (std::size_t m = coefficients.size(); m-- > 0;) acc = acc * t + coefficients[m];
    return acc;
  }
  [[nodiscard]] double derivative(double y) const {
    const double t = y - expansion_point;
    double acc = 0.0;
    for (std::size_t m = coefficients.size(); m-- > 1;) {
      acc = acc * t + static_cast<double>(m) * coefficients[m];
    }
    return acc;
  }
  [[nodiscard]] double second_derivative(double y) const {
    const double t = y - expansion_point;
    double acc = 0.0;
    for (std::size_t m = coefficients.size(); m-- > 2;) {
      acc = acc * t + static_cast<double>(m) * static_cast<double>(m - 1) * coefficients[m];
    }
    return acc;
  }
};

// Solves h'' = -(h')^3 / k at y0 with h(y0) = h0, h'(y0) = d0 by Taylor
// recursion: the derivative series w = h' obeys w' = -w^3 / k, so
// (m+1) w_{m+1} = -(w^3)_m / k with the cube built by convolution from
// w_0..w_m only. The trust radius combines a tail bound on the last
// coefficient with a ratio estimate of the convergence radius.
inline SeriesSolution series_solve_uniqueness_ode(double k, double y0, double h0, double d0,
                                                  int order) {
  require(std::isfinite(k) && k > 0.0, "series: k must be positive");
  require(std::isfinite(y0) && y0 > 0.0, "series: expansion point must be positive");
  require(std::isfinite(h0), "series: h0 must be finite");
  require(std::isfinite(d0) && d0 > 0.0, "series: initial slope must be positive");
  if (order < 4) throw OrderTooLow("series order must be at least 4");

  const std::size_t n = static_cast<std::size_t>(order);
  std::vector<double> w(n, 0.0), w2(n, 0.0), w3(n, 0.0);
  w[0] = d0;
  for (std::size_t m = 0; m + 1 < n; ++m) {
    double sq = 0.0;
    for (std::size_t j = 0; j <= m; ++j) sq += w[j] * w[m - j];
    w2[m] = sq;
    double cu = 0.0;
    for (std::size_t j = 0; j <= m; ++j) cu += w2[j] * w[m - j];
    w3[m] = cu;
    w[m + 1] = -cu / (k * static_cast<double>(m + 1));
  }

  std::vector<double> coeff(n + 1, 0.0);
  coeff[0] = h0;
  for (std::size_t m = 0; m < n; ++m) coeff[m + 1] = w[m] / static_cast<double>(m + 1);

  const double c_last = coeff[n];
  const double c_prev = coeff[n - 1];
  const double radius_estimate =
      (c_last != 0.0 && c_prev != 0.0) ? std::abs(c_prev / c_last) : y0;
  const double tail_target = 1e-10 * std::max(1.0, std::abs(h0));
  const double tail_radius =
      c_last != 0.0 ? std::pow(tail_target / std::abs(c_last), 1.0 / static_cast<double>(n))
                    : radius_estimate;
  const double trust = std::min({tail_radius, 0.5 * radius_estimate, 0.9 * y0});
  return SeriesSolution{y0, std::move(coeff), trust};
}

// Evaluates the same ODE solution at y by stepping: re-expand within each
// trust radius, carrying (h, h') to the next expansion point.
inline double continue_uniqueness_ode(double k, double y0, double h0, double d0, int order,
                                      double y) {
  require(std::isfinite(y) && y > 0.0, "series continuation: target must be positive");
  double point = y0;
  double h = h0;
  double d = d0;
  for (int step = 0; step < 10000; ++step) {
    const SeriesSolution s = series_solve_uniqueness_ode(k, point, h, d, order);
    const double remaining = y - point;
    if (std::abs(remaining) <= s.trust_radius) return s.evaluate(y);
    point += std::copysign(s.trust_radius, remaining);
    h = s.evaluate(point);
    d = s.derivative(point);
    if (!(d > 0.0) || !std::isfinite(h)) {
      throw NoConvergence("series continuation: solution left the increasing branch");
    }
  }
  throw NoConvergence("series continuation: step cap hit before reaching the target");
}

// The ODE's general increasing solution a sqrt(y + shift) + offset pinned by
// the initial data: curvature fixes a = sqrt(2k), the slope places the
// singularity, the value sets the offset.
struct SqrtFormFit {
  double amplitude;
  double shift;
  double offset;

  [[nodiscard]] double evaluate(double y) const {
    return amplitude * std::sqrt(y + shift) + offset;
  }
};

inline SqrtFormFit fit_sqrt_form(double k, double y0, double h0, double d0) {
  require(std::isfinite(k) && k > 0.0, "fit: k must be positive");
  require(std::isfinite(d0) && d0 > 0.0, "fit: slope must be positive");
  const double amplitude = std::sqrt(2.0 * k);
  const double shift = k / (2.0 * d0 * d0) - y0;
  const double offset = h0 - k / d0;
  return SqrtFormFit{amplitude, shift, offset};
}

// Deviation of the homogeneous-mechanism optimality identity from 1:
// sum_i c_i^((q-1)/q) / (sum_j c_j^(1/q))^(q-1) - 1. Identically zero only
// at q = 2.
inline double hoelder_gap(double q, const ContributionProfile& c) {
  require(std::isfinite(q) && q > 0.0, "hoelder_gap: q must be positive");
  for (double ci : c.values()) {
    if (ci == 0.0) throw DomainError("hoelder_gap needs strictly positive contributions");
  }
  double numerator = 0.0;
  double root_sum = 0.0;
  for (double ci : c.values()) {
    numerator += std::pow(ci, (q - 1.0) / q);
    root_sum += std::pow(ci, 1.0 / q);
  }
  return numerator / std::pow(root_sum, q - 1.0) - 1.0;
}

struct UniquenessScan {
  std::vector<double> passing;  // grid points with |hoelder_gap| <= tol
  // All contributions equal (or a single citizen): the identity degenerates
  // (Hoelder equality case) and the scan is uninformative.
  bool equal_contributions_warning = false;
};

// Scans a q grid for points satisfying the optimality identity; {2} for a
// generic profile with at least two unequal entries.
inline UniquenessScan uniqueness_scan(const ContributionProfile& c,
                                      const std::vector<double>& q_grid, double tol) {
  require(std::isfinite(tol) && tol > 0.0, "uniqueness_scan: tolerance must be positive");
  UniquenessScan result;
  const auto values = c.values();
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  result.equal_contributions_warning = (*min_it == *max_it);
  for (double q : q_grid) {
    if (std::abs(hoelder_gap(q, c)) <= tol) result.passing.push_back(q);
  }
  return result;
}

}  // namespace qfund
