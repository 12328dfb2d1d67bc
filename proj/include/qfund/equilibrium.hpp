#pragma once

// The private-contribution game: each citizen picks c_i >= 0 maximizing
// U_i = V_i(F(c)) - c_i. Solved by damped Gauss-Seidel best-response sweeps;
// efficiency is measured against the social optimum F*.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "qfund/errors.hpp"
#include "qfund/mechanism.hpp"
#include "qfund/preferences.hpp"

namespace qfund {

struct SolverOptions {
  double damping = 0.5;
  int max_sweeps = 500;
  double foc_tolerance = 1e-10;
  double step_tolerance = 1e-12;

  void validate() const {
    require(std::isfinite(damping) && damping > 0.0 && damping <= 1.0,
            "solver damping must lie in (0, 1]");
    require(max_sweeps >= 1, "solver max_sweeps must be at least 1");
    require(std::isfinite(foc_tolerance) && foc_tolerance > 0.0,
            "solver foc_tolerance must be positive");
    require(std::isfinite(step_tolerance) && step_tolerance > 0.0,
            "solver step_tolerance must be positive");
  }

  bool operator==(const SolverOptions&) const = default;
};

struct EquilibriumResult {
  ContributionProfile contributions;
  double funding;
  // Stationarity residual V_i'(F) g'(Sigma) h'(c_i) - 1 for citizens with
  // c_i > 0; for citizens resting at c_i = 0 the entry holds their
  // best-response deviation gain instead (0 when staying out is optimal).
  std::vector<double> foc_residuals;
  int sweeps_used;
  bool converged;
  double social_optimum;   // F*
  double efficiency_gap;   // |F_eq - F*| / max(F*, 1e-9)
  // False for a weight exponent of exactly 1 with n > 1: only the funding
  // level is pinned down there, the split is start-dependent.
  bool split_determinate;
};

// Residual of citizen i's first-order condition,
// V_i'(F(c)) * g'(Sigma) * h'(c_i) - 1.
inline double foc_residual(const MechanismSpec& mech, const Society& society,
                           const ContributionProfile& c, std::size_t i) {
  require(c.size() == society.size(), "profile and society sizes differ");
  require(i < c.size(), "citizen index out of range");
  const double gradient = funding_gradient(mech, c, i);  // SingularGradient at c_i = 0, p < 1
  const double f = funding(mech, c);
  const double marg = f > 0.0 ? marginal(society[i], f) : marginal_limit_at_zero(society[i]);
  return marg * gradient - 1.0;
}

namespace detail {

// Citizen i's utility as a scalar function of their own contribution with
// everyone else's weight held fixed. For weight exponents below 1 the
// optimization variable is the citizen's own weight u = h(c): the cost term
// (u/a)^(1/p) is then C^1 at zero, which removes the h' singularity (for
// p = 1/2 this is the sqrt(c) substitution). For p >= 1 the contribution
// itself is already a smooth variable.
class OwnContributionObjective {
 public:
  OwnContributionObjective(const MechanismSpec& mech, const ValueFunction& value,
                           double others_weight)
      : mech_(mech),
        value_(value),
        others_(others_weight),
        weight_space_(mech.weight.derivative_singular_at_zero()) {}

  double from_contribution(double c) const { return weight_space_ ? mech_.weight.value(c) : c; }
  double to_contribution(double t) const {
    if (!weight_space_) return t;
    return std::pow(t / mech_.weight.scale(), 1.0 / mech_.weight.exponent());
  }

  double utility(double t) const {
    const double f = mech_.lever.value(others_ + own_weight(t));
    return value(value_, f) - to_contribution(t);
  }

  // d utility / dt. Returns +inf where the marginal value diverges, which
  // keeps the sign usable for bracketing.
  double slope(double t) const {
    const double w = others_ + own_weight(t);
    const double f = mech_.lever.value(w);
    const double marg = f > 0.0 ? marginal(value_, f) : marginal_limit_at_zero(value_);
    if (std::isinf(marg)) return marg;
    return marg * mech_.lever.derivative(w) * own_weight_derivative(t) - cost_derivative(t);
  }

 private:
  double own_weight(double t) const { return weight_space_ ? t : mech_.weight.value(t); }
  double own_weight_derivative(double t) const {
    return weight_space_ ? 1.0 : mech_.weight.derivative(t);
  }
  double cost_derivative(double t) const {
    if (!weight_space_) return 1.0;
    const double p = mech_.weight.exponent();
    const double a = mech_.weight.scale();
    return std::pow(t / a, 1.0 / p - 1.0) / (p * a);
  }

  const MechanismSpec& mech_;
  const ValueFunction& value_;
  double others_;
  bool weight_space_;
};

// argmax over own contribution >= 0, given the others' total weight.
// Sign-change bracket on the slope, bisection to relative width 1e-15,
// then an interior-vs-boundary utility comparison.
inline double solve_best_response(const MechanismSpec& mech, const ValueFunction& v,
                                  double others_weight, double current_contribution) {
  const OwnContributionObjective obj(mech, v, others_weight);
  const double t0 = std::max(obj.from_contribution(current_contribution), 1.0);

  double lo;
  double hi;
  if (obj.slope(t0) > 0.0) {
    lo = t0;
    hi = 2.0 * t0;
    while (obj.slope(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e150) throw NoConvergence("best_response: utility keeps rising, no finite maximizer");
    }
  } else {
    hi = t0;
    lo = 0.5 * t0;
    while (!(obj.slope(lo) > 0.0)) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-300) return 0.0;  // slope never positive: the corner is optimal
    }
  }

  int iterations = 0;
  while (hi - lo > 1e-15 * hi) {
    const double mid = 0.5 * (lo + hi);
    (obj.slope(mid) > 0.0 ? lo : hi) = mid;
    if (++iterations > 2000) throw NoConvergence("best_response: bisection cap hit");
  }

  const double t_star = 0.5 * (lo + hi);
  if (!(obj.utility(t_star) > obj.utility(0.0))) return 0.0;
  return obj.to_contribution(t_star);
}

}  // namespace detail

// Citizen i's best response to the others' contributions.
inline double best_response(const MechanismSpec& mech, const Society& society,
                            const ContributionProfile& c, std::size_t i) {
  require(c.size() == society.size(), "profile and society sizes differ");
  require(i < c.size(), "citizen index out of range");
  double others = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (k != i) others += mech.weight.value(c[k]);
  }
  return detail::solve_best_response(mech, society[i], others, c[i]);
}

// Damped Gauss-Seidel best-response iteration from a strictly positive start
// (default all ones; the all-zero profile is a trivial fixed point and is
// rejected). Converged means every update fell below step_tolerance and the
// stationarity check passed: |FOC residual| <= foc_tolerance for citizens
// with c_i > 0, best-response deviation gain <= foc_tolerance at c_i = 0.
// On sweep exhaustion the result is still returned with converged = false.
inline EquilibriumResult solve_equilibrium(const MechanismSpec& mech, const Society& society,
                                           const SolverOptions& opts = {},
                                           const std::optional<ContributionProfile>& start = {}) {
  opts.validate();
  const std::size_t n = society.size();
  std::vector<double> c;
  if (start) {
    require(start->size() == n, "start profile and society sizes differ");
    for (double x : start->values()) require(x > 0.0, "start contributions must be strictly positive");
    c.assign(start->values().begin(), start->values().end());
  } else {
    c.assign(n, 1.0);
  }

  std::vector<double> weights(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = mech.weight.value(c[i]);
    total += weights[i];
  }

  // Deviation gain a citizen at c_i = 0 could capture by re-entering.
  const auto deviation_gain = [&](std::size_t i, double others) {
    const detail::OwnContributionObjective obj(mech, society[i], others);
    const double br = detail::solve_best_response(mech, society[i], others, 0.0);
    return std::max(0.0, obj.utility(obj.from_contribution(br)) - obj.utility(0.0));
  };

  const auto stationary = [&]() {
    const ContributionProfile profile(c);
    for (std::size_t i = 0; i < n; ++i) {
      if (c[i] > 0.0) {
        if (std::abs(foc_residual(mech, society, profile, i)) > opts.foc_tolerance) return false;
      } else {
        if (deviation_gain(i, total - weights[i]) > opts.foc_tolerance) return false;
      }
    }
    return true;
  };

  int sweeps = 0;
  bool converged = false;
  while (sweeps < opts.max_sweeps) {
    ++sweeps;
    double max_step = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double br = detail::solve_best_response(mech, society[i], total - weights[i], c[i]);
      double next = c[i] + opts.damping * (br - c[i]);
      // A contribution decaying below step resolution is settling on the
      // corner; land it exactly so zero-funding equilibria are exact. The
      // stationarity check re-validates the corner through its deviation gain.
      if (br < c[i] && next < opts.step_tolerance) next = 0.0;
      max_step = std::max(max_step, std::abs(next - c[i]));
      c[i] = next;
      const double w = mech.weight.value(next);
      total += w - weights[i];
      weights[i] = w;
    }
    // refresh the running sum; increments accumulate rounding over sweeps
    total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += weights[i];

    // converged only when both the updates and the stationarity residuals
    // are inside tolerance; small steps alone can still be slow progress on
    // a small-contribution coordinate
    if (max_step < opts.step_tolerance && stationary()) {
      converged = true;
      break;
    }
  }

  ContributionProfile profile(std::move(c));
  const double f_eq = funding(mech, profile);
  std::vector<double> residuals(n);
  for (std::size_t i = 0; i < n; ++i) {
    residuals[i] = profile[i] > 0.0 ? foc_residual(mech, society, profile, i)
                                    : deviation_gain(i, total - weights[i]);
  }
  const double f_star = optimal_funding(society);
  const double gap = std::abs(f_eq - f_star) / std::max(f_star, 1e-9);
  const bool split_determinate = !(mech.weight.exponent() == 1.0 && n > 1);
  return EquilibriumResult{std::move(profile), f_eq,       std::move(residuals),
                           sweeps,             converged,  f_star,
                           gap,                split_determinate};
}

struct OptimalityReport {
  double equilibrium_funding;
  double socially_optimal_funding;
  double marginal_sum_at_equilibrium;  // 1 at an interior QF equilibrium
  EquilibriumResult equilibrium;
};

// Measures (never asserts) how the quadratic-funding equilibrium relates to
// the social optimum: F_eq, F*, and sum_i V_i'(F_eq).
inline OptimalityReport verify_qf_optimality(const Society& society,
                                             const SolverOptions& opts = {}) {
  EquilibriumResult eq = solve_equilibrium(qf_mechanism(), society, opts);
  double ms;
  if (eq.funding > 0.0) {
    ms = marginal_sum(society, eq.funding);
  } else {
    try {
      ms = marginal_sum(society, 0.0);
    } catch (const DomainError&) {
      ms = std::numeric_limits<double>::infinity();
    }
  }
  return OptimalityReport{eq.funding, eq.social_optimum, ms, std::move(eq)};
}

}  // namespace qfund
