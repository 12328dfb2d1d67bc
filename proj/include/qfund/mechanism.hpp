#pragma once

// Separable public-goods funding mechanisms F(c) = g(sum_i h(c_i)):
// a power-law contribution weight h feeding a power-law funding lever g,
// with exact derivatives and the quadratic-funding closed form
// g(x) = x^2, h(y) = y^(1/2).

#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "qfund/errors.hpp"

namespace qfund {

// Per-citizen non-negative contributions toward one good. Immutable after
// construction; safe to share across threads.
class ContributionProfile {
 public:
  explicit ContributionProfile(std::vector<double> amounts) : amounts_(std::move(amounts)) {
    require(!amounts_.empty(), "contribution profile needs at least one citizen");
    for (double c : amounts_) {
      require(std::isfinite(c), "contributions must be finite");
      require(c >= 0.0, "contributions must be non-negative");
    }
  }
  ContributionProfile(std::initializer_list<double> amounts)
      : ContributionProfile(std::vector<double>(amounts)) {}

  [[nodiscard]] std::span<const double> values() const { return amounts_; }
  [[nodiscard]] std::size_t size() const { return amounts_.size(); }
  double operator[](std::size_t i) const { return amounts_[i]; }

  bool operator==(const ContributionProfile&) const = default;

 private:
  std::vector<double> amounts_;
};

// Contribution weight h(y) = scale * y^exponent. h(0) = 0 and h is strictly
// increasing on y >= 0. The scale is redundant at mechanism level (it can be
// absorbed into the lever) but meaningful for the curvature checks.
class WeightFunction {
 public:
  explicit WeightFunction(double exponent, double scale = 1.0)
      : exponent_(exponent), scale_(scale) {
    require(std::isfinite(exponent) && exponent > 0.0, "weight exponent must be positive");
    require(std::isfinite(scale) && scale > 0.0, "weight scale must be positive");
  }

  [[nodiscard]] double exponent() const { return exponent_; }
  [[nodiscard]] double scale() const { return scale_; }

  double value(double y) const { return scale_ * std::pow(y, exponent_); }
  double derivative(double y) const { return scale_ * exponent_ * std::pow(y, exponent_ - 1.0); }
  double second_derivative(double y) const {
    return scale_ * exponent_ * (exponent_ - 1.0) * std::pow(y, exponent_ - 2.0);
  }

  // h'(0+) = +inf exactly when the exponent is below 1.
  [[nodiscard]] bool derivative_singular_at_zero() const { return exponent_ < 1.0; }

  bool operator==(const WeightFunction&) const = default;

 private:
  double exponent_;
  double scale_;
};

// Funding lever g(x) = scale * x^exponent, converting total weight into
// funding. g(0) = 0 and g is strictly increasing on x >= 0.
class LeverFunction {
 public:
  explicit LeverFunction(double exponent, double scale = 1.0)
      : exponent_(exponent), scale_(scale) {
    require(std::isfinite(exponent) && exponent > 0.0, "lever exponent must be positive");
    require(std::isfinite(scale) && scale > 0.0, "lever scale must be positive");
  }

  [[nodiscard]] double exponent() const { return exponent_; }
  [[nodiscard]] double scale() const { return scale_; }

  double value(double x) const { return scale_ * std::pow(x, exponent_); }
  double derivative(double x) const { return scale_ * exponent_ * std::pow(x, exponent_ - 1.0); }
  double second_derivative(double x) const {
    return scale_ * exponent_ * (exponent_ - 1.0) * std::pow(x, exponent_ - 2.0);
  }

  bool operator==(const LeverFunction&) const = default;

 private:
  double exponent_;
  double scale_;
};

// Any scalar function exposing a value and two derivatives; both power
// families model it, and the derivation checks accept arbitrary models
// (e.g. non-power levers) through it.
template <typename F>
concept TwiceDifferentiable = requires(const F& f, double x) {
  { f.value(x) } -> std::convertible_to<double>;
  { f.derivative(x) } -> std::convertible_to<double>;
  { f.second_derivative(x) } -> std::convertible_to<double>;
};

struct MechanismSpec {
  WeightFunction weight;
  LeverFunction lever;

  bool operator==(const MechanismSpec&) const = default;
};

// Canonical quadratic funding: h(y) = y^(1/2), g(x) = x^2. Satisfies the
// single-citizen normalization F(c) = c.
inline MechanismSpec qf_mechanism() {
  return MechanismSpec{WeightFunction(0.5), LeverFunction(2.0)};
}

// g(h(c)) = c for all c >= 0; holds when p*q = 1 and s*a^q = 1.
inline bool normalizes_single_citizen(const MechanismSpec& mech, double tol = 1e-12) {
  const double pq = mech.weight.exponent() * mech.lever.exponent();
  const double unit = mech.lever.scale() * std::pow(mech.weight.scale(), mech.lever.exponent());
  return std::abs(pq - 1.0) <= tol && std::abs(unit - 1.0) <= tol;
}

// Total weight Sigma = sum_i h(c_i).
inline double total_weight(const MechanismSpec& mech, const ContributionProfile& c) {
  double sum = 0.0;
  for (double ci : c.values()) sum += mech.weight.value(ci);
  return sum;
}

// Funding level F(c) = g(sum_i h(c_i)). For quadratic funding this is
// (sum_i sqrt(c_i))^2; an all-zero profile always funds 0.
inline double funding(const MechanismSpec& mech, const ContributionProfile& c) {
  return mech.lever.value(total_weight(mech, c));
}

// dF/dc_j = g'(Sigma) * h'(c_j). For quadratic funding this equals
// (sum_i sqrt(c_i)) / sqrt(c_j).
inline double funding_gradient(const MechanismSpec& mech, const ContributionProfile& c,
                               std::size_t j) {
  require(j < c.size(), "citizen index out of range");
  if (c[j] == 0.0 && mech.weight.derivative_singular_at_zero()) {
    throw SingularGradient("funding gradient undefined at c_j = 0: h' diverges for weight exponent < 1");
  }
  const double sigma = total_weight(mech, c);
  if (sigma == 0.0 && mech.lever.exponent() < 1.0) {
    throw SingularGradient("funding gradient undefined at zero weight: g' diverges for lever exponent < 1");
  }
  return mech.lever.derivative(sigma) * mech.weight.derivative(c[j]);
}

}  // namespace qfund
