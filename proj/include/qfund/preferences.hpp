#pragma once

// Citizen value functions (currency-equivalent utility of funding), social
// welfare W(F) = sum_i V_i(F) - F, and the socially optimal funding level
// F* where the total marginal value equals 1.
//
// Three concave families, each with a closed-form optimum for testing:
//   sqrt:   V(F) = a * sqrt(F)
//   log1p:  V(F) = b * ln(1 + F)
//   power:  V(F) = a * F^alpha, alpha in (0,1)

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "qfund/errors.hpp"

namespace qfund {

namespace detail {
inline void check_funding_domain(double f) {
  if (!(f >= 0.0)) throw DomainError("funding level must be non-negative");
}
}  // namespace detail

class SqrtValue {
 public:
  explicit SqrtValue(double scale) : scale_(scale) {
    require(std::isfinite(scale) && scale > 0.0, "sqrt value: scale must be positive");
  }

  [[nodiscard]] double scale() const { return scale_; }

  double value(double f) const {
    detail::check_funding_domain(f);
    return scale_ * std::sqrt(f);
  }
  // V'(F) = a / (2 sqrt(F)); diverges at F = 0.
  double marginal(double f) const {
    if (!(f > 0.0)) throw DomainError("sqrt value: marginal diverges at F = 0");
    return 0.5 * scale_ / std::sqrt(f);
  }
  double marginal_slope(double f) const {
    if (!(f > 0.0)) throw DomainError("sqrt value: marginal slope undefined at F = 0");
    return -0.25 * scale_ / (f * std::sqrt(f));
  }
  double marginal_limit_at_zero() const { return std::numeric_limits<double>::infinity(); }

  bool operator==(const SqrtValue&) const = default;

 private:
  double scale_;
};

class LogValue {
 public:
  explicit LogValue(double scale) : scale_(scale) {
    require(std::isfinite(scale) && scale > 0.0, "log1p value: scale must be positive");
  }

  [[nodiscard]] double scale() const { return scale_; }

  double value(double f) const {
    detail::check_funding_domain(f);
    return scale_ * std::log1p(f);
  }
  // V'(F) = b / (1 + F); finite everywhere on F >= 0.
  double marginal(double f) const {
    detail::check_funding_domain(f);
    return scale_ / (1.0 + f);
  }
  double marginal_slope(double f) const {
    detail::check_funding_domain(f);
    return -scale_ / ((1.0 + f) * (1.0 + f));
  }
  double marginal_limit_at_zero() const { return scale_; }

  bool operator==(const LogValue&) const = default;

 private:
  double scale_;
};

class PowerValue {
 public:
  PowerValue(double scale, double exponent) : scale_(scale), exponent_(exponent) {
    require(std::isfinite(scale) && scale > 0.0, "power value: scale must be positive");
    require(std::isfinite(exponent) && exponent > 0.0 && exponent < 1.0,
            "power value: exponent must lie in (0, 1)");
  }

  [[nodiscard]] double scale() const { return scale_; }
  [[nodiscard]] double exponent() const { return exponent_; }

  double value(double f) const {
    detail::check_funding_domain(f);
    return scale_ * std::pow(f, exponent_);
  }
  double marginal(double f) const {
    if (!(f > 0.0)) throw DomainError("power value: marginal diverges at F = 0");
    return scale_ * exponent_ * std::pow(f, exponent_ - 1.0);
  }
  double marginal_slope(double f) const {
    if (!(f > 0.0)) throw DomainError("power value: marginal slope undefined at F = 0");
    return scale_ * exponent_ * (exponent_ - 1.0) * std::pow(f, exponent_ - 2.0);
  }
  double marginal_limit_at_zero() const { return std::numeric_limits<double>::infinity(); }

  bool operator==(const PowerValue&) const = default;

 private:
  double scale_;
  double exponent_;
};

using ValueFunction = std::variant<SqrtValue, LogValue, PowerValue>;

inline double value(const ValueFunction& v, double f) {
  return std::visit([f](const auto& fam) { return fam.value(f); }, v);
}
inline double marginal(const ValueFunction& v, double f) {
  return std::visit([f](const auto& fam) { return fam.marginal(f); }, v);
}
inline double marginal_slope(const ValueFunction& v, double f) {
  return std::visit([f](const auto& fam) { return fam.marginal_slope(f); }, v);
}
inline double marginal_limit_at_zero(const ValueFunction& v) {
  return std::visit([](const auto& fam) { return fam.marginal_limit_at_zero(); }, v);
}

// One value function per citizen; utilities are independent and additive.
class Society {
 public:
  explicit Society(std::vector<ValueFunction> values) : values_(std::move(values)) {
    require(!values_.empty(), "society needs at least one citizen");
  }
  Society(std::initializer_list<ValueFunction> values)
      : Society(std::vector<ValueFunction>(values)) {}

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  const ValueFunction& operator[](std::size_t i) const { return values_[i]; }
  [[nodiscard]] std::span<const ValueFunction> citizens() const { return values_; }

  bool operator==(const Society&) const = default;

 private:
  std::vector<ValueFunction> values_;
};

// W(F) = sum_i V_i(F) - F.
inline double welfare(const Society& s, double f) {
  double total = 0.0;
  for (const auto& v : s.citizens()) total += value(v, f);
  return total - f;
}

// sum_i V_i'(F). Strictly decreasing in F; diverges as F -> 0 whenever any
// citizen has a sqrt or power family.
inline double marginal_sum(const Society& s, double f) {
  double total = 0.0;
  for (const auto& v : s.citizens()) total += marginal(v, f);
  return total;
}

inline double marginal_sum_slope(const Society& s, double f) {
  double total = 0.0;
  for (const auto& v : s.citizens()) total += marginal_slope(v, f);
  return total;
}

// The unique F* > 0 with sum_i V_i'(F*) = 1, or 0 when the total marginal
// value never reaches 1 (possible only for all-log societies). Bracket by
// doubling/halving from 1, 80 bisections, then a Newton polish.
inline double optimal_funding(const Society& s) {
  try {
    if (marginal_sum(s, 0.0) <= 1.0) return 0.0;
  } catch (const DomainError&) {
    // some marginal diverges at 0, so the sum exceeds 1 near 0
  }

  int expansions = 0;
  double hi = 1.0;
  while (marginal_sum(s, hi) >= 1.0) {
    hi *= 2.0;
    if (++expansions > 200) throw NoConvergence("optimal_funding: upper bracket expansion cap hit");
  }
  double lo = 1.0;
  while (marginal_sum(s, lo) <= 1.0) {
    lo *= 0.5;
    if (++expansions > 200) throw NoConvergence("optimal_funding: lower bracket expansion cap hit");
  }

  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (marginal_sum(s, mid) > 1.0 ? lo : hi) = mid;
  }

  double f = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {
    const double residual = marginal_sum(s, f) - 1.0;
    const double slope = marginal_sum_slope(s, f);
    if (slope == 0.0) break;
    const double next = f - residual / slope;
    if (!(next > lo && next < hi)) break;
    const bool done = std::abs(next - f) <= 1e-15 * f;
    f = next;
    if (done) break;
  }
  return f;
}

}  // namespace qfund
