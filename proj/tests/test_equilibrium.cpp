#include "qfund/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "test_util.hpp"

using namespace qfund;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const MechanismSpec kLinear{WeightFunction(1.0), LeverFunction(1.0)};
}

TEST_CASE("foc residual closed forms") {
  const Society two{SqrtValue(1.0), SqrtValue(1.0)};
  // at c = [1/4, 1/4]: F = 1, V' = 1/2, dF/dc_1 = 2 -> residual 0
  CHECK_THAT(foc_residual(qf_mechanism(), two, {0.25, 0.25}, 0), WithinAbs(0.0, 1e-12));
  // at c = [1, 1]: F = 4, V' = 1/4, dF/dc_1 = 2 -> residual -1/2
  CHECK_THAT(foc_residual(qf_mechanism(), two, {1.0, 1.0}, 0), WithinAbs(-0.5, 1e-12));

  const Society one{SqrtValue(1.0)};
  CHECK_THAT(foc_residual(kLinear, one, {0.25}, 0), WithinAbs(0.0, 1e-12));

  CHECK_THROWS_AS(foc_residual(qf_mechanism(), two, {0.0, 1.0}, 0), SingularGradient);
}

TEST_CASE("qf best response with sqrt values is the dominant strategy a^2/4") {
  std::mt19937 rng = qfund_test::seeded_rng(831u);
  std::uniform_real_distribution<double> param(0.1, 10.0);
  std::uniform_real_distribution<double> amount(0.01, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = param(rng);
    const Society s{SqrtValue(a), LogValue(param(rng)), SqrtValue(param(rng))};
    const ContributionProfile c{amount(rng), amount(rng), amount(rng)};
    CHECK_THAT(best_response(qf_mechanism(), s, c, 0), WithinRel(a * a / 4.0, 1e-10));
  }
  // the spec'd special case: everyone else already at 1/4
  const Society two{SqrtValue(1.0), SqrtValue(1.0)};
  CHECK_THAT(best_response(qf_mechanism(), two, {1.0, 0.25}, 0), WithinAbs(0.25, 1e-12));
}

TEST_CASE("a citizen with vanishing value contributes nothing") {
  const Society pair{LogValue(1e-15), SqrtValue(1.0)};
  CHECK(best_response(kLinear, pair, {1.0, 1.0}, 0) == 0.0);
  // under qf the gain is below representable utility differences: collapses to 0
  CHECK(best_response(qf_mechanism(), pair, {1.0, 1.0}, 0) <= 1e-12);
}

TEST_CASE("qf equilibrium with sqrt values hits the closed form") {
  const Society two{SqrtValue(1.0), SqrtValue(1.0)};
  const EquilibriumResult res = solve_equilibrium(qf_mechanism(), two);
  REQUIRE(res.converged);
  CHECK_THAT(res.contributions[0], WithinAbs(0.25, 1e-10));
  CHECK_THAT(res.contributions[1], WithinAbs(0.25, 1e-10));
  CHECK_THAT(res.funding, WithinRel(1.0, 1e-10));
  CHECK(res.efficiency_gap <= 1e-8);
  CHECK(res.split_determinate);

  const Society three{SqrtValue(1.0), SqrtValue(2.0), SqrtValue(3.0)};
  const EquilibriumResult res3 = solve_equilibrium(qf_mechanism(), three);
  REQUIRE(res3.converged);
  CHECK_THAT(res3.funding, WithinRel(9.0, 1e-10));
  CHECK_THAT(res3.contributions[0], WithinAbs(0.25, 1e-10));
  CHECK_THAT(res3.contributions[1], WithinAbs(1.0, 1e-10));
  CHECK_THAT(res3.contributions[2], WithinAbs(2.25, 1e-10));
  for (double r : res3.foc_residuals) CHECK(std::abs(r) <= 1e-10);
}

TEST_CASE("linear mechanism underprovides: two identical sqrt citizens") {
  const Society two{SqrtValue(1.0), SqrtValue(1.0)};
  const EquilibriumResult res = solve_equilibrium(kLinear, two);
  REQUIRE(res.converged);
  CHECK_THAT(res.funding, WithinAbs(0.25, 1e-10));  // each FOC: 1/(2 sqrt(F)) = 1
  CHECK_THAT(res.social_optimum, WithinRel(1.0, 1e-10));
  CHECK_THAT(res.efficiency_gap, WithinAbs(0.75, 1e-8));
  CHECK_FALSE(res.split_determinate);  // only the total is pinned down
}

TEST_CASE("linear mechanism efficiency gap is 1 - 1/n^2") {
  for (int n : {2, 3, 5}) {
    const Society s(std::vector<ValueFunction>(static_cast<std::size_t>(n), SqrtValue(1.0)));
    const EquilibriumResult res = solve_equilibrium(kLinear, s);
    REQUIRE(res.converged);
    const double expected = 1.0 - 1.0 / (static_cast<double>(n) * n);
    CHECK_THAT(res.efficiency_gap, WithinAbs(expected, 1e-8));
  }
}

TEST_CASE("equilibrium requires a strictly positive start") {
  const Society two{SqrtValue(1.0), SqrtValue(1.0)};
  CHECK_THROWS_AS(
      solve_equilibrium(qf_mechanism(), two, {}, ContributionProfile({0.0, 1.0})),
      ValidationError);
}

TEST_CASE("equilibrium is invariant under citizen permutation") {
  std::mt19937 rng = qfund_test::seeded_rng(832u);
  std::uniform_real_distribution<double> param(0.1, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ValueFunction> values{SqrtValue(param(rng)), LogValue(param(rng)),
                                      SqrtValue(param(rng)), LogValue(param(rng))};
    const EquilibriumResult forward = solve_equilibrium(qf_mechanism(), Society(values));
    std::vector<ValueFunction> reversed(values.rbegin(), values.rend());
    const EquilibriumResult backward = solve_equilibrium(qf_mechanism(), Society(reversed));
    REQUIRE(forward.converged);
    REQUIRE(backward.converged);
    CHECK_THAT(forward.funding, WithinRel(backward.funding, 1e-9));
    const std::size_t n = values.size();
    for (std::size_t i = 0; i < n; ++i) {
      CHECK_THAT(forward.contributions[i],
                 WithinAbs(backward.contributions[n - 1 - i], 1e-9));
    }
  }
}

TEST_CASE("verify_qf_optimality: the marginal condition emerges at equilibrium") {
  const OptimalityReport sqrt_report = verify_qf_optimality(Society{SqrtValue(1.0), SqrtValue(1.0)});
  CHECK_THAT(sqrt_report.marginal_sum_at_equilibrium, WithinAbs(1.0, 1e-8));

  const OptimalityReport log_report = verify_qf_optimality(Society{LogValue(2.0), LogValue(3.0)});
  CHECK_THAT(log_report.equilibrium_funding, WithinRel(4.0, 1e-6));
  CHECK_THAT(log_report.socially_optimal_funding, WithinRel(4.0, 1e-10));
  CHECK_THAT(log_report.marginal_sum_at_equilibrium, WithinAbs(1.0, 1e-8));
}

TEST_CASE("single citizen under qf self-funds at argmax V(c) - c") {
  // sqrt: argmax a sqrt(c) - c at c = a^2/4
  const OptimalityReport r1 = verify_qf_optimality(Society{SqrtValue(3.0)});
  CHECK_THAT(r1.equilibrium_funding, WithinRel(2.25, 1e-10));
  // log with b < 1: staying out is optimal
  const OptimalityReport r2 = verify_qf_optimality(Society{LogValue(0.5)});
  CHECK(r2.equilibrium_funding == 0.0);
  CHECK(r2.socially_optimal_funding == 0.0);
  CHECK(r2.equilibrium.efficiency_gap == 0.0);
  // log with b > 1: interior, F = b - 1
  const OptimalityReport r3 = verify_qf_optimality(Society{LogValue(2.0)});
  CHECK_THAT(r3.equilibrium_funding, WithinRel(1.0, 1e-8));
}

TEST_CASE("under qf the individual FOCs aggregate to the optimality condition") {
  std::mt19937 rng = qfund_test::seeded_rng(833u);
  std::uniform_real_distribution<double> param(0.1, 10.0);
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_int_distribution<int> family(0, 1);

  for (int trial = 0; trial < 40; ++trial) {
    std::vector<ValueFunction> values;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) {
      if (family(rng) == 0) {
        values.emplace_back(SqrtValue(param(rng)));
      } else {
        values.emplace_back(LogValue(param(rng)));
      }
    }
    const OptimalityReport report = verify_qf_optimality(Society(values));
    REQUIRE(report.equilibrium.converged);
    if (report.socially_optimal_funding == 0.0) continue;
    const bool all_interior = std::all_of(report.equilibrium.contributions.values().begin(),
                                          report.equilibrium.contributions.values().end(),
                                          [](double c) { return c > 0.0; });
    if (!all_interior) continue;
    CHECK(std::abs(report.marginal_sum_at_equilibrium - 1.0) <= 10.0 * 1e-10);
    CHECK(report.equilibrium.efficiency_gap <= 1e-6);
  }
}

TEST_CASE("non-convergence is reported, not hidden") {
  SolverOptions opts;
  opts.max_sweeps = 1;  // far too few for a log society
  const EquilibriumResult res = solve_equilibrium(qf_mechanism(), Society{LogValue(5.0)}, opts);
  CHECK_FALSE(res.converged);
  CHECK(res.sweeps_used == 1);
}

TEST_CASE("solver options are validated") {
  SolverOptions opts;
  opts.damping = 0.0;
  CHECK_THROWS_AS(solve_equilibrium(qf_mechanism(), Society{SqrtValue(1.0)}, opts),
                  ValidationError);
  opts = SolverOptions{};
  opts.damping = 1.5;
  CHECK_THROWS_AS(solve_equilibrium(qf_mechanism(), Society{SqrtValue(1.0)}, opts),
                  ValidationError);
}
