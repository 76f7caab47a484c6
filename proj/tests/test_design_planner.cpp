#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hsurvey/design_planner.hpp"
#include "test_util.hpp"

using namespace hsurvey;

namespace {

constexpr double kZeta95 = 1.959963984540054;

PlanningInputs coral() {
  return PlanningInputs::make(0.16, 0.0, 0.047, CostModel{1.0, 10.0, 0.0}, PrecisionTarget(0.058, 0.05));
}

PlanningInputs tight_target(double sigma_b, double k) {
  return PlanningInputs::make(0.2, 0.02, sigma_b, CostModel{1.0, k, 0.0}, PrecisionTarget(0.02, 0.05));
}

// Independent restatements of the sizing formulas, written out from the
// variance expressions rather than shared with the library.
double oracle_n_star(double sp, double sa, double d) {
  return kZeta95 * kZeta95 / (d * d) * (sp * sp + sa * sa);
}

double oracle_n_a(double n_b, double sp, double sa, double sb, double d) {
  const double budget = d * d / (kZeta95 * kZeta95);
  return (sb * sb + sa * sa) / (budget - (sp * sp - sb * sb) / n_b);
}

double oracle_cost(double n_b, double sp, double sa, double sb, double d, const CostModel& c) {
  return (c.c_c + c.c_b) * n_b + c.c_a * oracle_n_a(n_b, sp, sa, sb, d);
}

// Best offset variance over every integer (n_a, n_b) with TSC <= budget.
// For fixed n_a, the variance falls with n_b, so only the largest affordable
// n_b needs checking.
double grid_best_variance(double budget, const PlanningInputs& in) {
  const double c = in.costs.c_b + in.costs.c_c;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t n_a = 1;; ++n_a) {
    if (in.costs.c_a * n_a + c * n_a > budget) break;
    const auto n_b = static_cast<std::size_t>(std::floor((budget - in.costs.c_a * n_a) / c));
    if (n_b < n_a) continue;
    EXPECT_LE(total_sampling_cost(n_a, n_b, in.costs), budget + 1e-9);
    const double v = (in.sp2() - in.sb2()) / n_b + (in.sa2() + in.sb2()) / n_a;
    best = std::min(best, v);
  }
  return best;
}

}  // namespace

TEST(ConventionalSize, Examples) {
  const auto in = coral();
  EXPECT_NEAR(conventional_sample_size_raw(in), 29.2334559, 1e-6);
  EXPECT_EQ(conventional_sample_size(in), 30u);

  const auto zero = PlanningInputs::make(0.0, 0.0, 0.0, CostModel{1.0, 10.0, 0.0}, PrecisionTarget(0.05, 0.05));
  EXPECT_EQ(conventional_sample_size(zero), 1u);

  const auto f = tight_target(0.1, 10.0);
  EXPECT_NEAR(conventional_sample_size_raw(f), oracle_n_star(0.2, 0.02, 0.02), 1e-9);
  EXPECT_EQ(conventional_sample_size(f), 388u);
}

TEST(ConventionalSize, RejectsNonpositiveD) {
  EXPECT_INVALID(PrecisionTarget(0.0, 0.05), "d must be positive");
  EXPECT_INVALID(PrecisionTarget(-0.1, 0.05), "d must be positive");
}

TEST(ConventionalVariance, Examples) {
  const auto sp02 = PlanningInputs::make(0.2, 0.0, 0.1, CostModel{1.0, 10.0, 0.0}, PrecisionTarget(0.05, 0.05));
  EXPECT_DOUBLE_EQ(conventional_variance(1, sp02), 0.04);
  EXPECT_NEAR(conventional_variance(40, coral()), 0.00064, 1e-15);
  EXPECT_NEAR(conventional_variance(20, coral()), 2.0 * conventional_variance(40, coral()), 1e-15);
}

TEST(OffsetVariance, Examples) {
  const auto in = coral();
  EXPECT_NEAR(offset_variance(std::size_t{5}, std::size_t{53}, in), 0.023391 / 53 + 0.002209 / 5, 1e-12);
  EXPECT_NEAR(offset_variance(std::size_t{5}, std::size_t{53}, in), 0.000883, 5e-7);

  for (std::size_t n : {1u, 7u, 40u}) {
    EXPECT_NEAR(offset_variance(n, n, tight_target(0.1, 1)), conventional_variance(n, tight_target(0.1, 1)), 1e-15);
  }
  const auto equal = tight_target(0.2, 10.0);
  for (std::size_t n_b : {10u, 100u, 1000u}) {
    EXPECT_NEAR(offset_variance(std::size_t{10}, n_b, equal), (0.04 + 0.0004) / 10, 1e-15);
  }
  EXPECT_INVALID(offset_variance(std::size_t{6}, std::size_t{5}, in), "hybrid requires n_b");
}

TEST(Tradeoff, Examples) {
  const auto in = coral();
  const double n_star = conventional_sample_size_raw(in);
  EXPECT_NEAR(tradeoff_n_a(n_star, in), n_star, 1e-9);
  EXPECT_NEAR(tradeoff_n_a(53.0, in), 5.09, 0.005);
  EXPECT_NEAR(tradeoff_n_a(53.0, in), oracle_n_a(53.0, 0.16, 0.0, 0.047, 0.058), 1e-9);
  const double limit = kZeta95 * kZeta95 * (0.047 * 0.047) / (0.058 * 0.058);
  EXPECT_NEAR(tradeoff_n_a(1e12, in), limit, 1e-6);
  EXPECT_INVALID(tradeoff_n_a(10.0, in), "n_b too small for target precision");
}

TEST(Tradeoff, StrictlyDecreasing) {
  for (double sb : {0.02, 0.05, 0.1, 0.15, 0.19}) {
    const auto in = tight_target(sb, 5.0);
    const double n_star = conventional_sample_size_raw(in);
    double prev = tradeoff_n_a(n_star, in);
    for (double n_b = std::ceil(n_star); n_b <= 10 * n_star; n_b += 1.0) {
      const double cur = tradeoff_n_a(n_b, in);
      EXPECT_LT(cur, prev) << "sigma_b=" << sb << " n_b=" << n_b;
      prev = cur;
    }
  }
}

TEST(Tradeoff, BoundaryCollapse) {
  const auto in = tight_target(0.1, 10.0);
  const double n_star = conventional_sample_size_raw(in);
  const double n_a = tradeoff_n_a(n_star, in);
  EXPECT_NEAR(n_a, n_star, 1e-9);
  EXPECT_NEAR(offset_variance(n_star, n_star, in), (in.sp2() + in.sa2()) / n_star, 1e-15);
  EXPECT_NEAR(offset_cost_curve(n_star, in), (1.0 + 10.0) * n_star, 1e-9);
}

TEST(Tsc, Examples) {
  const CostModel c{1.0, 10.0, 0.0};
  EXPECT_DOUBLE_EQ(tsc(SamplingPlan{Design::Conventional, 40, 0, 0, 0}, c), 440.0);
  EXPECT_DOUBLE_EQ(tsc(SamplingPlan{Design::Conventional, 0, 0, 0, 0}, c), 0.0);
  EXPECT_DOUBLE_EQ(tsc(SamplingPlan{Design::HybridOffset, 5, 53, 0, 0}, c), 103.0);
}

TEST(OptimalOffsetPlan, CoralReproduction) {
  const auto plan = optimal_offset_plan(coral());
  EXPECT_EQ(plan.design, Design::HybridOffset);
  EXPECT_EQ(plan.n_b, 53u);
  EXPECT_EQ(plan.n_a, 5u);
  EXPECT_DOUBLE_EQ(plan.tsc, 103.0);
  EXPECT_NO_THROW(plan.validate());
  // Half-up rounding of n_a = 5.09 leaves the variance a hair over budget.
  EXPECT_GT(plan.predicted_variance, coral().target.variance_budget());
  EXPECT_LT(coral().target.half_width(plan.predicted_variance), 0.0583);
}

TEST(OptimalOffsetPlan, StrictPrecisionMeetsTarget) {
  const auto plan = optimal_offset_plan(coral(), RoundingPolicy{true});
  EXPECT_EQ(plan.n_b, 53u);
  EXPECT_EQ(plan.n_a, 6u);
  EXPECT_LE(plan.predicted_variance, coral().target.variance_budget());

  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double sp = 0.05 + 0.3 * u(gen);
    const auto in = PlanningInputs::make(sp, 0.03 * u(gen), sp * 0.95 * u(gen), CostModel{1.0, 1.0 + 99 * u(gen), 0.0},
                                         PrecisionTarget(0.01 + 0.04 * u(gen), 0.05));
    const auto p = optimal_offset_plan(in, RoundingPolicy{true});
    EXPECT_LE(p.predicted_variance, in.target.variance_budget() * (1 + 1e-12));
  }
}

TEST(OptimalOffsetPlan, DegeneratesBelowThreshold) {
  // sigma_delta for sigma_b = 0.15 is about 1.309.
  const auto in = tight_target(0.15, 1.0);
  ASSERT_LT(in.k(), tsc_threshold(in));
  const auto plan = optimal_offset_plan(in);
  EXPECT_EQ(plan.n_a, plan.n_b);
  EXPECT_EQ(plan.n_b, conventional_sample_size(in));
  EXPECT_DOUBLE_EQ(plan.tsc, conventional_plan(in).tsc);
}

TEST(OptimalOffsetPlan, NoisyAuxFallsBackToConventional) {
  const auto in = tight_target(0.2, 50.0);
  EXPECT_EQ(optimal_offset_plan(in).design, Design::Conventional);
  EXPECT_EQ(optimal_offset_plan(tight_target(0.3, 50.0)).design, Design::Conventional);
}

TEST(OptimalOffsetPlan, OperatingPointsAtTwoCostRatios) {
  for (double k : {10.0, 100.0}) {
    const auto in = tight_target(0.1, k);
    const double sp2 = 0.04;
    const double sa2 = 0.0004;
    const double sb2 = 0.01;
    const double scale = kZeta95 * kZeta95 / 0.0004;
    const double n_b_raw = scale * (sp2 - sb2 + std::sqrt(k * (sb2 + sa2) * (sp2 - sb2)));
    const auto plan = optimal_offset_plan(in);
    EXPECT_NEAR(optimal_offset_n_b_raw(in), n_b_raw, 1e-6);
    EXPECT_EQ(plan.n_b, static_cast<std::size_t>(std::floor(n_b_raw + 0.5)));
    EXPECT_EQ(plan.n_a,
              static_cast<std::size_t>(std::floor(oracle_n_a(static_cast<double>(plan.n_b), 0.2, 0.02, 0.1, 0.02) + 0.5)));
    EXPECT_LT(plan.tsc, conventional_plan(in).tsc);
  }
}

TEST(OptimalOffsetPlan, ExhaustiveSearchOracle) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int interior = 0;
  for (int draw = 0; draw < 40; ++draw) {
    const double sp = 0.05 + 0.35 * u(gen);
    const double sb = sp * 0.9 * u(gen);
    const double sa = 0.04 * u(gen);
    const double d = 0.01 + 0.04 * u(gen);
    const CostModel costs{1.0, 1.0 + 99.0 * u(gen), 0.0};
    const auto in = PlanningInputs::make(sp, sa, sb, costs, PrecisionTarget(d, 0.05));
    const auto plan = optimal_offset_plan(in);
    const double n_star = oracle_n_star(sp, sa, d);

    double best_cost = std::numeric_limits<double>::infinity();
    double best_n_b = 0.0;
    for (double n_b = std::ceil(n_star); n_b <= 10.0 * n_star; n_b += 1.0) {
      const double cost = oracle_cost(n_b, sp, sa, sb, d, costs);
      if (cost < best_cost) {
        best_cost = cost;
        best_n_b = n_b;
      }
    }
    EXPECT_LE(std::abs(best_n_b - static_cast<double>(plan.n_b)), 1.0)
        << "draw " << draw << " best " << best_n_b << " plan " << plan.n_b;
    interior += best_n_b > std::ceil(n_star) ? 1 : 0;
  }
  EXPECT_GE(interior, 10);
}

TEST(OptimalOffsetPlan, CostCurveIsConvex) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 20; ++draw) {
    const double sp = 0.05 + 0.35 * u(gen);
    const auto in = PlanningInputs::make(sp, 0.04 * u(gen), sp * 0.95 * u(gen), CostModel{1.0, 50 * u(gen), 0.0},
                                         PrecisionTarget(0.01 + 0.04 * u(gen), 0.05));
    const double n_star = conventional_sample_size_raw(in);
    for (double n_b = std::ceil(n_star) + 1; n_b < 10 * n_star; n_b += 1.0) {
      const double second = offset_cost_curve(n_b + 1, in) - 2 * offset_cost_curve(n_b, in) +
                            offset_cost_curve(n_b - 1, in);
      ASSERT_GE(second, -1e-9) << "draw " << draw << " n_b " << n_b;
    }
  }
}

TEST(Threshold, Examples) {
  const auto half = PlanningInputs::make(0.2, 0.0, 0.2 / std::sqrt(2.0), CostModel{1, 10, 0}, PrecisionTarget(0.02, 0.05));
  EXPECT_NEAR(tsc_threshold(half), 1.0, 1e-12);
  const auto perfect = PlanningInputs::make(0.2, 0.0, 0.0, CostModel{1, 10, 0}, PrecisionTarget(0.02, 0.05));
  EXPECT_DOUBLE_EQ(tsc_threshold(perfect), 0.0);
  EXPECT_NEAR(tsc_threshold(coral()), 0.002209 / 0.023391, 1e-12);
  EXPECT_NEAR(tsc_threshold(coral()), 0.09444, 1e-5);
  EXPECT_INVALID(tsc_threshold(tight_target(0.2, 1)), "threshold undefined");
}

TEST(Threshold, SignFlipsAtSigmaDelta) {
  for (double sb : {0.05, 0.10, 0.15}) {
    const double sigma_delta = tsc_threshold(tight_target(sb, 1.0));
    for (int k = 1; k <= 200; ++k) {
      const auto in = tight_target(sb, k);
      const double diff = conventional_plan(in).tsc - optimal_offset_plan(in).tsc;
      if (k < sigma_delta) {
        EXPECT_EQ(diff, 0.0) << "sigma_b=" << sb << " k=" << k;
      } else if (k > sigma_delta + 1.0) {
        EXPECT_GT(diff, 0.0) << "sigma_b=" << sb << " k=" << k;
      }
    }
  }
}

TEST(BudgetPlan, MatchesPublishedClosedForm) {
  // Evaluate the unsimplified budget formula away from its removable pole.
  for (double sb : {0.02, 0.047, 0.1}) {
    const auto in = PlanningInputs::make(0.16, 0.01, sb, CostModel{1.0, 10.0, 0.5}, PrecisionTarget(0.05, 0.05));
    const double c = in.costs.c_b + in.costs.c_c;
    const double ca = in.costs.c_a;
    const double sd = tsc_threshold(in);
    const double b = 500.0;
    const double published = b * std::sqrt(ca * c * sd) / (ca * c * sd - c * c) - b / (ca * sd - c);
    EXPECT_NEAR(budget_n_b_raw(b, in), published, 1e-9 * published);
  }
}

TEST(BudgetPlan, BudgetIdentityAndCoralComparison) {
  const auto in = coral();
  const auto plan = plan_from_budget(440.0, in);
  EXPECT_LE(plan.tsc, 440.0);
  const double slack = in.costs.c_a + in.costs.c_b + in.costs.c_c;
  EXPECT_GE(plan.n_a * in.costs.c_a + plan.n_b * (in.costs.c_b + in.costs.c_c), 440.0 - slack);
  EXPECT_LT(plan.predicted_variance, conventional_variance(40, in));
  EXPECT_NO_THROW(plan.validate());
}

TEST(BudgetPlan, GridSearchOracle) {
  struct Case {
    double sp, sa, sb, c_c, c_a, c_b, budget;
  };
  const Case cases[] = {
      {0.16, 0.0, 0.047, 1, 10, 0, 440},   {0.16, 0.0, 0.047, 1, 10, 0, 120},
      {0.2, 0.02, 0.1, 1, 5, 0, 1000},     {0.2, 0.02, 0.05, 2, 20, 0.5, 3000},
      {0.3, 0.05, 0.25, 1, 3, 0.2, 250},   {0.1, 0.01, 0.02, 0.5, 40, 0.1, 900},
      {0.25, 0.0, 0.12, 1, 100, 0, 5000},
  };
  for (const auto& cs : cases) {
    const auto in = PlanningInputs::make(cs.sp, cs.sa, cs.sb, CostModel{cs.c_c, cs.c_a, cs.c_b},
                                         PrecisionTarget(0.05, 0.05));
    const double best = grid_best_variance(cs.budget, in);
    // The continuous allocation is a relaxation of the integer grid.
    const double n_b = budget_n_b_raw(cs.budget, in);
    const double n_a = (cs.budget - n_b * (cs.c_b + cs.c_c)) / cs.c_a;
    const double relaxed = offset_variance(std::min(n_a, n_b), n_b, in);
    EXPECT_LE(relaxed, best * (1 + 1e-9));
    // Floor rounding of the continuous optimum stays close to the grid optimum.
    const auto plan = plan_from_budget(cs.budget, in);
    EXPECT_LE(plan.tsc, cs.budget + 1e-9);
    EXPECT_GE(plan.predicted_variance, best * (1 - 1e-12));
    EXPECT_LE(plan.predicted_variance, best * 1.05) << "budget " << cs.budget;
  }
}

TEST(BudgetPlan, Infeasible) {
  const auto in = coral();
  EXPECT_HS_ERROR(plan_from_budget(5.0, in), ErrorKind::Infeasible, "infeasible budget");
  EXPECT_HS_ERROR(plan_from_budget(100.0, tight_target(0.2, 10)), ErrorKind::Infeasible, "infeasible budget");
  EXPECT_INVALID(plan_from_budget(-1.0, in), "budget must be positive");
}

TEST(CompareDesigns, Ordering) {
  const auto above = compare_designs(coral());
  ASSERT_EQ(above.size(), 2u);
  EXPECT_EQ(above[0].design, Design::HybridOffset);

  const auto below = compare_designs(tight_target(0.15, 1.0));
  ASSERT_EQ(below.size(), 2u);
  EXPECT_EQ(below[0].design, Design::Conventional);
  EXPECT_DOUBLE_EQ(below[0].tsc, below[1].tsc);

  const auto noisy = compare_designs(tight_target(0.25, 100.0));
  for (const auto& p : noisy) EXPECT_EQ(p.design, Design::Conventional);
}

TEST(Rounding, Helpers) {
  EXPECT_EQ(round_half_up(2.5), 3u);
  EXPECT_EQ(round_half_up(2.4999), 2u);
  EXPECT_EQ(ceil_tolerant(30.0000000000001), 30u);
  EXPECT_EQ(ceil_tolerant(29.2), 30u);
}
