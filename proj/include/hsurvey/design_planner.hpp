#pragma once

// Closed-form sample-size planning for the Conventional and Hybrid-Offset
// designs.
//
// Notation used in comments: sp2, sa2, sb2 are the population, primary-error
// and auxiliary-error variances; V = d^2 / zeta^2 is the variance budget of
// the precision target; k = c_a / (c_c + c_b).

#include <cstddef>
#include <string>
#include <vector>

#include "hsurvey/stats_core.hpp"

namespace hsurvey {

struct PlanningInputs {
  PopulationModel population;
  AnnotatorProfile primary{AnnotatorRole::Primary};
  AnnotatorProfile auxiliary{AnnotatorRole::Auxiliary};
  CostModel costs;
  PrecisionTarget target{0.05, 0.05};

  /// Builds consistent inputs: annotator unit costs are taken from `costs`.
  static PlanningInputs make(double sigma_p, double sigma_a, double sigma_b, const CostModel& costs,
                             const PrecisionTarget& target);

  double k() const { return costs.k(); }
  double k_prime() const { return costs.k_prime(); }

  double sp2() const { return population.variance(); }
  double sa2() const { return primary.variance(); }
  double sb2() const { return auxiliary.variance(); }

  void validate() const;
  std::vector<std::string> warnings() const;
};

/// How real-valued sample sizes become integers in optimal_offset_plan.
struct RoundingPolicy {
  /// After half-up rounding of n_b and n_a, keep adding primary samples
  /// until the predicted variance meets the target exactly. Off by default:
  /// half-up rounding of n_a can leave the variance a fraction of a sample
  /// above the budget (the achieved half-width is reported on the plan).
  bool strict_precision = false;
};

/// Real-valued Conventional sample size (zeta^2 / d^2)(sp2 + sa2).
double conventional_sample_size_raw(const PlanningInputs& inputs);
/// Smallest integer meeting the target, at least 1.
std::size_t conventional_sample_size(const PlanningInputs& inputs);

/// (sp2 + sa2) / n_a
double conventional_variance(std::size_t n_a, const PlanningInputs& inputs);

/// (sp2 - sb2) / n_b + (sa2 + sb2) / n_a. The first term is negative when
/// the auxiliary annotator is noisier than the population.
double offset_variance(std::size_t n_a, std::size_t n_b, const PlanningInputs& inputs);
/// Same formula over real-valued sizes.
double offset_variance(double n_a, double n_b, const PlanningInputs& inputs);

/// n_a on the iso-precision curve for a given n_b:
/// (sb2 + sa2) / (V - (sp2 - sb2) / n_b). Throws if the denominator is not
/// positive (n_b too small to ever meet the target).
double tradeoff_n_a(double n_b, const PlanningInputs& inputs);

/// Hybrid-Offset cost along the iso-precision curve, as a function of n_b.
double offset_cost_curve(double n_b, const PlanningInputs& inputs);

/// Total sampling cost of a plan.
double tsc(const SamplingPlan& plan, const CostModel& costs);

/// Real-valued cost-optimal n_b: max of the stationary point of the cost
/// curve and the Conventional size. Requires sb2 < sp2.
double optimal_offset_n_b_raw(const PlanningInputs& inputs);

/// Cost-minimising Hybrid-Offset plan meeting the precision target.
/// Falls back to the Conventional plan when the auxiliary annotator is at
/// least as noisy as the population; when the optimum sits on the boundary
/// n_b = n_a*, returns a HybridOffset plan with n_a = n_b = n_a*.
SamplingPlan optimal_offset_plan(const PlanningInputs& inputs, RoundingPolicy policy = {});

/// Conventional plan meeting the precision target.
SamplingPlan conventional_plan(const PlanningInputs& inputs);

/// sigma_delta = (sa2 + sb2) / (sp2 - sb2); Hybrid-Offset is cheaper than
/// Conventional exactly when k exceeds it (for c_b = 0).
double tsc_threshold(const PlanningInputs& inputs);

/// Real-valued variance-minimising n_b under the budget identity
/// b = c_a n_a + (c_b + c_c) n_b.
double budget_n_b_raw(double budget, const PlanningInputs& inputs);

/// Hybrid-Offset plan with the smallest variance affordable within `budget`
/// (floor rounding, so tsc <= budget). Throws ErrorKind::Infeasible when the
/// budget cannot buy one paired sample or sb2 >= sp2.
SamplingPlan plan_from_budget(double budget, const PlanningInputs& inputs);

/// Conventional and Hybrid-Offset plans (plus `extra` plans, e.g. the
/// auxiliary-only design) sorted by TSC; ties go to the lower variance, then
/// to fewer total samples.
std::vector<SamplingPlan> compare_designs(const PlanningInputs& inputs,
                                          const std::vector<SamplingPlan>& extra = {},
                                          RoundingPolicy policy = {});

/// Half-up rounding used for sample sizes (x.5 rounds up).
std::size_t round_half_up(double x);
/// Ceiling that ignores floating noise just above an integer.
std::size_t ceil_tolerant(double x);

}  // namespace hsurvey
