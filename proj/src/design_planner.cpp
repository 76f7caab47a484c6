#include "hsurvey/design_planner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hsurvey/error.hpp"

namespace hsurvey {

PlanningInputs PlanningInputs::make(double sigma_p, double sigma_a, double sigma_b,
                                    const CostModel& costs, const PrecisionTarget& target) {
  PlanningInputs in;
  in.population.sigma_p = sigma_p;
  in.primary = {AnnotatorRole::Primary, 0.0, sigma_a, costs.c_a};
  in.auxiliary = {AnnotatorRole::Auxiliary, 0.0, sigma_b, costs.c_b};
  in.costs = costs;
  in.target = target;
  in.validate();
  return in;
}

void PlanningInputs::validate() const {
  population.validate();
  primary.validate();
  auxiliary.validate();
  costs.validate();
  if (primary.role != AnnotatorRole::Primary) fail("primary profile must have the Primary role");
  if (primary.cost_per_sample != costs.c_a || auxiliary.cost_per_sample != costs.c_b) {
    fail("annotator unit costs disagree with the cost model");
  }
}

std::vector<std::string> PlanningInputs::warnings() const {
  auto out = costs.warnings();
  if (!(sa2() < sb2()) && sb2() > 0.0) {
    out.emplace_back("primary annotator is not more accurate than the auxiliary (sigma_a >= sigma_b)");
  }
  return out;
}

std::size_t round_half_up(double x) {
  if (!(x >= 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

std::size_t ceil_tolerant(double x) {
  if (!(x >= 0.0)) return 0;
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(x));
}

double conventional_sample_size_raw(const PlanningInputs& inputs) {
  const double z = inputs.target.zeta();
  const double d = inputs.target.d();
  return (z * z) / (d * d) * (inputs.sp2() + inputs.sa2());
}

std::size_t conventional_sample_size(const PlanningInputs& inputs) {
  inputs.validate();
  return std::max<std::size_t>(1, ceil_tolerant(conventional_sample_size_raw(inputs)));
}

double conventional_variance(std::size_t n_a, const PlanningInputs& inputs) {
  if (n_a < 1) fail("conventional variance needs n_a >= 1");
  return (inputs.sp2() + inputs.sa2()) / static_cast<double>(n_a);
}

double offset_variance(double n_a, double n_b, const PlanningInputs& inputs) {
  if (!(n_a > 0.0)) fail("offset variance needs n_a > 0");
  if (n_b < n_a) fail("hybrid requires n_b >= n_a");
  return (inputs.sp2() - inputs.sb2()) / n_b + (inputs.sa2() + inputs.sb2()) / n_a;
}

double offset_variance(std::size_t n_a, std::size_t n_b, const PlanningInputs& inputs) {
  if (n_a < 1) fail("offset variance needs n_a >= 1");
  return offset_variance(static_cast<double>(n_a), static_cast<double>(n_b), inputs);
}

double tradeoff_n_a(double n_b, const PlanningInputs& inputs) {
  if (!(n_b > 0.0)) fail("n_b must be positive");
  const double denom = inputs.target.variance_budget() - (inputs.sp2() - inputs.sb2()) / n_b;
  if (!(denom > 0.0)) fail("n_b too small for target precision");
  return (inputs.sb2() + inputs.sa2()) / denom;
}

double offset_cost_curve(double n_b, const PlanningInputs& inputs) {
  const double c = inputs.costs.c_c + inputs.costs.c_b;
  return c * (n_b + inputs.k() * tradeoff_n_a(n_b, inputs));
}

double tsc(const SamplingPlan& plan, const CostModel& costs) {
  return total_sampling_cost(plan.n_a, plan.n_b, costs);
}

double optimal_offset_n_b_raw(const PlanningInputs& inputs) {
  const double gap = inputs.sp2() - inputs.sb2();
  if (!(gap > 0.0)) fail("optimal n_b requires sigma_b < sigma_p");
  const double z = inputs.target.zeta();
  const double d = inputs.target.d();
  const double stationary =
      (z * z) / (d * d) * (gap + std::sqrt(inputs.k() * (inputs.sb2() + inputs.sa2()) * gap));
  return std::max(stationary, conventional_sample_size_raw(inputs));
}

SamplingPlan conventional_plan(const PlanningInputs& inputs) {
  SamplingPlan plan;
  plan.design = Design::Conventional;
  plan.n_a = conventional_sample_size(inputs);
  plan.n_b = 0;
  plan.predicted_variance = conventional_variance(plan.n_a, inputs);
  plan.tsc = tsc(plan, inputs.costs);
  return plan;
}

namespace {

SamplingPlan hybrid_plan(std::size_t n_a, std::size_t n_b, const PlanningInputs& inputs) {
  SamplingPlan plan;
  plan.design = Design::HybridOffset;
  plan.n_a = n_a;
  plan.n_b = n_b;
  plan.predicted_variance = offset_variance(n_a, n_b, inputs);
  plan.tsc = tsc(plan, inputs.costs);
  return plan;
}

// Optimum on the n_b = n_a* boundary: both annotators label every sample.
SamplingPlan boundary_plan(const PlanningInputs& inputs) {
  const std::size_t n = conventional_sample_size(inputs);
  return hybrid_plan(n, n, inputs);
}

}  // namespace

SamplingPlan optimal_offset_plan(const PlanningInputs& inputs, RoundingPolicy policy) {
  inputs.validate();
  if (!(inputs.sb2() < inputs.sp2())) return conventional_plan(inputs);

  const double n_star = conventional_sample_size_raw(inputs);
  const double n_b_raw = optimal_offset_n_b_raw(inputs);
  const double noise = inputs.sa2() + inputs.sb2();

  if (noise == 0.0) {
    // Error-free annotators: a single paired sample pins the offset exactly.
    const std::size_t n_b = std::max<std::size_t>(1, ceil_tolerant(n_star));
    return hybrid_plan(1, n_b, inputs);
  }
  if (!(n_b_raw > n_star)) return boundary_plan(inputs);

  const std::size_t n_b = std::max<std::size_t>(1, round_half_up(n_b_raw));
  const double denom = inputs.target.variance_budget() - (inputs.sp2() - inputs.sb2()) / static_cast<double>(n_b);
  if (!(denom > 0.0)) return boundary_plan(inputs);

  std::size_t n_a = std::max<std::size_t>(1, round_half_up(noise / denom));
  if (n_a > n_b) return boundary_plan(inputs);

  if (policy.strict_precision) {
    const double budget = inputs.target.variance_budget();
    while (n_a < n_b && offset_variance(n_a, n_b, inputs) > budget * (1.0 + 1e-12)) ++n_a;
  }
  return hybrid_plan(n_a, n_b, inputs);
}

double tsc_threshold(const PlanningInputs& inputs) {
  const double gap = inputs.sp2() - inputs.sb2();
  if (!(gap > 0.0)) fail("threshold undefined: sigma_b >= sigma_p");
  return (inputs.sa2() + inputs.sb2()) / gap;
}

double budget_n_b_raw(double budget, const PlanningInputs& inputs) {
  if (!(budget > 0.0) || !std::isfinite(budget)) fail("budget must be positive");
  const double sigma_delta = tsc_threshold(inputs);
  const double c = inputs.costs.c_b + inputs.costs.c_c;
  // Closed form of the Lagrangian optimum. The textbook expression
  // b q / (q^2 - c^2) - b c / (q^2 - c^2) with q = sqrt(c_a c sigma_delta)
  // reduces to b / (c + q); its apparent pole at q = c is removable.
  const double q = std::sqrt(inputs.costs.c_a * c * sigma_delta);
  return budget / (c + q);
}

SamplingPlan plan_from_budget(double budget, const PlanningInputs& inputs) {
  inputs.validate();
  if (!(budget > 0.0) || !std::isfinite(budget)) fail("budget must be positive");
  if (!(inputs.sb2() < inputs.sp2())) {
    fail_infeasible("infeasible budget: Hybrid-Offset cannot beat Conventional when sigma_b >= sigma_p");
  }
  const double c = inputs.costs.c_b + inputs.costs.c_c;
  const double c_a = inputs.costs.c_a;

  auto n_b = static_cast<std::size_t>(std::floor(budget_n_b_raw(budget, inputs)));
  std::size_t n_a = 0;
  if (c_a == 0.0) {
    n_a = n_b;
  } else {
    const double left = budget - static_cast<double>(n_b) * c;
    n_a = left > 0.0 ? static_cast<std::size_t>(std::floor(left / c_a)) : 0;
  }
  if (n_a > n_b) {
    // The unconstrained optimum wants more primary than auxiliary samples;
    // the constrained optimum sits on n_a = n_b.
    n_a = n_b = static_cast<std::size_t>(std::floor(budget / (c_a + c)));
  }
  if (n_a < 1) {
    n_a = 1;
    const double left = budget - c_a;
    n_b = left > 0.0 ? static_cast<std::size_t>(std::floor(left / c)) : 0;
  }
  if (n_a < 1 || n_b < n_a) {
    std::ostringstream msg;
    msg << "infeasible budget: " << budget << " cannot buy one paired sample (cost "
        << (c_a + c) << ")";
    fail_infeasible(msg.str());
  }
  return hybrid_plan(n_a, n_b, inputs);
}

std::vector<SamplingPlan> compare_designs(const PlanningInputs& inputs,
                                          const std::vector<SamplingPlan>& extra,
                                          RoundingPolicy policy) {
  inputs.validate();
  std::vector<SamplingPlan> plans;
  plans.push_back(conventional_plan(inputs));
  if (inputs.sb2() < inputs.sp2()) plans.push_back(optimal_offset_plan(inputs, policy));
  plans.insert(plans.end(), extra.begin(), extra.end());

  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
  };
  std::stable_sort(plans.begin(), plans.end(), [&](const SamplingPlan& x, const SamplingPlan& y) {
    if (!close(x.tsc, y.tsc)) return x.tsc < y.tsc;
    if (!close(x.predicted_variance, y.predicted_variance)) {
      return x.predicted_variance < y.predicted_variance;
    }
    return x.n_a + x.n_b < y.n_a + y.n_b;
  });
  return plans;
}

}  // namespace hsurvey
