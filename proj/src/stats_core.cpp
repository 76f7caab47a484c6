#include "hsurvey/stats_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hsurvey/error.hpp"
#include "hsurvey/normal.hpp"

namespace hsurvey {

namespace {

bool in_unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

void require_nonnegative(double v, const char* field) {
  if (!std::isfinite(v) || v < 0.0) {
    std::ostringstream msg;
    msg << field << " must be a finite nonnegative number (got " << v << ")";
    fail(msg.str());
  }
}

}  // namespace

void PopulationModel::validate() const {
  require_nonnegative(sigma_p, "sigma_p");
  if (mu_p) {
    if (!in_unit_interval(*mu_p)) fail("mu_p must lie in [0, 1]");
    // Bernoulli(mu_p) is the variance maximiser on [0, 1].
    const double max_var = *mu_p * (1.0 - *mu_p);
    if (variance() > max_var + 1e-12) {
      std::ostringstream msg;
      msg << "sigma_p^2 = " << variance() << " exceeds mu_p(1 - mu_p) = " << max_var;
      fail(msg.str());
    }
  }
}

void AnnotatorProfile::validate() const {
  require_nonnegative(sigma, "annotator sigma");
  require_nonnegative(cost_per_sample, "annotator cost_per_sample");
  if (!std::isfinite(bias)) fail("annotator bias must be finite");
  if (role == AnnotatorRole::Primary && bias != 0.0) {
    fail("the primary annotator must be unbiased (bias = 0)");
  }
}

void CostModel::validate() const {
  require_nonnegative(c_c, "cost-collect");
  require_nonnegative(c_a, "cost-primary");
  require_nonnegative(c_b, "cost-aux");
  if (c_c + c_b <= 0.0) fail("cost-collect + cost-aux must be positive");
}

std::vector<std::string> CostModel::warnings() const {
  std::vector<std::string> out;
  if (!(c_a > c_b)) {
    out.emplace_back("primary annotation is not more expensive than auxiliary annotation (c_a <= c_b)");
  }
  return out;
}

PrecisionTarget::PrecisionTarget(double d, double delta) : d_(d), delta_(delta) {
  if (!std::isfinite(d) || d <= 0.0) fail("target half-width d must be positive");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
  zeta_ = normal::two_sided_critical(delta);
}

double PrecisionTarget::half_width(double variance) const {
  return zeta_ * std::sqrt(std::max(variance, 0.0));
}

PairedSampleSet::PairedSampleSet(std::vector<double> aux, std::vector<double> primary)
    : aux_(std::move(aux)), primary_(std::move(primary)) {
  if (primary_.size() > aux_.size()) {
    fail("paired subset larger than the sample set (n_a > n_b)");
  }
  for (std::size_t i = 0; i < aux_.size(); ++i) {
    if (!in_unit_interval(aux_[i])) {
      std::ostringstream msg;
      msg << "aux value at index " << i << " outside [0, 1]: " << aux_[i];
      fail(msg.str());
    }
  }
  for (std::size_t i = 0; i < primary_.size(); ++i) {
    if (!in_unit_interval(primary_[i])) {
      std::ostringstream msg;
      msg << "primary value at index " << i << " outside [0, 1]: " << primary_[i];
      fail(msg.str());
    }
  }
}

std::string_view to_string(Design design) {
  switch (design) {
    case Design::Conventional: return "Conventional";
    case Design::HybridOffset: return "HybridOffset";
    case Design::HybridRatio: return "HybridRatio";
    case Design::Auxiliary: return "Auxiliary";
    case Design::AuxiliaryBiasCorrected: return "AuxiliaryBiasCorrected";
    case Design::HybridBiasCorrected: return "HybridBiasCorrected";
  }
  return "Unknown";
}

Design parse_design(std::string_view name) {
  struct Alias {
    std::string_view name;
    Design design;
  };
  static constexpr Alias kAliases[] = {
      {"Conventional", Design::Conventional},
      {"conventional", Design::Conventional},
      {"HybridOffset", Design::HybridOffset},
      {"offset", Design::HybridOffset},
      {"HybridRatio", Design::HybridRatio},
      {"ratio", Design::HybridRatio},
      {"Auxiliary", Design::Auxiliary},
      {"aux", Design::Auxiliary},
      {"AuxiliaryBiasCorrected", Design::AuxiliaryBiasCorrected},
      {"aux-bc", Design::AuxiliaryBiasCorrected},
      {"HybridBiasCorrected", Design::HybridBiasCorrected},
      {"hybrid-bc", Design::HybridBiasCorrected},
  };
  for (const auto& alias : kAliases) {
    if (alias.name == name) return alias.design;
  }
  fail("unknown design '" + std::string(name) + "'");
}

void SamplingPlan::validate() const {
  switch (design) {
    case Design::Conventional:
      if (n_b != 0) fail("Conventional plan must have n_b = 0");
      if (n_a < 1) fail("Conventional plan needs at least one sample");
      break;
    case Design::Auxiliary:
    case Design::AuxiliaryBiasCorrected:
      if (n_a != 0) fail("auxiliary-only plan must have n_a = 0");
      if (n_b < 1) fail("auxiliary-only plan needs at least one sample");
      break;
    case Design::HybridOffset:
    case Design::HybridRatio:
    case Design::HybridBiasCorrected:
      if (n_a < 1 || n_b < n_a) fail("hybrid plan requires n_b >= n_a >= 1");
      break;
  }
  if (!(predicted_variance >= 0.0) || !(tsc >= 0.0)) {
    fail("plan variance and cost must be nonnegative");
  }
}

double total_sampling_cost(std::size_t n_a, std::size_t n_b, const CostModel& costs) {
  const auto a = static_cast<double>(n_a);
  const auto b = static_cast<double>(n_b);
  return costs.c_a * a + costs.c_b * b + std::max(a, b) * costs.c_c;
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 16;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<const double> values) {
  if (values.empty()) fail("no samples");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  std::vector<double> sq(values.size());
  std::transform(values.begin(), values.end(), sq.begin(),
                 [m](double v) { return (v - m) * (v - m); });
  return pairwise_sum(sq) / static_cast<double>(values.size() - 1);
}

double conventional_mean(std::span<const double> primary_values) {
  if (primary_values.empty()) fail("no samples");
  return mean(primary_values);
}

double offset_mean(const PairedSampleSet& samples) {
  if (samples.n_a() == 0) fail("offset estimator requires paired samples");
  const auto primary = samples.primary_values();
  const auto paired = samples.paired_aux();
  // Mean of the per-sample differences f_b - f_a over the paired prefix.
  std::vector<double> diff(primary.size());
  for (std::size_t i = 0; i < primary.size(); ++i) diff[i] = paired[i] - primary[i];
  const double bias_hat = mean(diff);
  return mean(samples.aux_values()) - bias_hat;
}

double ratio_mean(const PairedSampleSet& samples) {
  if (samples.n_a() == 0) fail("ratio estimator requires paired samples");
  const double num = pairwise_sum(samples.primary_values());
  const double den = pairwise_sum(samples.paired_aux());
  const double r = (num == 0.0 || den == 0.0) ? 1.0 : num / den;
  return r * mean(samples.aux_values());
}

double auxiliary_mean(std::span<const double> aux_values) {
  if (aux_values.empty()) fail("no samples");
  return mean(aux_values);
}

double aggregate_points(std::span<const int> point_labels) {
  if (point_labels.empty()) fail("no point labels");
  std::size_t ones = 0;
  for (std::size_t i = 0; i < point_labels.size(); ++i) {
    const int v = point_labels[i];
    if (v != 0 && v != 1) {
      fail("point label at index " + std::to_string(i) + " is not binary");
    }
    ones += static_cast<std::size_t>(v);
  }
  return static_cast<double>(ones) / static_cast<double>(point_labels.size());
}

}  // namespace hsurvey
