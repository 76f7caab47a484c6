#include "hsurvey/bias_correction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hsurvey/error.hpp"

namespace hsurvey {

void ConfusionMatrix::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!ok(alpha)) fail("sensitivity alpha must lie in [0, 1]");
  if (!ok(beta)) fail("specificity beta must lie in [0, 1]");
}

void ConfusionMatrix::require_invertible() const {
  validate();
  if (!(determinant() > 0.0)) {
    std::ostringstream msg;
    msg << "confusion matrix not invertible (alpha + beta = " << alpha + beta << " <= 1)";
    fail(msg.str());
  }
}

double abundance_correct(double value, const ConfusionMatrix& cm) {
  cm.require_invertible();
  return (value + cm.beta - 1.0) / cm.determinant();
}

double bias_corrected_mean(std::span<const double> aux_values, const ConfusionMatrix& cm) {
  cm.require_invertible();
  if (aux_values.empty()) fail("no samples");
  std::vector<double> corrected(aux_values.size());
  std::transform(aux_values.begin(), aux_values.end(), corrected.begin(),
                 [&](double v) { return (v + cm.beta - 1.0) / cm.determinant(); });
  return mean(corrected);
}

double sigma_s_squared(double mu_p, const ConfusionMatrix& cm) {
  cm.require_invertible();
  if (!(mu_p >= 0.0 && mu_p <= 1.0)) fail("mu_p must lie in [0, 1]");
  const double a = cm.alpha;
  const double b = cm.beta;
  const double det = cm.determinant();
  return (mu_p * a * (1.0 - a) + (1.0 - mu_p) * (1.0 - b) * b) / (det * det);
}

double planning_sigma_s_squared(const PlanningInputs& inputs, const ConfusionMatrix& cm) {
  if (inputs.population.mu_p) return sigma_s_squared(*inputs.population.mu_p, cm);
  if (cm.alpha != cm.beta) fail("mu_p is required for an unbalanced confusion matrix");
  return sigma_s_squared(0.5, cm);
}

double auxiliary_sample_size_raw(const PlanningInputs& inputs, const ConfusionMatrix& cm) {
  const double z = inputs.target.zeta();
  const double d = inputs.target.d();
  return (z * z) / (d * d) * (planning_sigma_s_squared(inputs, cm) + inputs.sp2());
}

std::size_t auxiliary_sample_size(const PlanningInputs& inputs, const ConfusionMatrix& cm,
                                  BinaryAssumption) {
  inputs.validate();
  return std::max<std::size_t>(1, round_half_up(auxiliary_sample_size_raw(inputs, cm)));
}

SamplingPlan auxiliary_plan(const PlanningInputs& inputs, const ConfusionMatrix& cm,
                            BinaryAssumption assumption) {
  SamplingPlan plan;
  plan.design = Design::AuxiliaryBiasCorrected;
  plan.n_a = 0;
  plan.n_b = auxiliary_sample_size(inputs, cm, assumption);
  plan.predicted_variance =
      (planning_sigma_s_squared(inputs, cm) + inputs.sp2()) / static_cast<double>(plan.n_b);
  plan.tsc = tsc(plan, inputs.costs);
  return plan;
}

double auxiliary_tsc_threshold(const PlanningInputs& inputs, const ConfusionMatrix& cm) {
  const double denom = inputs.sp2() + inputs.sa2();
  if (!(denom > 0.0)) fail("threshold undefined: sigma_p^2 + sigma_a^2 = 0");
  return (inputs.sp2() + planning_sigma_s_squared(inputs, cm)) / denom;
}

namespace {

double per_sample_two_stage_variance(double mu_p, double sigma_p, const TwoStageConfig& cfg) {
  if (cfg.s < 1) fail("two-stage sampling needs s >= 1 points per sample");
  if (!(sigma_p >= 0.0)) fail("sigma_p must be nonnegative");
  PopulationModel{mu_p, sigma_p}.validate();
  const double s = static_cast<double>(cfg.s);
  const double sp2 = sigma_p * sigma_p;
  // Within-sample point variance averages to E[y(1 - y)] = mu(1 - mu) - sp2.
  const double within = std::max(0.0, mu_p * (1.0 - mu_p) - sp2);
  return (sigma_s_squared(mu_p, cfg.confusion) + within) / s + sp2;
}

}  // namespace

double two_stage_variance(double mu_p, double sigma_p, const TwoStageConfig& cfg, std::size_t n_b) {
  if (n_b < 1) fail("n_b must be at least 1");
  return per_sample_two_stage_variance(mu_p, sigma_p, cfg) / static_cast<double>(n_b);
}

double two_stage_sample_size_raw(double mu_p, double sigma_p, const TwoStageConfig& cfg,
                                 const PrecisionTarget& target) {
  const double z = target.zeta();
  const double d = target.d();
  return (z * z) / (d * d) * per_sample_two_stage_variance(mu_p, sigma_p, cfg);
}

std::size_t two_stage_sample_size(double mu_p, double sigma_p, const TwoStageConfig& cfg,
                                  const PrecisionTarget& target, BinaryAssumption) {
  return std::max<std::size_t>(1, round_half_up(two_stage_sample_size_raw(mu_p, sigma_p, cfg, target)));
}

ConfusionMatrix estimate_confusion(std::span<const LabelPair> paired) {
  std::size_t pos = 0, true_pos = 0, neg = 0, true_neg = 0;
  for (std::size_t i = 0; i < paired.size(); ++i) {
    const auto& p = paired[i];
    if ((p.primary != 0 && p.primary != 1) || (p.aux != 0 && p.aux != 1)) {
      fail("label pair at index " + std::to_string(i) + " is not binary");
    }
    if (p.primary == 1) {
      ++pos;
      true_pos += static_cast<std::size_t>(p.aux);
    } else {
      ++neg;
      true_neg += static_cast<std::size_t>(1 - p.aux);
    }
  }
  if (pos == 0) fail("cannot estimate sensitivity: no primary-positive samples");
  if (neg == 0) fail("cannot estimate specificity: no primary-negative samples");
  return {static_cast<double>(true_pos) / static_cast<double>(pos),
          static_cast<double>(true_neg) / static_cast<double>(neg)};
}

std::vector<LabelPair> paired_labels(const PairedSampleSet& samples) {
  const auto primary = samples.primary_values();
  const auto aux = samples.paired_aux();
  std::vector<LabelPair> out(primary.size());
  for (std::size_t i = 0; i < primary.size(); ++i) {
    if ((primary[i] != 0.0 && primary[i] != 1.0) || (aux[i] != 0.0 && aux[i] != 1.0)) {
      fail("paired sample " + std::to_string(i) + " is not binary");
    }
    out[i] = {static_cast<int>(primary[i]), static_cast<int>(aux[i])};
  }
  return out;
}

double hybrid_bias_corrected_mean(const PairedSampleSet& samples, const ConfusionMatrix& cm_hat,
                                  BinaryAssumption) {
  cm_hat.validate();
  if (!(cm_hat.determinant() >= kMinEstimatedDeterminant)) {
    std::ostringstream msg;
    msg << "confusion matrix not invertible (alpha + beta - 1 = " << cm_hat.determinant() << ")";
    fail(msg.str());
  }
  if (samples.n_b() == 0) fail("no samples");
  const auto aux = samples.aux_values();
  std::vector<double> terms(samples.n_b());
  const auto primary = samples.primary_values();
  std::copy(primary.begin(), primary.end(), terms.begin());
  for (std::size_t i = samples.n_a(); i < samples.n_b(); ++i) {
    terms[i] = (aux[i] + cm_hat.beta - 1.0) / cm_hat.determinant();
  }
  return pairwise_sum(terms) / static_cast<double>(samples.n_b());
}

}  // namespace hsurvey
