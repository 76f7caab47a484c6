#pragma once

// Confusion-matrix abundance correction for binary annotations, the
// auxiliary-only design built on it, and two-stage (point sampled) variance.
//
// Everything here assumes the auxiliary annotator's confusion matrix is known
// and valid for the data being sampled. Functions that only make sense on a
// binary value space take a BinaryAssumption argument so that callers state
// this explicitly.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "hsurvey/design_planner.hpp"
#include "hsurvey/stats_core.hpp"

namespace hsurvey {

/// Sensitivity (alpha) and specificity (beta) of a binary classifier.
struct ConfusionMatrix {
  double alpha = 1.0;
  double beta = 1.0;

  /// alpha + beta - 1, the determinant of the 2x2 confusion matrix.
  double determinant() const { return alpha + beta - 1.0; }

  /// alpha, beta in [0, 1].
  void validate() const;
  /// Throws unless the matrix can be inverted (determinant > 0).
  void require_invertible() const;
};

/// Acknowledges that values are binary (or point-aggregated binary labels)
/// and that the confusion matrix transfers to the sampled population.
enum class BinaryAssumption { Acknowledged };

struct TwoStageConfig {
  std::size_t s = 1;  ///< point labels per first-stage sample
  ConfusionMatrix confusion;
};

/// Estimated matrices closer than this to singular are refused.
inline constexpr double kMinEstimatedDeterminant = 1e-6;

/// (value + beta - 1) / (alpha + beta - 1); not clamped.
double abundance_correct(double value, const ConfusionMatrix& cm);

double bias_corrected_mean(std::span<const double> aux_values, const ConfusionMatrix& cm);

/// Variance added by the correction:
/// (mu alpha(1-alpha) + (1-mu)(1-beta)beta) / (alpha+beta-1)^2.
double sigma_s_squared(double mu_p, const ConfusionMatrix& cm);

/// sigma_s^2 for the planning population. mu_p comes from
/// inputs.population; it may be omitted only for balanced matrices
/// (alpha == beta), where sigma_s^2 does not depend on it.
double planning_sigma_s_squared(const PlanningInputs& inputs, const ConfusionMatrix& cm);

/// Real-valued auxiliary-only size (zeta^2/d^2)(sigma_s^2 + sigma_p^2).
double auxiliary_sample_size_raw(const PlanningInputs& inputs, const ConfusionMatrix& cm);
/// Rounded half-up, at least 1.
std::size_t auxiliary_sample_size(const PlanningInputs& inputs, const ConfusionMatrix& cm,
                                  BinaryAssumption);

/// Auxiliary Bias-Corrected plan (n_a = 0) sized by auxiliary_sample_size.
SamplingPlan auxiliary_plan(const PlanningInputs& inputs, const ConfusionMatrix& cm,
                            BinaryAssumption assumption);

/// (sp2 + sigma_s^2) / (sp2 + sa2): the auxiliary-only design is cheaper
/// than Conventional exactly when k' exceeds this.
double auxiliary_tsc_threshold(const PlanningInputs& inputs, const ConfusionMatrix& cm);

/// (1/n_b) ((1/s)[sigma_s^2 + mu(1-mu) - sigma_p^2] + sigma_p^2), for sample
/// covers y with mean mu and SD sigma_p and s points drawn Ber(y) per sample.
double two_stage_variance(double mu_p, double sigma_p, const TwoStageConfig& cfg, std::size_t n_b);

double two_stage_sample_size_raw(double mu_p, double sigma_p, const TwoStageConfig& cfg,
                                 const PrecisionTarget& target);
/// Rounded half-up, at least 1.
std::size_t two_stage_sample_size(double mu_p, double sigma_p, const TwoStageConfig& cfg,
                                  const PrecisionTarget& target, BinaryAssumption);

/// A (primary, aux) pair of binary labels.
struct LabelPair {
  int primary = 0;
  int aux = 0;
};

/// alpha = P(aux = 1 | primary = 1), beta = P(aux = 0 | primary = 0).
ConfusionMatrix estimate_confusion(std::span<const LabelPair> paired);

/// Primary values on the paired prefix plus corrected aux values on the
/// remainder, averaged over n_b. Biased when `cm_hat` is estimated.
double hybrid_bias_corrected_mean(const PairedSampleSet& samples, const ConfusionMatrix& cm_hat,
                                  BinaryAssumption);

/// Label pairs of the paired prefix of a binary sample set.
std::vector<LabelPair> paired_labels(const PairedSampleSet& samples);

}  // namespace hsurvey
