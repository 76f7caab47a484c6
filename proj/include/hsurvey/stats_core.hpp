#pragma once

// Domain types shared by every module, and the point estimators that operate
// on concrete annotation data.
//
// Annotations live in [0, 1]. Estimates are never clamped: the offset and
// bias-corrected estimators are unbiased only if their raw value is kept, so
// an estimate slightly below 0 or above 1 is a legitimate result.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsurvey {

/// First and second moments of the sampled values y_i.
struct PopulationModel {
  std::optional<double> mu_p;  ///< population mean, when known
  double sigma_p = 0.0;        ///< population standard deviation

  double variance() const { return sigma_p * sigma_p; }

  /// Throws on sigma_p < 0, mu_p outside [0, 1], or (when mu_p is known)
  /// a variance larger than mu_p (1 - mu_p), the maximum on [0, 1].
  void validate() const;
};

enum class AnnotatorRole { Primary, Auxiliary };

/// Error moments and unit cost of a single annotator.
struct AnnotatorProfile {
  AnnotatorRole role = AnnotatorRole::Auxiliary;
  double bias = 0.0;   ///< mean annotation error
  double sigma = 0.0;  ///< standard deviation of the annotation error
  double cost_per_sample = 0.0;

  double variance() const { return sigma * sigma; }

  /// A primary annotator must be unbiased.
  void validate() const;
};

/// Per-sample costs of collection (c_c), primary annotation (c_a) and
/// auxiliary annotation (c_b), in arbitrary but consistent cost units.
struct CostModel {
  double c_c = 0.0;
  double c_a = 0.0;
  double c_b = 0.0;

  /// Relative cost of primary annotation, c_a / (c_c + c_b).
  double k() const { return c_a / (c_c + c_b); }
  /// (c_c + c_a) / (c_c + c_b), the auxiliary-only comparison ratio.
  double k_prime() const { return (c_c + c_a) / (c_c + c_b); }

  void validate() const;
  /// Soft problems that do not invalidate the model (e.g. c_a <= c_b).
  std::vector<std::string> warnings() const;
};

/// Target half-width d at confidence 1 - delta, and the matching critical
/// value zeta (upper 1 - delta/2 normal quantile).
class PrecisionTarget {
 public:
  PrecisionTarget(double d, double delta);

  double d() const { return d_; }
  double delta() const { return delta_; }
  double zeta() const { return zeta_; }

  /// Largest estimator variance that meets the target: d^2 / zeta^2.
  double variance_budget() const { return (d_ * d_) / (zeta_ * zeta_); }
  /// Half-width achieved by an estimator with the given variance.
  double half_width(double variance) const;

 private:
  double d_;
  double delta_;
  double zeta_;
};

/// Samples annotated by the auxiliary annotator, of which a prefix of n_a
/// is also annotated by the primary annotator. Callers shuffle before
/// construction if the paired subset must be random.
class PairedSampleSet {
 public:
  PairedSampleSet() = default;
  /// `primary` annotates the first primary.size() entries of `aux`.
  PairedSampleSet(std::vector<double> aux, std::vector<double> primary);

  std::size_t n_a() const { return primary_.size(); }
  std::size_t n_b() const { return aux_.size(); }

  std::span<const double> aux_values() const { return aux_; }
  std::span<const double> primary_values() const { return primary_; }
  /// Aux values of the paired prefix.
  std::span<const double> paired_aux() const { return {aux_.data(), primary_.size()}; }

 private:
  std::vector<double> aux_;
  std::vector<double> primary_;
};

enum class Design {
  Conventional,
  HybridOffset,
  HybridRatio,
  Auxiliary,
  AuxiliaryBiasCorrected,
  HybridBiasCorrected,
};

std::string_view to_string(Design design);
/// Accepts the canonical names ("HybridOffset") and the short CLI forms
/// ("offset", "ratio", "aux", "aux-bc", "hybrid-bc", "conventional").
Design parse_design(std::string_view name);

/// Sample sizes chosen under a design, with their predicted variance and
/// total sampling cost.
struct SamplingPlan {
  Design design = Design::Conventional;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double predicted_variance = 0.0;
  double tsc = 0.0;

  /// Shape constraints of the design (Conventional has no aux samples, etc).
  void validate() const;
};

/// Total sampling cost: c_a n_a + c_b n_b + max(n_a, n_b) c_c.
double total_sampling_cost(std::size_t n_a, std::size_t n_b, const CostModel& costs);

// Estimators ------------------------------------------------------------

double conventional_mean(std::span<const double> primary_values);

/// Aux mean minus the bias estimated on the paired prefix.
double offset_mean(const PairedSampleSet& samples);

/// Aux mean scaled by r = sum(primary) / sum(paired aux); r = 1 when either
/// sum is zero.
double ratio_mean(const PairedSampleSet& samples);

double auxiliary_mean(std::span<const double> aux_values);

/// Fraction of positive point labels; labels must be 0 or 1.
double aggregate_points(std::span<const int> point_labels);

// Small descriptive helpers -------------------------------------------

double mean(std::span<const double> values);
/// Unbiased (n - 1) sample variance; zero for fewer than two values.
double sample_variance(std::span<const double> values);

/// Pairwise summation. Result depends only on the values and their order.
double pairwise_sum(std::span<const double> values);

}  // namespace hsurvey
