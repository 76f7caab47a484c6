#pragma once

// Replicated Monte Carlo harness.
//
// Every replicate draws from its own stream, seeded from (seed, cell,
// replicate), and writes its result into a slot indexed by replicate. Results
// are aggregated in index order afterwards, so a run is bit-identical for any
// number of worker threads.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <variant>
#include <vector>

#include "hsurvey/bias_correction.hpp"
#include "hsurvey/design_planner.hpp"
#include "hsurvey/random.hpp"
#include "hsurvey/stats_core.hpp"

namespace hsurvey {

// Synthetic data --------------------------------------------------------

enum class PopulationShape { BetaShaped, Bernoulli, TruncatedGaussian };

/// n i.i.d. values in [0, 1] with mean model.mu_p (required) and standard
/// deviation model.sigma_p. Bernoulli ignores sigma_p (its variance is
/// mu(1 - mu)). Throws when the moments are not attainable by the shape.
std::vector<double> generate_population(const PopulationModel& model, std::size_t n, PopulationShape shape,
                                        std::uint64_t seed);

/// f = y + bias + sigma * (rho * z(y) + sqrt(1 - rho^2) * noise), where z(y)
/// standardises y so that corr(f - y, y) = rho.
struct AdditiveNoise {
  double bias = 0.0;
  double sigma = 0.0;
};

/// Binary labels flipped per the confusion matrix: Ber(alpha) when y = 1,
/// Ber(1 - beta) when y = 0.
struct ConfusionBernoulli {
  ConfusionMatrix cm;
};

struct SyntheticAnnotatorSpec {
  std::variant<AdditiveNoise, ConfusionBernoulli> kind = AdditiveNoise{};
  double correlation = 0.0;  ///< target corr(error, y) for AdditiveNoise, in [-1, 1]
  /// Moments used to standardise y. Sample moments of the input when unset.
  std::optional<PopulationModel> reference;
  /// Annotations live in [0, 1]; additive outputs are clamped to it.
  bool clamp_to_unit = true;
};

std::vector<double> apply_annotator(std::span<const double> values, const SyntheticAnnotatorSpec& spec,
                                    std::uint64_t seed);

/// A fully primary-annotated pool: y from `shape`, primary = y + primary
/// noise, aux from `aux`.
PairedSampleSet make_synthetic_pool(const PopulationModel& population, PopulationShape shape, std::size_t n,
                                    const SyntheticAnnotatorSpec& primary, const SyntheticAnnotatorSpec& aux,
                                    std::uint64_t seed);

// Metrics ---------------------------------------------------------------

struct Metrics {
  double bias = 0.0;  ///< mean(estimate) - truth
  double mae = 0.0;   ///< mean |estimate - truth|
  double mse = 0.0;   ///< mean (estimate - truth)^2
  double se = 0.0;    ///< sample SD of the estimates / sqrt(count)
  double sd = 0.0;    ///< sample SD of the estimates
};

Metrics metrics(std::span<const double> estimates, double truth);

// Replicate runner ------------------------------------------------------

/// Calls body(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any call is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = n * t / threads;
    const std::size_t end = n * (t + 1) / threads;
    workers.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

/// Runs `replicates` independent replicates of body(Rng&, index) -> double.
/// Replicate i draws from Rng(stream_seed(seed, {cell, i})).
template <class Body>
std::vector<double> run_replicates(std::size_t replicates, std::uint64_t seed, std::uint64_t cell,
                                   std::size_t threads, Body&& body) {
  std::vector<double> out(replicates);
  parallel_for(replicates, threads, [&](std::size_t i) {
    Rng rng(stream_seed(seed, {cell, static_cast<std::uint64_t>(i)}));
    out[i] = body(rng, i);
  });
  return out;
}

// Pool bootstrap ----------------------------------------------------------

/// Annotator variances used to size the hybrid designs.
struct PlanningSigmas {
  double sigma_p = 0.0;
  double sigma_a = 0.0;
  double sigma_b = 0.0;
};

struct PoolBootstrapConfig {
  std::vector<Design> designs = {Design::Conventional, Design::HybridOffset, Design::HybridRatio,
                                 Design::Auxiliary};
  std::vector<double> budgets;  ///< total sampling cost per run, in cost units
  CostModel costs;
  std::size_t replicates = 500;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Sizing sigmas for the hybrid designs; estimated from the pool if unset
  /// (sigma_p from the primary values, sigma_b from aux - primary).
  std::optional<PlanningSigmas> planning;
  /// Known confusion matrix; required by AuxiliaryBiasCorrected.
  std::optional<ConfusionMatrix> confusion;
};

struct SimulationCell {
  Design design = Design::Conventional;
  double budget = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  bool feasible = false;
  std::size_t replicates = 0;  ///< replicates that produced an estimate
  std::size_t dropped = 0;     ///< replicates discarded as degenerate
  Metrics metrics;
};

struct SimulationReport {
  std::vector<SimulationCell> cells;

  const SimulationCell* find(Design design, double budget) const;
};

/// Sample sizes a design can afford at `budget`: Conventional n_a =
/// b / (c_a + c_c); hybrids from the budget-optimal offset allocation;
/// auxiliary-only n_b = b / (c_b + c_c). Throws ErrorKind::Infeasible.
std::pair<std::size_t, std::size_t> sizes_for_budget(Design design, double budget, const CostModel& costs,
                                                     const PlanningSigmas& sigmas);

/// Bootstrap evaluation of each design on a fully primary-annotated pool.
/// Ground truth is the mean of the pool's primary values; resampling is with
/// replacement. Infeasible (design, budget) cells are reported, not thrown.
SimulationReport run_pool_bootstrap(const PairedSampleSet& pool, const PoolBootstrapConfig& config);

// Bernoulli comparison ----------------------------------------------------

struct BernoulliComparisonConfig {
  std::vector<double> alphas = {0.6, 0.8, 0.95};
  std::vector<double> betas = {0.6, 0.8, 0.95};
  std::vector<double> mus = {0.5, 0.75, 0.9};
  std::vector<std::size_t> n_as = {100, 150, 200, 250, 300, 350, 400, 450, 500};
  std::size_t n_b = 1000;
  std::size_t replicates = 2000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct BernoulliCell {
  double alpha = 0.0;
  double beta = 0.0;
  double mu_p = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::size_t replicates = 0;  ///< kept replicates
  std::size_t dropped = 0;     ///< replicates with a singular estimated matrix
  Metrics offset;
  Metrics bias_corrected;

  /// SD(Hybrid-Offset) - SD(Hybrid-Bias-Corrected); negative favours offset.
  double sd_difference() const { return offset.sd - bias_corrected.sd; }
};

struct BernoulliComparisonReport {
  std::vector<BernoulliCell> cells;
};

/// Hybrid-Offset vs Hybrid-Bias-Corrected on binary data. Per replicate:
/// n_a primary labels ~ Ber(mu) with paired aux labels, alpha/beta/offset
/// estimated on the pairs, n_b - n_a further aux labels, both estimates
/// computed. Replicates whose estimated matrix is singular are dropped from
/// both estimators and counted.
BernoulliComparisonReport run_bernoulli_comparison(const BernoulliComparisonConfig& config);

}  // namespace hsurvey
