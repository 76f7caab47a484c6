#include "hsurvey/sim_engine.hpp"

#include <cmath>
#include <sstream>

#include "hsurvey/error.hpp"
#include "hsurvey/normal.hpp"

namespace hsurvey {

namespace {

// Truncated normal on [0, 1] -----------------------------------------------

struct TruncatedNormal {
  double m = 0.0;  // location of the parent normal
  double s = 1.0;  // scale of the parent normal
};

// Probability mass of the parent normal inside [0, 1], computed on the tail
// that keeps precision.
double tn_mass(double a, double b) {
  if (a > 0.0) return normal::survival(a) - normal::survival(b);
  return normal::cdf(b) - normal::cdf(a);
}

std::pair<double, double> tn_moments(const TruncatedNormal& tn) {
  const double a = -tn.m / tn.s;
  const double b = (1.0 - tn.m) / tn.s;
  const double z = tn_mass(a, b);
  const double pa = normal::pdf(a);
  const double pb = normal::pdf(b);
  const double shift = (pa - pb) / z;
  const double mean = tn.m + tn.s * shift;
  const double var = tn.s * tn.s * (1.0 + (a * pa - b * pb) / z - shift * shift);
  return {mean, var};
}

// Parent location giving truncated mean `mu` at scale s, or NaN when no
// location within 35 scales of the interval reaches it (the tails underflow
// beyond that). The truncated mean is increasing in the location.
double tn_location_for_mean(double mu, double s) {
  double lo = -35.0 * s;
  double hi = 1.0 + 35.0 * s;
  if (tn_moments({lo, s}).first > mu || tn_moments({hi, s}).first < mu) {
    return std::nan("");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tn_moments({mid, s}).first < mu) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// At fixed mean the truncated variance grows with the scale until the mean
// stops being reachable; bisect on log scale, treating unreachable as too big.
TruncatedNormal solve_truncated_normal(double mu, double sigma) {
  const double target_var = sigma * sigma;
  double lo = std::log(1e-6);
  double hi = std::log(1e3);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = std::exp(mid);
    const double m = tn_location_for_mean(mu, s);
    if (std::isnan(m) || tn_moments({m, s}).second >= target_var) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double s = std::exp(lo);
  const TruncatedNormal tn{tn_location_for_mean(mu, s), s};
  const auto [m_got, v_got] = tn_moments(tn);
  if (std::isnan(tn.m) || std::abs(m_got - mu) > 1e-9 || std::abs(std::sqrt(v_got) - sigma) > 1e-7) {
    std::ostringstream msg;
    msg << "moments (mu=" << mu << ", sigma=" << sigma << ") not attainable by a truncated Gaussian";
    fail(msg.str());
  }
  return tn;
}

double sample_truncated_normal(const TruncatedNormal& tn, Rng& rng) {
  const double a = -tn.m / tn.s;
  const double b = (1.0 - tn.m) / tn.s;
  const double u = rng.uniform_open();
  double x = 0.0;
  if (a > 0.0) {
    const double qa = normal::survival(a);
    const double qb = normal::survival(b);
    x = tn.m - tn.s * normal::quantile(qb + u * (qa - qb));
  } else {
    const double pa = normal::cdf(a);
    const double pb = normal::cdf(b);
    x = tn.m + tn.s * normal::quantile(pa + u * (pb - pa));
  }
  return std::clamp(x, 0.0, 1.0);
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

constexpr std::uint64_t kPopulationStream = 0x706F70;
constexpr std::uint64_t kAnnotatorStream = 0x616E6E;
constexpr std::uint64_t kPoolStream = 0x706F6F6C;
constexpr std::uint64_t kBernoulliStream = 0x62657272;

}  // namespace

std::vector<double> generate_population(const PopulationModel& model, std::size_t n, PopulationShape shape,
                                        std::uint64_t seed) {
  if (!model.mu_p) fail("generate_population needs mu_p");
  model.validate();
  const double mu = *model.mu_p;
  const double sigma = model.sigma_p;
  Rng rng(stream_seed(seed, {kPopulationStream}));
  std::vector<double> out(n);

  switch (shape) {
    case PopulationShape::Bernoulli:
      for (auto& v : out) v = rng.bernoulli(mu) ? 1.0 : 0.0;
      break;
    case PopulationShape::BetaShaped: {
      if (sigma == 0.0) {
        std::fill(out.begin(), out.end(), mu);
        break;
      }
      const double max_var = mu * (1.0 - mu);
      if (!(sigma * sigma < max_var)) {
        fail("Beta-shaped population needs sigma_p^2 < mu_p(1 - mu_p)");
      }
      // Method of moments.
      const double nu = max_var / (sigma * sigma) - 1.0;
      const double a = mu * nu;
      const double b = (1.0 - mu) * nu;
      for (auto& v : out) v = rng.beta(a, b);
      break;
    }
    case PopulationShape::TruncatedGaussian: {
      if (sigma == 0.0) {
        std::fill(out.begin(), out.end(), mu);
        break;
      }
      if (!(mu > 0.0 && mu < 1.0)) fail("truncated Gaussian needs mu_p in (0, 1)");
      const TruncatedNormal tn = solve_truncated_normal(mu, sigma);
      for (auto& v : out) v = sample_truncated_normal(tn, rng);
      break;
    }
  }
  return out;
}

std::vector<double> apply_annotator(std::span<const double> values, const SyntheticAnnotatorSpec& spec,
                                    std::uint64_t seed) {
  Rng rng(stream_seed(seed, {kAnnotatorStream}));
  std::vector<double> out(values.size());

  if (const auto* cb = std::get_if<ConfusionBernoulli>(&spec.kind)) {
    cb->cm.validate();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double y = values[i];
      if (y != 0.0 && y != 1.0) {
        fail("confusion-matrix annotator needs binary values (index " + std::to_string(i) + ")");
      }
      const double p_one = (y == 1.0) ? cb->cm.alpha : 1.0 - cb->cm.beta;
      out[i] = rng.bernoulli(p_one) ? 1.0 : 0.0;
    }
    return out;
  }

  const auto& noise = std::get<AdditiveNoise>(spec.kind);
  if (!(noise.sigma >= 0.0)) fail("annotator sigma must be nonnegative");
  if (!(spec.correlation >= -1.0 && spec.correlation <= 1.0)) fail("correlation must lie in [-1, 1]");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      fail("annotator input at index " + std::to_string(i) + " outside [0, 1]");
    }
  }

  double center = 0.0;
  double scale = 0.0;
  if (spec.reference) {
    if (!spec.reference->mu_p) fail("annotator reference moments need mu_p");
    center = *spec.reference->mu_p;
    scale = spec.reference->sigma_p;
  } else if (!values.empty()) {
    center = mean(values);
    scale = std::sqrt(sample_variance(values));
  }

  const double rho = (scale > 0.0) ? spec.correlation : 0.0;
  const double own = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double y = values[i];
    const double z = (scale > 0.0) ? (y - center) / scale : 0.0;
    const double e = noise.bias + noise.sigma * (rho * z + own * rng.normal());
    out[i] = spec.clamp_to_unit ? clamp_unit(y + e) : y + e;
  }
  return out;
}

PairedSampleSet make_synthetic_pool(const PopulationModel& population, PopulationShape shape, std::size_t n,
                                    const SyntheticAnnotatorSpec& primary, const SyntheticAnnotatorSpec& aux,
                                    std::uint64_t seed) {
  const auto y = generate_population(population, n, shape, stream_seed(seed, {1}));
  auto fa = apply_annotator(y, primary, stream_seed(seed, {2}));
  auto fb = apply_annotator(y, aux, stream_seed(seed, {3}));
  return PairedSampleSet(std::move(fb), std::move(fa));
}

Metrics metrics(std::span<const double> estimates, double truth) {
  if (estimates.empty()) fail("metrics need at least one estimate");
  const auto n = static_cast<double>(estimates.size());
  std::vector<double> err(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) err[i] = estimates[i] - truth;
  std::vector<double> abs_err(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) abs_err[i] = std::abs(err[i]);

  Metrics m;
  m.bias = pairwise_sum(err) / n;
  m.mae = pairwise_sum(abs_err) / n;
  // mse = bias^2 + mean squared deviation, so mse >= bias^2 holds exactly.
  std::vector<double> dev2(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) dev2[i] = (err[i] - m.bias) * (err[i] - m.bias);
  const double ss = pairwise_sum(dev2);
  m.mse = m.bias * m.bias + ss / n;
  m.sd = estimates.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  m.se = m.sd / std::sqrt(n);
  return m;
}

const SimulationCell* SimulationReport::find(Design design, double budget) const {
  for (const auto& cell : cells) {
    if (cell.design == design && cell.budget == budget) return &cell;
  }
  return nullptr;
}

std::pair<std::size_t, std::size_t> sizes_for_budget(Design design, double budget, const CostModel& costs,
                                                     const PlanningSigmas& sigmas) {
  costs.validate();
  if (!(budget > 0.0)) fail("budget must be positive");
  auto affordable = [&](double unit) -> std::size_t {
    const double n = std::floor(budget / unit);
    if (n < 1.0) {
      std::ostringstream msg;
      msg << "infeasible budget " << budget << " for " << to_string(design);
      fail_infeasible(msg.str());
    }
    return static_cast<std::size_t>(n);
  };
  switch (design) {
    case Design::Conventional:
      return {affordable(costs.c_a + costs.c_c), 0};
    case Design::Auxiliary:
    case Design::AuxiliaryBiasCorrected:
      return {0, affordable(costs.c_b + costs.c_c)};
    case Design::HybridOffset:
    case Design::HybridRatio: {
      const auto inputs = PlanningInputs::make(sigmas.sigma_p, sigmas.sigma_a, sigmas.sigma_b, costs,
                                               PrecisionTarget(0.05, 0.05));
      const auto plan = plan_from_budget(budget, inputs);
      return {plan.n_a, plan.n_b};
    }
    case Design::HybridBiasCorrected:
      break;
  }
  fail("HybridBiasCorrected is evaluated by the Bernoulli comparison, not the pool bootstrap");
}

SimulationReport run_pool_bootstrap(const PairedSampleSet& pool, const PoolBootstrapConfig& config) {
  if (pool.n_b() == 0 || pool.n_a() != pool.n_b()) {
    fail("pool bootstrap needs a non-empty, fully primary-annotated pool");
  }
  if (config.replicates < 1) fail("replicates must be positive");
  config.costs.validate();
  for (Design d : config.designs) {
    if (d == Design::HybridBiasCorrected) {
      fail("HybridBiasCorrected is evaluated by the Bernoulli comparison, not the pool bootstrap");
    }
    if (d == Design::AuxiliaryBiasCorrected && !config.confusion) {
      fail("AuxiliaryBiasCorrected needs a confusion matrix");
    }
  }
  if (config.confusion) config.confusion->require_invertible();

  const auto primary = pool.primary_values();
  const auto aux = pool.aux_values();
  const double truth = mean(primary);

  PlanningSigmas sigmas;
  if (config.planning) {
    sigmas = *config.planning;
  } else {
    std::vector<double> err(pool.n_b());
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = aux[i] - primary[i];
    sigmas.sigma_p = std::sqrt(sample_variance(primary));
    sigmas.sigma_b = std::sqrt(sample_variance(err));
  }

  SimulationReport report;
  for (std::size_t bi = 0; bi < config.budgets.size(); ++bi) {
    const double budget = config.budgets[bi];
    for (std::size_t di = 0; di < config.designs.size(); ++di) {
      const Design design = config.designs[di];
      SimulationCell cell;
      cell.design = design;
      cell.budget = budget;
      try {
        std::tie(cell.n_a, cell.n_b) = sizes_for_budget(design, budget, config.costs, sigmas);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
        report.cells.push_back(cell);
        continue;
      }
      cell.feasible = true;

      const std::size_t n_a = cell.n_a;
      const std::size_t n_b = cell.n_b;
      const std::size_t draws = std::max(n_a, n_b);
      const std::uint64_t cell_key = stream_seed(kPoolStream, {bi, di});
      const auto estimates = run_replicates(
          config.replicates, config.seed, cell_key, config.threads, [&](Rng& rng, std::size_t) {
            std::vector<std::size_t> idx(draws);
            for (auto& i : idx) i = static_cast<std::size_t>(rng.index(pool.n_b()));
            switch (design) {
              case Design::Conventional: {
                std::vector<double> fa(n_a);
                for (std::size_t i = 0; i < n_a; ++i) fa[i] = primary[idx[i]];
                return conventional_mean(fa);
              }
              case Design::Auxiliary:
              case Design::AuxiliaryBiasCorrected: {
                std::vector<double> fb(n_b);
                for (std::size_t i = 0; i < n_b; ++i) fb[i] = aux[idx[i]];
                return design == Design::Auxiliary ? auxiliary_mean(fb)
                                                   : bias_corrected_mean(fb, *config.confusion);
              }
              default: {
                std::vector<double> fb(n_b);
                std::vector<double> fa(n_a);
                for (std::size_t i = 0; i < n_b; ++i) fb[i] = aux[idx[i]];
                for (std::size_t i = 0; i < n_a; ++i) fa[i] = primary[idx[i]];
                const PairedSampleSet sample(std::move(fb), std::move(fa));
                return design == Design::HybridOffset ? offset_mean(sample) : ratio_mean(sample);
              }
            }
          });
      cell.replicates = estimates.size();
      cell.metrics = metrics(estimates, truth);
      report.cells.push_back(cell);
    }
  }
  return report;
}

BernoulliComparisonReport run_bernoulli_comparison(const BernoulliComparisonConfig& config) {
  if (config.alphas.empty() || config.betas.empty() || config.mus.empty() || config.n_as.empty()) {
    fail("Bernoulli comparison grids must be nonempty");
  }
  if (config.replicates < 2) fail("Bernoulli comparison needs at least two replicates");
  for (std::size_t n_a : config.n_as) {
    if (n_a < 1 || n_a > config.n_b) fail("each n_a must satisfy 1 <= n_a <= n_b");
  }

  BernoulliComparisonReport report;
  std::uint64_t cell_index = 0;
  for (double alpha : config.alphas) {
    for (double beta : config.betas) {
      const ConfusionMatrix cm{alpha, beta};
      cm.validate();
      for (double mu : config.mus) {
        if (!(mu >= 0.0 && mu <= 1.0)) fail("mu_p must lie in [0, 1]");
        for (std::size_t n_a : config.n_as) {
          const std::size_t n_b = config.n_b;
          struct Outcome {
            bool kept = false;
            double offset = 0.0;
            double corrected = 0.0;
          };
          std::vector<Outcome> outcomes(config.replicates);
          const std::uint64_t cell_key = stream_seed(kBernoulliStream, {cell_index++});
          parallel_for(config.replicates, config.threads, [&](std::size_t r) {
            Rng rng(stream_seed(config.seed, {cell_key, static_cast<std::uint64_t>(r)}));
            std::vector<double> fa(n_a);
            std::vector<double> fb(n_b);
            for (std::size_t i = 0; i < n_b; ++i) {
              const bool y = rng.bernoulli(mu);
              if (i < n_a) fa[i] = y ? 1.0 : 0.0;
              fb[i] = rng.bernoulli(y ? alpha : 1.0 - beta) ? 1.0 : 0.0;
            }
            const PairedSampleSet sample(std::move(fb), std::move(fa));
            ConfusionMatrix cm_hat;
            try {
              const auto pairs = paired_labels(sample);
              cm_hat = estimate_confusion(pairs);
            } catch (const Error&) {
              return;  // a class is missing from the paired labels
            }
            if (cm_hat.determinant() < kMinEstimatedDeterminant) return;
            outcomes[r] = {true, offset_mean(sample),
                           hybrid_bias_corrected_mean(sample, cm_hat, BinaryAssumption::Acknowledged)};
          });

          std::vector<double> off;
          std::vector<double> bc;
          for (const auto& o : outcomes) {
            if (!o.kept) continue;
            off.push_back(o.offset);
            bc.push_back(o.corrected);
          }
          BernoulliCell cell;
          cell.alpha = alpha;
          cell.beta = beta;
          cell.mu_p = mu;
          cell.n_a = n_a;
          cell.n_b = n_b;
          cell.replicates = off.size();
          cell.dropped = config.replicates - off.size();
          if (!off.empty()) {
            cell.offset = metrics(off, mu);
            cell.bias_corrected = metrics(bc, mu);
          }
          report.cells.push_back(cell);
        }
      }
    }
  }
  return report;
}

}  // namespace hsurvey
