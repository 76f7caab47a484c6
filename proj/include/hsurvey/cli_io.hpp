#pragma once

// Command-line configuration, CSV ingestion and report emission.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsurvey/bias_correction.hpp"
#include "hsurvey/design_planner.hpp"
#include "hsurvey/sim_engine.hpp"
#include "hsurvey/stats_core.hpp"

namespace hsurvey::cli {

enum class Command { Plan, Estimate, Simulate };
enum class Protocol { Pool, Bernoulli };

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInfeasible = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutdirEnv = "HSURVEY_OUTDIR";

struct RunConfig {
  Command command = Command::Plan;

  double sigma_p = 0.0;
  double sigma_a = 0.0;
  double sigma_b = 0.0;
  std::optional<double> mu_p;
  double d = 0.0;
  double delta = 0.05;
  CostModel costs;
  std::optional<ConfusionMatrix> confusion;

  std::vector<double> budgets;  ///< strictly increasing
  std::size_t replicates = 0;   ///< 0 selects the protocol default
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::vector<Design> designs;
  Protocol protocol = Protocol::Pool;
  std::size_t pool_size = 40;
  double aux_bias = 0.0;
  double correlation = 0.0;

  std::optional<std::filesystem::path> input;
  std::filesystem::path outdir = ".";

  bool clamp = false;             ///< clamp reported estimates to [0, 1]
  bool binary = false;            ///< acknowledges binary values / known confusion matrix
  bool strict_precision = false;  ///< see RoundingPolicy

  std::vector<std::string> warnings;
  std::optional<std::string> help;  ///< set when --help was requested
  std::vector<std::string> given;   ///< option names that were set, flags or config

  bool has(const std::string& key) const;
  PlanningInputs planning_inputs() const;
};

/// Parses `args` (without the program name): a subcommand followed by
/// flags. `--config FILE` reads flat `key = value` lines whose keys mirror
/// the flag names; flags given on the command line win, with a warning.
/// `env_outdir` is the default output directory when --outdir is absent.
/// Throws Error(InvalidInput) with the offending field named.
RunConfig parse_config(const std::vector<std::string>& args,
                       const std::optional<std::string>& env_outdir = std::nullopt);

/// Samples read from CSV, in set order (paired records first).
struct IngestedSamples {
  PairedSampleSet samples;
  std::vector<std::string> ids;           ///< sample_id per set position
  std::vector<std::size_t> original_row;  ///< 0-based data row per set position
  std::vector<LabelPair> point_pairs;     ///< point-level pairs (point CSV only)
};

/// Header `sample_id,aux_value,primary_value`; primary_value may be empty.
IngestedSamples ingest_paired_csv(const std::filesystem::path& path);

/// Header `sample_id,point_id,aux_label,primary_label`; labels binary,
/// primary_label may be empty for every point of an unannotated sample.
IngestedSamples ingest_point_csv(const std::filesystem::path& path);

/// Detects the format from the header line and ingests.
IngestedSamples ingest_csv(const std::filesystem::path& path);

/// Writes the samples back in their original row order, values printed
/// with enough digits to round-trip exactly.
void write_paired_csv(const std::filesystem::path& path, const IngestedSamples& data);

/// %.12g
std::string format_number(double value);

/// plan.json: the chosen plan, every compared plan, and threshold
/// diagnostics (sigma_delta, k, k').
void emit_plan_json(const std::filesystem::path& path, const PlanningInputs& inputs,
                    const std::vector<SamplingPlan>& plans, const std::optional<ConfusionMatrix>& confusion,
                    const std::vector<std::string>& warnings);

/// tradeoff.csv: (n_b, n_a) along the iso-precision curve, starting at
/// n_b = n_a* and running to `max_factor` n_a*.
void emit_tradeoff_csv(const std::filesystem::path& path, const PlanningInputs& inputs, double max_factor = 10.0);

/// tsc_diff.csv: TSC(Conventional) - TSC(Hybrid-Offset) over a log grid of
/// relative costs k, with c_b = 0 and the inputs' collection cost.
void emit_tsc_diff_csv(const std::filesystem::path& path, const PlanningInputs& inputs);

/// simulation.csv, long format.
void emit_simulation_csv(const std::filesystem::path& path, const SimulationReport& report);

/// sd_difference.csv for the Bernoulli comparison.
void emit_bernoulli_csv(const std::filesystem::path& path, const BernoulliComparisonReport& report);

/// Runs a parsed configuration, writing outputs under config.outdir and a
/// short summary to `out`. Returns the process exit code.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full entry point: parse, run, and map errors to exit codes.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hsurvey::cli
