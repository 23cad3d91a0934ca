#pragma once

// Experiment orchestration: seeded runs of the learned and heuristic
// controllers over parameter sweeps, result/metric emission, convergence
// analysis and qualitative traces.

#include "mecsac/baselines.hpp"
#include "mecsac/sac.hpp"
#include "mecsac/scenario.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mecsac {

enum class Algorithm { PTDFC, DFC, DFNC, MruLru, MfuLfu };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm algorithm);
bool is_learned(Algorithm algorithm);
std::vector<Algorithm> all_algorithms();

/// Sweepable scenario keys.
const std::vector<std::string>& sweep_keys();
/// Applies one sweep value; throws ConfigError for unknown keys or values
/// outside the key's valid range.
void apply_sweep_value(ScenarioParams& params, const std::string& key, double value);

struct LearnerSettings {
    SacConfig sac;
    TrainerConfig trainer;  // mask and seed are filled per run
    int train_epochs = 50;
};

struct ExperimentSpec {
    std::vector<Algorithm> algorithms = all_algorithms();
    ScenarioParams scenario;
    std::string sweep_key;  // empty: a single point
    std::vector<double> sweep_values;
    std::size_t trace_length = 200'000;
    std::vector<std::uint64_t> seeds{1};
    LearnerSettings learner;
    std::string output_dir;  // empty: nothing written
    int workers = 1;

    /// Throws ConfigError before any computation when the experiment is unusable.
    void validate() const;
};

/// Experiment keys (algorithms, sweep, values, trace_length, seeds,
/// train_epochs, steps_per_epoch, hidden, batch_size, learning_rate,
/// alpha_learning_rate, initial_alpha, polyak, target_update_interval,
/// buffer_capacity, warmup_steps, updates_per_step, eval_interval,
/// eval_epochs, optimizer, output_dir, workers) plus the scenario keys.
ExperimentSpec experiment_spec_from(const KeyValues& kv, ExperimentSpec base = {});

struct RunResult {
    Algorithm algorithm = Algorithm::PTDFC;
    std::string sweep_key;
    double value = 0.0;
    std::uint64_t seed = 0;
    double mean_transmission = 0.0;
    double mean_computation = 0.0;
    double mean_weighted_cost = 0.0;
    int convergence_epoch = -1;  // learned algorithms only
    std::string config_hash;
    std::vector<EpochMetrics> metrics;
};

/// Scenario of one sweep point.
Scenario scenario_for(const ExperimentSpec& spec, std::optional<double> value);

/// Every (value, seed) point runs every algorithm on one shared request trace.
/// Writes results.csv, results.dat and metrics/*.csv when output_dir is set.
std::vector<RunResult> run_experiment(const ExperimentSpec& spec);

/// Trains for `epochs` epochs. When the trainer evaluates periodically, the
/// agent is then reset to the best-evaluated snapshot (the latest on ties),
/// which smooths out late oscillations of the final policy.
std::vector<EpochMetrics> train_selecting_best(SacTrainer& trainer, int epochs,
                                              const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Single algorithm on a prepared scenario.
RunResult run_single(Algorithm algorithm, const Scenario& scenario, const LearnerSettings& learner,
                     std::size_t trace_length, std::uint64_t seed, const std::string& checkpoint_dir = {});

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results);
/// Seed-averaged blocks per algorithm, columns: value transmission computation weighted.
void write_results_dat(std::ostream& out, const std::vector<RunResult>& results);

// ---------------------------------------------------------------------------

/// First 1-based index k such that the partial-start moving mean over
/// `window` entries stays within `tolerance` (relative) of the mean of the
/// last `window` entries for every index >= k. Throws ConfigError when the
/// series is shorter than the window.
int convergence_epoch(const std::vector<double>& series, int window = 10, double tolerance = 0.05);

struct RegimeConvergence {
    double snr = 0.0;
    int first_epoch = 0;  // absolute, 1-based
    int last_epoch = 0;
    std::optional<int> converged_after;  // epochs into the regime; empty if shorter than the window
    double final_mean = 0.0;
};

/// Splits the training-reward series at SNR changes and reports each regime.
std::vector<RegimeConvergence> convergence_report(const std::vector<EpochMetrics>& metrics, int window = 10,
                                                  double tolerance = 0.05);

/// Runs a checkpointed policy for `steps` slots from an empty cache.
/// When `expected_config` is given, its hash must match the checkpoint's.
std::vector<TraceRecord> emit_qualitative_trace(const std::string& checkpoint_dir, std::size_t steps,
                                                std::uint64_t seed,
                                                const std::optional<Scenario>& expected_config = std::nullopt);

}  // namespace mecsac
