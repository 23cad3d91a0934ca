#pragma once

// Single-user MEC system model: tasks, request chain, cache state, discrete
// actions and the per-slot bandwidth/energy cost model.
//
// Task indices are 0-based throughout the library. Human-facing outputs
// (trace CSVs, qualitative logs) print them 1-based.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecsac {

/// Raised for invalid parameters, malformed config files and bad CLI input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a reactive download cannot finish inside the slot.
class LatencyInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Task {
    std::int64_t input_bits = 0;
    std::int64_t output_bits = 0;
    double cycles_per_bit = 0.0;
};

struct SystemConfig {
    std::vector<Task> tasks;  // F = tasks.size()
    std::int64_t cache_capacity = 40000;
    int num_cores = 8;
    double core_frequency = 1.7e8;
    double slot_length = 0.02;
    double switched_capacitance = 1e-19;
    double cost_weight = 1.0;
    double reward_scale = 1e-6;
    double discount = 0.99;

    int num_tasks() const { return static_cast<int>(tasks.size()); }

    /// Throws ConfigError naming the first violated constraint, including the
    /// per-task latency feasibility with all M cores.
    void validate() const;
};

struct SnrChange {
    int epoch = 0;
    double snr = 1.0;  // linear ratio, enters log2(1 + snr) directly
};

struct TransitionModel {
    std::vector<std::vector<double>> matrix;  // row-stochastic, F x F
    std::vector<SnrChange> snr_schedule{{0, 1.0}};
    int snr_change_period = 300;

    int num_tasks() const { return static_cast<int>(matrix.size()); }

    /// SNR in force at the given epoch (last schedule entry at or before it).
    double snr_at_epoch(int epoch) const;

    /// Shape, stochasticity (1e-12), non-negativity, irreducibility, SNR > 0.
    void validate() const;
};

struct SystemState {
    int request = 0;
    std::vector<std::uint8_t> input_cached;
    std::vector<std::uint8_t> output_cached;

    static SystemState empty(int num_tasks, int request);

    bool operator==(const SystemState&) const = default;
};

struct SystemAction {
    int reactive_cores = 0;  // cores for the requested task; all others are 0
    std::vector<std::uint8_t> push;
    std::vector<std::int8_t> cache_delta_input;
    std::vector<std::int8_t> cache_delta_output;

    static SystemAction idle(int num_tasks);

    bool operator==(const SystemAction&) const = default;
};

struct CostBreakdown {
    double reactive_bandwidth = 0.0;  // Hz
    double push_bandwidth = 0.0;      // Hz
    double reactive_energy = 0.0;     // J
    double total_bandwidth = 0.0;
    double energy = 0.0;
    double weighted_cost = 0.0;
    double reward = 0.0;

    bool operator==(const CostBreakdown&) const = default;
};

struct Violation {
    std::string constraint;  // core-limit | latency | input-window | output-window | capacity | shape
    int task = -1;
    std::string detail;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::string describe() const;
};

class InvalidAction : public std::runtime_error {
public:
    explicit InvalidAction(ValidationResult verdict);
    const ValidationResult& verdict() const { return verdict_; }

private:
    ValidationResult verdict_;
};

struct StepResult {
    SystemState next;
    CostBreakdown cost;
};

// ---------------------------------------------------------------------------
// Request chain

/// Limiting distribution p with p = pQ. Throws ConfigError naming the states
/// that are not mutually reachable when the chain is not irreducible.
std::vector<double> stationary_distribution(const TransitionModel& model);

/// Synthetic chain: every row i gets p_max on one uniformly drawn j != i; the
/// remaining mass is spread over k != j proportionally to uniform draws.
std::vector<std::vector<double>> build_transition_matrix(int num_tasks, double p_max,
                                                         std::uint64_t seed);

/// Draws the request following `current` from row `current` of Q.
int sample_next_request(const TransitionModel& model, int current, std::mt19937_64& rng);

/// Draws an index from a probability vector (inverse CDF).
int sample_index(const std::vector<double>& probabilities, std::mt19937_64& rng);

/// First request from the stationary distribution, then frame-by-frame
/// along the chain.
std::vector<int> sample_request_trace(const TransitionModel& model, std::size_t length,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tasks and defaults

/// F tasks sized around the base values with a seeded uniform integer offset
/// in +-offset_fraction of the base.
std::vector<Task> make_tasks(int num_tasks, std::int64_t input_base, std::int64_t output_base,
                             double cycles_per_bit, double offset_fraction, std::uint64_t seed);

/// Smallest core count meeting the slot deadline for task f. A download needs
/// strictly positive time left after computing, so an uncached input may need
/// one core more than a cached one when I*w/(tau*f_D) is an integer.
int min_workable_cores(const SystemConfig& config, int task, bool input_cached);

/// sum_f I_f * S^I_f + O_f * S^O_f
std::int64_t cache_usage(const SystemConfig& config, const SystemState& state);

/// Cache usage after applying the action's deltas (may exceed C).
std::int64_t cache_usage_after(const SystemConfig& config, const SystemState& state,
                               const SystemAction& action);

// ---------------------------------------------------------------------------
// Actions and costs

ValidationResult validate_action(const SystemState& state, const SystemAction& action,
                                 const SystemConfig& config);

double reactive_bandwidth(const SystemState& state, const SystemAction& action, double snr,
                          const SystemConfig& config);

double reactive_energy(const SystemState& state, const SystemAction& action,
                       const SystemConfig& config);

double push_bandwidth(const SystemAction& action, double snr, const SystemConfig& config);

CostBreakdown evaluate_cost(const SystemState& state, const SystemAction& action, double snr,
                            const SystemConfig& config);

/// Pure transition: applies the cache deltas and moves to `next_request`.
/// Throws InvalidAction when the action fails validate_action.
StepResult step(const SystemState& state, const SystemAction& action, double snr,
                int next_request, const SystemConfig& config);

}  // namespace mecsac
