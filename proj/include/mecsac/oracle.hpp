#pragma once

// Exact solution of the discounted-cost problem on tiny instances: full
// enumeration of (request, cache) states and valid actions, value iteration
// and linear-system policy evaluation.
//
// Costs inside the MDP are reward-scaled, i.e. kappa * (B + lambda E), so
// values are directly comparable with discounted learner returns.

#include "mecsac/env.hpp"
#include "mecsac/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace mecsac {

struct MdpAction {
    std::uint64_t code = 0;  // see encode_action
    double cost = 0.0;       // kappa * weighted cost
    int next_cache = 0;      // index into EnumeratedMdp::cache_masks
};

struct EnumeratedMdp {
    SystemConfig config;
    std::vector<std::vector<double>> transition;
    double snr = 1.0;
    /// Valid cache configurations: bit f = input of task f, bit F+f = output of task f.
    std::vector<std::uint32_t> cache_masks;
    std::vector<int> cache_index;  // mask -> index, -1 when the mask breaks capacity
    /// Per state (request * num_caches + cache), its valid actions.
    std::vector<std::vector<MdpAction>> actions;

    int num_tasks() const { return config.num_tasks(); }
    int num_caches() const { return static_cast<int>(cache_masks.size()); }
    std::size_t num_states() const { return actions.size(); }
    std::size_t num_pairs() const;

    SystemState state(std::size_t index) const;
    std::size_t state_index(const SystemState& state) const;
    SystemAction action(std::size_t state_index, std::size_t action_index) const;
    /// Index of `action` in the state's action list; throws if absent.
    std::size_t find_action(std::size_t state_index, const SystemAction& action) const;
};

/// cores + (M+1) * (push mask + 2^F * d), where d has base-3 digits
/// delta_in[f]+1 at position f and delta_out[f]+1 at position F+f.
std::uint64_t encode_action(const SystemAction& action, int num_cores);
SystemAction decode_action_code(std::uint64_t code, int num_tasks, int num_cores);

/// Raw action-space size before validity filtering: (M+1) 2^F 3^(2F).
std::uint64_t raw_action_count(int num_tasks, int num_cores);

/// Throws ConfigError when the valid state-action pairs exceed `budget`.
EnumeratedMdp enumerate_mdp(const SystemConfig& config, const TransitionModel& model, double snr,
                            std::uint64_t budget = 10'000'000);

struct ValueIterationResult {
    std::vector<double> values;
    std::vector<std::size_t> policy;  // greedy action index per state
    std::vector<double> residuals;    // sup-norm residual per sweep
    double optimal_cost = 0.0;        // sum_f p_f V(f, empty cache)
};

ValueIterationResult value_iteration(const EnumeratedMdp& mdp, double gamma, double tolerance = 1e-9,
                                     int max_sweeps = 1'000'000);

/// Discounted cost per start state of a deterministic stationary policy.
std::vector<double> evaluate_policy(const EnumeratedMdp& mdp, const std::vector<std::size_t>& policy,
                                    double gamma);
/// Same, with explicit actions; throws ConfigError naming the first state
/// whose action is invalid.
std::vector<double> evaluate_policy(const EnumeratedMdp& mdp, const std::vector<SystemAction>& policy,
                                    double gamma);

/// sum_f p_f V(f, empty cache) under the request chain's limiting distribution.
double start_cost(const EnumeratedMdp& mdp, const std::vector<double>& values);

/// CSV: state,request,input_cached,output_cached,value,cores,push,delta_input,delta_output
void write_value_csv(std::ostream& out, const EnumeratedMdp& mdp, const ValueIterationResult& result);

}  // namespace mecsac
