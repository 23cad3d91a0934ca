#pragma once

// Controller interface shared by the learned policy and the heuristics, and a
// deterministic replay loop over a fixed request trace.

#include "mecsac/env.hpp"
#include "mecsac/scenario.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mecsac {

class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string name() const = 0;
    /// Forget per-trace history (recency counters and the like).
    virtual void reset() {}
    virtual SystemAction act(const SystemState& state, double snr) = 0;
};

struct RolloutSummary {
    std::size_t steps = 0;
    double mean_transmission = 0.0;  // mean B per slot, Hz
    double mean_computation = 0.0;   // mean E per slot, J
    double mean_weighted_cost = 0.0;
    double mean_reward = 0.0;
    double discounted_cost = 0.0;    // sum_t gamma^t (B + lambda E)
};

/// Optional per-step observer (trace writers, audits).
using StepObserver = std::function<void(const TraceRecord&)>;

/// Runs `requests.size() - 1` slots starting from an empty cache at
/// requests[0]; slot t moves to requests[t + 1]. Actions are validated by step().
RolloutSummary rollout(Controller& controller, const SystemConfig& config,
                       const std::vector<int>& requests, double snr,
                       const StepObserver& observer = {});

}  // namespace mecsac
