#pragma once

// Comparison policies: recency/frequency push-and-evict heuristics with a
// fixed core budget, and the action-space restrictions that turn the learner
// into its cache-only and no-cache ablations.

#include "mecsac/codec.hpp"
#include "mecsac/env.hpp"
#include "mecsac/rollout.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mecsac {

/// Per-task last-request time and request count.
class RecencyTracker {
public:
    explicit RecencyTracker(int num_tasks = 0);

    /// Records a request at the next time step.
    void observe(int task);
    void reset();

    std::int64_t now() const { return now_; }
    std::int64_t last_seen(int task) const { return last_seen_.at(task); }  // -1 if never
    std::uint64_t count(int task) const { return counts_.at(task); }
    int num_tasks() const { return static_cast<int>(counts_.size()); }

private:
    std::int64_t now_ = -1;
    std::vector<std::int64_t> last_seen_;
    std::vector<std::uint64_t> counts_;
};

/// round-half-up(0.75 M)
int heuristic_core_budget(const SystemConfig& config);

SystemAction mru_lru_policy(const SystemState& state, const RecencyTracker& tracker, const SystemConfig& config);
SystemAction mfu_lfu_policy(const SystemState& state, const RecencyTracker& tracker, const SystemConfig& config);

enum class HeuristicKind { MruLru, MfuLfu };

/// Stateful wrapper that feeds each request into its tracker before acting.
class HeuristicController : public Controller {
public:
    HeuristicController(HeuristicKind kind, SystemConfig config);
    std::string name() const override;
    void reset() override { tracker_.reset(); }
    SystemAction act(const SystemState& state, double snr) override;

private:
    HeuristicKind kind_;
    SystemConfig config_;
    RecencyTracker tracker_;
};

enum class RestrictedKind { DFNC, DFC, PTDFC };

RestrictedKind parse_restricted_kind(const std::string& name);
std::string to_string(RestrictedKind kind);
ActionMask restricted_action_space(RestrictedKind kind);
/// Same, by name; throws ConfigError for unknown names.
ActionMask restricted_action_space(const std::string& name);

}  // namespace mecsac
