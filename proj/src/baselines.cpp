#include "mecsac/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mecsac {

RecencyTracker::RecencyTracker(int num_tasks) : last_seen_(num_tasks, -1), counts_(num_tasks, 0) {}

void RecencyTracker::observe(int task) {
    ++now_;
    last_seen_.at(task) = now_;
    ++counts_.at(task);
}

void RecencyTracker::reset() {
    now_ = -1;
    std::fill(last_seen_.begin(), last_seen_.end(), -1);
    std::fill(counts_.begin(), counts_.end(), 0);
}

int heuristic_core_budget(const SystemConfig& config) {
    return static_cast<int>(std::floor(0.75 * config.num_cores + 0.5));
}

namespace {

// score(f) ranks tasks: the push goes to the highest-scoring uncached task,
// eviction removes the lowest-scoring cached input. Ties go to the lower index.
SystemAction heuristic_policy(const SystemState& state, const SystemConfig& config,
                              const std::function<double(int)>& score, const std::function<bool(int)>& seen) {
    const int n = config.num_tasks();
    const int req = state.request;
    SystemAction a = SystemAction::idle(n);
    if (!state.output_cached[req]) {
        const int floor = min_workable_cores(config, req, state.input_cached[req] != 0);
        a.reactive_cores = std::min(std::max(heuristic_core_budget(config), floor), config.num_cores);
    }

    std::int64_t used = cache_usage(config, state);
    std::vector<bool> protected_task(n, false);
    protected_task[req] = true;

    auto try_cache_input = [&](int f) {
        const std::int64_t size = config.tasks[f].input_bits;
        std::vector<int> victims;
        for (int g = 0; g < n; ++g) {
            if (!protected_task[g] && g != f && state.input_cached[g] && a.cache_delta_input[g] == 0) {
                victims.push_back(g);
            }
        }
        std::stable_sort(victims.begin(), victims.end(), [&](int x, int y) { return score(x) < score(y); });
        std::int64_t freeable = 0;
        for (int g : victims) freeable += config.tasks[g].input_bits;
        if (used + size - freeable > config.cache_capacity) return false;
        for (int g : victims) {
            if (used + size <= config.cache_capacity) break;
            a.cache_delta_input[g] = -1;
            used -= config.tasks[g].input_bits;
        }
        a.cache_delta_input[f] = 1;
        used += size;
        return true;
    };

    if (!state.input_cached[req] && !state.output_cached[req] && a.reactive_cores > 0) {
        try_cache_input(req);
    }

    int target = -1;
    for (int f = 0; f < n; ++f) {
        if (f == req || state.input_cached[f] || state.output_cached[f] || !seen(f)) continue;
        if (target < 0 || score(f) > score(target)) target = f;
    }
    if (target >= 0) {
        protected_task[target] = true;
        if (try_cache_input(target)) a.push[target] = 1;
    }
    return a;
}

}  // namespace

SystemAction mru_lru_policy(const SystemState& state, const RecencyTracker& tracker, const SystemConfig& config) {
    return heuristic_policy(
        state, config, [&](int f) { return static_cast<double>(tracker.last_seen(f)); },
        [&](int f) { return tracker.last_seen(f) >= 0; });
}

SystemAction mfu_lfu_policy(const SystemState& state, const RecencyTracker& tracker, const SystemConfig& config) {
    return heuristic_policy(
        state, config, [&](int f) { return static_cast<double>(tracker.count(f)); },
        [&](int f) { return tracker.count(f) > 0; });
}

HeuristicController::HeuristicController(HeuristicKind kind, SystemConfig config)
    : kind_(kind), config_(std::move(config)), tracker_(config_.num_tasks()) {}

std::string HeuristicController::name() const { return kind_ == HeuristicKind::MruLru ? "MRU-LRU" : "MFU-LFU"; }

SystemAction HeuristicController::act(const SystemState& state, double /*snr*/) {
    tracker_.observe(state.request);
    return kind_ == HeuristicKind::MruLru ? mru_lru_policy(state, tracker_, config_)
                                          : mfu_lfu_policy(state, tracker_, config_);
}

RestrictedKind parse_restricted_kind(const std::string& name) {
    if (name == "DFNC") return RestrictedKind::DFNC;
    if (name == "DFC") return RestrictedKind::DFC;
    if (name == "PTDFC") return RestrictedKind::PTDFC;
    throw ConfigError("unknown action-space restriction '" + name + "' (expected PTDFC, DFC or DFNC)");
}

std::string to_string(RestrictedKind kind) {
    switch (kind) {
        case RestrictedKind::DFNC: return "DFNC";
        case RestrictedKind::DFC: return "DFC";
        case RestrictedKind::PTDFC: return "PTDFC";
    }
    return "PTDFC";
}

ActionMask restricted_action_space(RestrictedKind kind) {
    switch (kind) {
        case RestrictedKind::DFNC: return ActionMask{false, false};
        case RestrictedKind::DFC: return ActionMask{false, true};
        case RestrictedKind::PTDFC: return ActionMask{true, true};
    }
    return {};
}

ActionMask restricted_action_space(const std::string& name) {
    return restricted_action_space(parse_restricted_kind(name));
}

}  // namespace mecsac
