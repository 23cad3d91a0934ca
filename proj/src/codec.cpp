#include "mecsac/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mecsac {

ContinuousAction ContinuousAction::zeros(int num_tasks) {
    ContinuousAction a;
    a.push_raw.assign(num_tasks, 0.0);
    a.cache_delta_input_raw.assign(num_tasks, 0.0);
    a.cache_delta_output_raw.assign(num_tasks, 0.0);
    return a;
}

std::vector<double> ContinuousAction::flatten() const {
    std::vector<double> v;
    v.reserve(1 + push_raw.size() * 3);
    v.push_back(reactive_cores_raw);
    v.insert(v.end(), push_raw.begin(), push_raw.end());
    v.insert(v.end(), cache_delta_input_raw.begin(), cache_delta_input_raw.end());
    v.insert(v.end(), cache_delta_output_raw.begin(), cache_delta_output_raw.end());
    return v;
}

ContinuousAction ContinuousAction::unflatten(std::span<const double> values, int num_tasks) {
    if (static_cast<int>(values.size()) != 3 * num_tasks + 1) {
        throw std::invalid_argument("continuous action must have 3F+1 components");
    }
    ContinuousAction a;
    a.reactive_cores_raw = values[0];
    const auto f = static_cast<std::size_t>(num_tasks);
    a.push_raw.assign(values.begin() + 1, values.begin() + 1 + f);
    a.cache_delta_input_raw.assign(values.begin() + 1 + f, values.begin() + 1 + 2 * f);
    a.cache_delta_output_raw.assign(values.begin() + 1 + 2 * f, values.end());
    return a;
}

int quantize_component(double value, int lo, int hi) {
    const int span = hi - lo;
    if (span <= 0 || std::isnan(value)) return lo;
    const double width = static_cast<double>(span) / (span + 1);
    const double bin = std::floor((value - lo) / width);
    if (bin <= 0.0) return lo;
    if (bin >= span) return hi;
    return lo + static_cast<int>(bin);
}

SystemAction quantize(const ContinuousAction& raw, const SystemConfig& config) {
    const int n = config.num_tasks();
    SystemAction a = SystemAction::idle(n);
    a.reactive_cores = quantize_component(raw.reactive_cores_raw, 0, config.num_cores);
    for (int f = 0; f < n; ++f) {
        a.push[f] = static_cast<std::uint8_t>(quantize_component(raw.push_raw[f], 0, 1));
        a.cache_delta_input[f] =
            static_cast<std::int8_t>(quantize_component(raw.cache_delta_input_raw[f], -1, 1));
        a.cache_delta_output[f] =
            static_cast<std::int8_t>(quantize_component(raw.cache_delta_output_raw[f], -1, 1));
    }
    return a;
}

void apply_mask(SystemAction& action, const ActionMask& mask) {
    if (!mask.push) std::fill(action.push.begin(), action.push.end(), 0);
    if (!mask.cache) {
        std::fill(action.cache_delta_input.begin(), action.cache_delta_input.end(), 0);
        std::fill(action.cache_delta_output.begin(), action.cache_delta_output.end(), 0);
    }
}

namespace {

// Clamp every delta into its feasible window given pushes and cores.
void clip_windows(const SystemState& state, SystemAction& a) {
    const int n = static_cast<int>(a.push.size());
    for (int f = 0; f < n; ++f) {
        const int c = f == state.request ? a.reactive_cores : 0;
        const int s_in = state.input_cached[f];
        const int s_out = state.output_cached[f];
        const int in_hi = std::min(a.push[f] + c, 1 - s_in);
        const int out_hi = std::min(c, 1 - s_out);
        a.cache_delta_input[f] =
            static_cast<std::int8_t>(std::clamp<int>(a.cache_delta_input[f], -s_in, in_hi));
        a.cache_delta_output[f] =
            static_cast<std::int8_t>(std::clamp<int>(a.cache_delta_output[f], -s_out, out_hi));
    }
}

struct CacheEntry {
    int task;
    bool output;
    double key;
};

}  // namespace

SystemAction correct(const SystemState& state, const SystemAction& action,
                     const ContinuousAction& raw, const SystemConfig& config,
                     const ActionMask& mask) {
    const int n = config.num_tasks();
    const int req = state.request;
    SystemAction a = action;
    a.push.resize(n, 0);
    a.cache_delta_input.resize(n, 0);
    a.cache_delta_output.resize(n, 0);
    for (int f = 0; f < n; ++f) {
        a.push[f] = a.push[f] ? 1 : 0;
        a.cache_delta_input[f] = static_cast<std::int8_t>(std::clamp<int>(a.cache_delta_input[f], -1, 1));
        a.cache_delta_output[f] = static_cast<std::int8_t>(std::clamp<int>(a.cache_delta_output[f], -1, 1));
    }
    apply_mask(a, mask);

    // Rule 1: meet the deadline, or skip computing when the output is cached.
    if (state.output_cached[req]) {
        a.reactive_cores = 0;
    } else {
        const int floor = min_workable_cores(config, req, state.input_cached[req] != 0);
        a.reactive_cores = std::clamp(a.reactive_cores, floor, config.num_cores);
    }

    // Rule 2: nothing to push when any data of the task is already cached.
    for (int f = 0; f < n; ++f) {
        if (state.input_cached[f] + state.output_cached[f] >= 1) a.push[f] = 0;
    }

    // Rule 3: at most one push, the candidate with the largest raw score.
    int chosen = -1;
    for (int f = 0; f < n; ++f) {
        if (a.push[f] && (chosen < 0 || raw.push_raw[f] > raw.push_raw[chosen])) chosen = f;
    }
    for (int f = 0; f < n; ++f) a.push[f] = (f == chosen) ? 1 : 0;

    // Rule 7 applied up front so that Rules 4-6 reason about feasible deltas.
    clip_windows(state, a);

    // Rule 5: drop cached entries in ascending raw-delta order until Eq. (1)
    // holds for the updated cache.
    std::int64_t used = cache_usage_after(config, state, a);
    while (used > config.cache_capacity) {
        std::vector<CacheEntry> present;
        for (int f = 0; f < n; ++f) {
            if (state.input_cached[f] + a.cache_delta_input[f] == 1) {
                present.push_back({f, false, raw.cache_delta_input_raw[f]});
            }
        }
        for (int f = 0; f < n; ++f) {
            if (state.output_cached[f] + a.cache_delta_output[f] == 1) {
                present.push_back({f, true, raw.cache_delta_output_raw[f]});
            }
        }
        // Ties: lower task index first, inputs before outputs.
        const auto victim = std::min_element(
            present.begin(), present.end(), [](const CacheEntry& x, const CacheEntry& y) {
                if (x.key != y.key) return x.key < y.key;
                if (x.task != y.task) return x.task < y.task;
                return !x.output && y.output;
            });
        if (victim == present.end()) break;  // unreachable: empty cache fits any C >= 0
        const Task& t = config.tasks[victim->task];
        if (victim->output) {
            a.cache_delta_output[victim->task] = static_cast<std::int8_t>(state.output_cached[victim->task] ? -1 : 0);
            used -= t.output_bits;
        } else {
            a.cache_delta_input[victim->task] = static_cast<std::int8_t>(state.input_cached[victim->task] ? -1 : 0);
            used -= t.input_bits;
        }
    }

    // Rule 4: pushed data is cached when it fits next to what Rule 5 kept.
    // Running it after the overflow repair keeps correct() idempotent.
    if (chosen >= 0 && a.cache_delta_input[chosen] == 0 &&
        used + config.tasks[chosen].input_bits <= config.cache_capacity) {
        a.cache_delta_input[chosen] = 1;
        used += config.tasks[chosen].input_bits;
    }

    // Rule 6: fill remaining space with the requested task's reactive
    // input/output, in descending raw-delta order.
    if (mask.cache) {
        std::vector<CacheEntry> candidates;
        if (!state.input_cached[req] && a.cache_delta_input[req] == 0 &&
            a.push[req] + a.reactive_cores > 0) {
            candidates.push_back({req, false, raw.cache_delta_input_raw[req]});
        }
        if (!state.output_cached[req] && a.cache_delta_output[req] == 0 && a.reactive_cores > 0) {
            candidates.push_back({req, true, raw.cache_delta_output_raw[req]});
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const CacheEntry& x, const CacheEntry& y) { return x.key > y.key; });
        for (const CacheEntry& e : candidates) {
            const Task& t = config.tasks[req];
            const std::int64_t size = e.output ? t.output_bits : t.input_bits;
            if (used + size > config.cache_capacity) continue;
            (e.output ? a.cache_delta_output : a.cache_delta_input)[req] = 1;
            used += size;
        }
    }

    // Rule 7.
    clip_windows(state, a);
    return a;
}

SystemAction decode_action(const SystemState& state, const ContinuousAction& raw,
                           const SystemConfig& config, const ActionMask& mask) {
    SystemAction a = quantize(raw, config);
    apply_mask(a, mask);
    return correct(state, a, raw, config, mask);
}

// ---------------------------------------------------------------------------

NormalizationSpec NormalizationSpec::for_config(const SystemConfig& config) {
    const int n = config.num_tasks();
    NormalizationSpec spec;
    spec.state.reserve(2 * n + 1);
    spec.state.push_back({0.0, static_cast<double>(std::max(n - 1, 1))});
    for (int i = 0; i < 2 * n; ++i) spec.state.push_back({0.0, 1.0});
    spec.action.reserve(3 * n + 1);
    spec.action.push_back({0.0, static_cast<double>(config.num_cores)});
    for (int i = 0; i < n; ++i) spec.action.push_back({0.0, 1.0});
    for (int i = 0; i < 2 * n; ++i) spec.action.push_back({-1.0, 1.0});
    return spec;
}

double Normalizer::clamp_unit(double value) {
    if (value < -1.0 || value > 1.0 || std::isnan(value)) {
        ++clamped_;
        return std::isnan(value) ? 0.0 : std::clamp(value, -1.0, 1.0);
    }
    return value;
}

std::vector<double> Normalizer::normalize(std::span<const double> values,
                                          std::span<const Bounds> bounds) {
    if (values.size() != bounds.size()) throw std::invalid_argument("normalize: length mismatch");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Bounds& b = bounds[i];
        out[i] = clamp_unit(2.0 * (values[i] - b.lo) / (b.hi - b.lo) - 1.0);
    }
    return out;
}

std::vector<double> Normalizer::denormalize(std::span<const double> values,
                                            std::span<const Bounds> bounds) {
    if (values.size() != bounds.size()) throw std::invalid_argument("denormalize: length mismatch");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Bounds& b = bounds[i];
        out[i] = b.lo + (clamp_unit(values[i]) + 1.0) * 0.5 * (b.hi - b.lo);
    }
    return out;
}

std::vector<double> Normalizer::normalize_state(const SystemState& state) {
    std::vector<double> v;
    v.reserve(1 + state.input_cached.size() * 2);
    v.push_back(state.request);
    for (auto b : state.input_cached) v.push_back(b);
    for (auto b : state.output_cached) v.push_back(b);
    return normalize(v, spec_.state);
}

ContinuousAction Normalizer::denormalize_action(std::span<const double> normalized) {
    const auto values = denormalize(normalized, spec_.action);
    return ContinuousAction::unflatten(values, static_cast<int>(spec_.state.size() - 1) / 2);
}

std::vector<double> Normalizer::normalize_action(const ContinuousAction& action) {
    return normalize(action.flatten(), spec_.action);
}

int active_action_dim(int num_tasks, const ActionMask& mask) {
    return 1 + (mask.push ? num_tasks : 0) + (mask.cache ? 2 * num_tasks : 0);
}

std::vector<double> expand_active_action(std::span<const double> active, int num_tasks,
                                         const ActionMask& mask) {
    if (static_cast<int>(active.size()) != active_action_dim(num_tasks, mask)) {
        throw std::invalid_argument("active action length does not match mask");
    }
    std::vector<double> full(3 * num_tasks + 1, 0.0);
    std::size_t k = 0;
    full[0] = active[k++];
    for (int f = 0; f < num_tasks; ++f) full[1 + f] = mask.push ? active[k++] : -1.0;
    for (int f = 0; f < 2 * num_tasks; ++f) full[1 + num_tasks + f] = mask.cache ? active[k++] : 0.0;
    return full;
}

}  // namespace mecsac
