#pragma once

// Shared fixtures for the test binaries: reference scenarios, random state
// and action generators, and a straight-line cost oracle written
// independently of the library's cost functions.

#include "mecsac/codec.hpp"
#include "mecsac/env.hpp"
#include "mecsac/scenario.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace mecsac {

// Readable gtest failure output.
inline void PrintTo(const SystemAction& a, std::ostream* os) {
    *os << "{cores=" << a.reactive_cores << " push=" << bits_string(a.push)
        << " din=" << delta_string(a.cache_delta_input) << " dout=" << delta_string(a.cache_delta_output) << "}";
}

inline void PrintTo(const SystemState& s, std::ostream* os) {
    *os << "{req=" << s.request << " in=" << bits_string(s.input_cached)
        << " out=" << bits_string(s.output_cached) << "}";
}

}  // namespace mecsac

namespace mecsac::testing {

inline Scenario default_scenario() { return build_scenario(ScenarioParams{}); }

/// F=2, M=2, C = one input, gamma = 0.9. The core frequency is raised so two
/// cores are enough to meet the slot deadline.
inline ScenarioParams tiny_params() {
    ScenarioParams p;
    p.num_tasks = 2;
    p.num_cores = 2;
    p.size_offset = 0.0;
    p.cache_capacity = 16000;
    p.core_frequency = 6.8e8;
    p.discount = 0.9;
    p.snr = 1.0;
    return p;
}

/// Default sizes without random offsets (I=16000, O=30000).
inline SystemConfig plain_config(int num_tasks = 4) {
    SystemConfig c;
    c.tasks.assign(num_tasks, Task{16000, 30000, 800.0});
    return c;
}

/// Uniformly random request and cache bits, rejected until Eq. capacity holds.
inline SystemState random_state(const SystemConfig& config, std::mt19937_64& rng) {
    const int n = config.num_tasks();
    std::uniform_int_distribution<int> req(0, n - 1);
    std::bernoulli_distribution bit(0.35);
    SystemState s = SystemState::empty(n, req(rng));
    do {
        for (int f = 0; f < n; ++f) {
            s.input_cached[f] = bit(rng);
            s.output_cached[f] = bit(rng);
        }
    } while (cache_usage(config, s) > config.cache_capacity);
    return s;
}

/// Raw continuous action; mostly inside the bounds, occasionally outside.
inline ContinuousAction random_continuous(const SystemConfig& config, std::mt19937_64& rng) {
    const int n = config.num_tasks();
    std::uniform_real_distribution<double> u(-0.2, 1.2);
    ContinuousAction a = ContinuousAction::zeros(n);
    a.reactive_cores_raw = u(rng) * config.num_cores;
    for (int f = 0; f < n; ++f) {
        a.push_raw[f] = u(rng);
        a.cache_delta_input_raw[f] = 2.0 * u(rng) - 1.0;
        a.cache_delta_output_raw[f] = 2.0 * u(rng) - 1.0;
    }
    return a;
}

// Random member of the valid action set: each component drawn inside its
// window, then positive deltas dropped at random until the capacity fits.
inline SystemAction random_valid_action(const SystemState& s, const SystemConfig& cfg, std::mt19937_64& rng) {
    const int n = cfg.num_tasks();
    const int req = s.request;
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    SystemAction a = SystemAction::idle(n);
    if (!s.output_cached[req]) a.reactive_cores = pick(min_workable_cores(cfg, req, s.input_cached[req]), cfg.num_cores);
    for (int f = 0; f < n; ++f) {
        a.push[f] = static_cast<std::uint8_t>(pick(0, 4) == 0);
        const int c = f == req ? a.reactive_cores : 0;
        a.cache_delta_input[f] = static_cast<std::int8_t>(
            pick(-s.input_cached[f], std::min(a.push[f] + c, 1 - s.input_cached[f])));
        a.cache_delta_output[f] = static_cast<std::int8_t>(
            pick(-s.output_cached[f], std::min(c, 1 - s.output_cached[f])));
    }
    while (cache_usage_after(cfg, s, a) > cfg.cache_capacity) {
        const int f = pick(0, n - 1);
        if (pick(0, 1)) {
            if (a.cache_delta_input[f] > 0) a.cache_delta_input[f] = 0;
        } else if (a.cache_delta_output[f] > 0) {
            a.cache_delta_output[f] = 0;
        }
    }
    return a;
}

/// Raw action at the centre of the quantization bins of `a`.
inline ContinuousAction bin_centres(const SystemAction& a, const SystemConfig& cfg) {
    const int n = cfg.num_tasks();
    const double m = cfg.num_cores;
    ContinuousAction raw = ContinuousAction::zeros(n);
    raw.reactive_cores_raw = (a.reactive_cores + 0.5) * m / (m + 1.0);
    for (int f = 0; f < n; ++f) {
        raw.push_raw[f] = a.push[f] ? 0.75 : 0.25;
        raw.cache_delta_input_raw[f] = a.cache_delta_input[f] * 2.0 / 3.0;
        raw.cache_delta_output_raw[f] = a.cache_delta_output[f] * 2.0 / 3.0;
    }
    return raw;
}

struct ReferenceCost {
    double br = 0, bp = 0, er = 0, b = 0, e = 0, weighted = 0, reward = 0;
};

/// Closed forms evaluated term by term.
inline ReferenceCost reference_cost(const SystemState& s, const SystemAction& a, double snr,
                                    const SystemConfig& cfg) {
    ReferenceCost r;
    const int q = s.request;
    const double in = static_cast<double>(cfg.tasks[q].input_bits);
    const double w = cfg.tasks[q].cycles_per_bit;
    const double se = std::log2(1.0 + snr);
    const double gate = (1.0 - s.input_cached[q]) * (1.0 - s.output_cached[q]);
    if (gate != 0.0) {
        const double t_comp = in * w / (a.reactive_cores * cfg.core_frequency);
        r.br = in / ((cfg.slot_length - t_comp) * se);
    }
    r.er = (1.0 - s.output_cached[q]) * cfg.switched_capacitance * a.reactive_cores *
           a.reactive_cores * cfg.core_frequency * cfg.core_frequency * in * w;
    double pushed = 0.0;
    for (int f = 0; f < cfg.num_tasks(); ++f) pushed += cfg.tasks[f].input_bits * a.push[f];
    r.bp = pushed / (cfg.slot_length * se);
    r.b = r.br + r.bp;
    r.e = r.er;
    r.weighted = r.b + cfg.cost_weight * r.e;
    r.reward = -cfg.reward_scale * r.weighted;
    return r;
}

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace mecsac::testing
