#pragma once

// Continuous <-> discrete action mapping for the learner: uniform-threshold
// quantization, rule-based correction into the valid action set, and affine
// normalization of states and actions to [-1, 1].

#include "mecsac/env.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mecsac {

/// Continuous relaxation of SystemAction (3F+1 components).
struct ContinuousAction {
    double reactive_cores_raw = 0.0;               // [0, M]
    std::vector<double> push_raw;                  // [0, 1]^F
    std::vector<double> cache_delta_input_raw;     // [-1, 1]^F
    std::vector<double> cache_delta_output_raw;    // [-1, 1]^F

    static ContinuousAction zeros(int num_tasks);
    std::vector<double> flatten() const;
    static ContinuousAction unflatten(std::span<const double> values, int num_tasks);
};

/// Which action families the learner controls. Disabled families are forced
/// to zero before correction, and correction never re-enables them.
struct ActionMask {
    bool push = true;
    bool cache = true;

    bool operator==(const ActionMask&) const = default;
};

/// Uniform thresholding onto the integer set {lo..hi}: bin width
/// (hi-lo)/(hi-lo+1), clipped into the set.
int quantize_component(double value, int lo, int hi);

SystemAction quantize(const ContinuousAction& raw, const SystemConfig& config);

/// Zeroes the masked families of a discrete action.
void apply_mask(SystemAction& action, const ActionMask& mask);

/// Rules 1-7 (plus the mask). Always returns an action that passes
/// validate_action for `state`.
SystemAction correct(const SystemState& state, const SystemAction& action,
                     const ContinuousAction& raw, const SystemConfig& config,
                     const ActionMask& mask = {});

/// quantize -> mask -> correct.
SystemAction decode_action(const SystemState& state, const ContinuousAction& raw,
                           const SystemConfig& config, const ActionMask& mask = {});

// ---------------------------------------------------------------------------

struct Bounds {
    double lo = -1.0;
    double hi = 1.0;
};

/// Per-component bounds for the state vector (2F+1: request index, input
/// bits, output bits) and the full action vector (3F+1: cores, push, input
/// deltas, output deltas).
struct NormalizationSpec {
    std::vector<Bounds> state;
    std::vector<Bounds> action;

    static NormalizationSpec for_config(const SystemConfig& config);
};

/// Affine maps between physical units and [-1, 1]. Out-of-range inputs are
/// clamped and counted.
class Normalizer {
public:
    explicit Normalizer(NormalizationSpec spec) : spec_(std::move(spec)) {}
    explicit Normalizer(const SystemConfig& config)
        : Normalizer(NormalizationSpec::for_config(config)) {}

    std::vector<double> normalize_state(const SystemState& state);
    std::vector<double> normalize(std::span<const double> values, std::span<const Bounds> bounds);
    std::vector<double> denormalize(std::span<const double> values, std::span<const Bounds> bounds);

    /// Full-length normalized action vector -> physical ContinuousAction.
    ContinuousAction denormalize_action(std::span<const double> normalized);
    std::vector<double> normalize_action(const ContinuousAction& action);

    const NormalizationSpec& spec() const { return spec_; }
    std::uint64_t clamped_count() const { return clamped_; }

private:
    double clamp_unit(double value);

    NormalizationSpec spec_;
    std::uint64_t clamped_ = 0;
};

/// Number of policy outputs under a mask: 1 + F (push) + 2F (cache).
int active_action_dim(int num_tasks, const ActionMask& mask);

/// Expands the learner's active components into a full normalized 3F+1
/// vector; masked components take the normalized value of "no action".
std::vector<double> expand_active_action(std::span<const double> active, int num_tasks,
                                         const ActionMask& mask);

}  // namespace mecsac
