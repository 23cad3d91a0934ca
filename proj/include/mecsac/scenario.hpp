#pragma once

// Scenario assembly and the flat key-value configuration format.
//
// Format: one `key = value` per line, `#` starts a comment, blank lines are
// ignored. Keys written by save_scenario:
//
//   num_tasks, cache_capacity, num_cores, core_frequency, slot_length,
//   switched_capacitance, cost_weight, reward_scale, discount
//   task.<f>        = <input_bits> <output_bits> <cycles_per_bit>   (f = 1..F)
//   transition.<i>  = <q_i1> <q_i2> ... <q_iF>                       (i = 1..F)
//   snr_change_period = <epochs>
//   snr_schedule    = <epoch>:<snr> <epoch>:<snr> ...
//
// Generator keys (used when task.* / transition.* are absent):
//   p_max, input_bits, output_bits, cycles_per_bit, size_offset,
//   scenario_seed, snr_mode (fixed|dynamic), snr, snr_values, schedule_epochs

#include "mecsac/env.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mecsac {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::string& path);
void write_key_values(std::ostream& out, const KeyValues& kv);

/// Typed accessors; throw ConfigError with the key name on malformed values.
double get_double(const KeyValues& kv, const std::string& key, double fallback);
std::int64_t get_int(const KeyValues& kv, const std::string& key, std::int64_t fallback);
std::string get_string(const KeyValues& kv, const std::string& key, const std::string& fallback);
std::vector<double> parse_double_list(const std::string& text, const std::string& key);

/// Canonical %.17g rendering used by every CSV and config writer.
std::string format_double(double value);

KeyValues to_key_values(const SystemConfig& config);
SystemConfig system_config_from(const KeyValues& kv);
KeyValues to_key_values(const TransitionModel& model);
TransitionModel transition_model_from(const KeyValues& kv);

enum class SnrMode { Fixed, Dynamic };

/// Generator parameters for a synthetic scenario. Defaults reproduce the
/// reference configuration (F=4, M=8, C=40000 bits, p_max=0.7, lambda=1, ...).
struct ScenarioParams {
    int num_tasks = 4;
    std::int64_t cache_capacity = 40000;
    int num_cores = 8;
    double p_max = 0.7;
    double core_frequency = 1.7e8;
    std::int64_t input_bits = 16000;
    std::int64_t output_bits = 30000;
    double cycles_per_bit = 800.0;
    double slot_length = 0.02;
    double switched_capacitance = 1e-19;
    double cost_weight = 1.0;
    double reward_scale = 1e-6;
    double discount = 0.99;
    double size_offset = 0.1;
    std::uint64_t seed = 1;

    SnrMode snr_mode = SnrMode::Fixed;
    double snr = 1.0;
    std::vector<double> snr_values{0.5, 1.0, 2.0, 3.0};
    int snr_change_period = 300;
    int schedule_epochs = 1500;
};

ScenarioParams scenario_params_from(const KeyValues& kv, ScenarioParams base = {});
KeyValues to_key_values(const ScenarioParams& params);

struct Scenario {
    SystemConfig config;
    TransitionModel model;

    void validate() const {
        config.validate();
        model.validate();
        if (model.num_tasks() != config.num_tasks()) {
            throw ConfigError("transition matrix size does not match num_tasks");
        }
    }
};

/// Dynamic schedule: starts at `initial`, then every `period` epochs switches
/// to a value drawn uniformly from the other entries of `values`.
std::vector<SnrChange> make_snr_schedule(double initial, const std::vector<double>& values,
                                         int period, int total_epochs, std::uint64_t seed);

Scenario build_scenario(const ScenarioParams& params);

/// Materialized task/transition keys override the generator when present.
Scenario scenario_from(const KeyValues& kv);

void save_scenario(const std::string& path, const Scenario& scenario);
Scenario load_scenario(const std::string& path);

/// FNV-1a over the canonical key-value serialization.
std::uint64_t config_hash(const Scenario& scenario);
std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t value);

// ---------------------------------------------------------------------------
// Trace CSV: t,request,snr,cache_input,cache_output,cores,push,delta_input,
// delta_output,reactive_bandwidth,push_bandwidth,reactive_energy,
// total_bandwidth,energy,weighted_cost,reward
//
// Bit vectors render as digit strings ("0110"); deltas as '+', '0', '-'.
// `request` is 1-based.

struct TraceRecord {
    long t = 0;
    SystemState state;
    double snr = 1.0;
    SystemAction action;
    CostBreakdown cost;
};

void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceRecord& record);
std::vector<TraceRecord> read_trace_csv(std::istream& in);

std::string bits_string(const std::vector<std::uint8_t>& bits);
std::string delta_string(const std::vector<std::int8_t>& deltas);

}  // namespace mecsac
