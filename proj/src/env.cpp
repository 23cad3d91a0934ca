#include "mecsac/env.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

namespace mecsac {

namespace {

// Tasks reachable from `start` over the support graph (optionally reversed).
std::vector<bool> reachable(const std::vector<std::vector<double>>& q, int start, bool reverse) {
    const int n = static_cast<int>(q.size());
    std::vector<bool> seen(n, false);
    std::queue<int> frontier;
    seen[start] = true;
    frontier.push(start);
    while (!frontier.empty()) {
        const int i = frontier.front();
        frontier.pop();
        for (int j = 0; j < n; ++j) {
            const double w = reverse ? q[j][i] : q[i][j];
            if (w > 0.0 && !seen[j]) {
                seen[j] = true;
                frontier.push(j);
            }
        }
    }
    return seen;
}

double shannon_efficiency(double snr) {
    if (!(snr > 0.0) || !std::isfinite(snr)) {
        throw ConfigError("snr must be a positive finite linear ratio, got " + std::to_string(snr));
    }
    return std::log2(1.0 + snr);
}

int cores_for(const SystemAction& action, const SystemState& state, int task) {
    return task == state.request ? action.reactive_cores : 0;
}

}  // namespace

// ---------------------------------------------------------------------------

void SystemConfig::validate() const {
    if (tasks.empty()) throw ConfigError("num_tasks must be positive");
    for (std::size_t f = 0; f < tasks.size(); ++f) {
        const Task& t = tasks[f];
        if (t.input_bits <= 0 || t.output_bits <= 0 || !(t.cycles_per_bit > 0.0)) {
            throw ConfigError("task " + std::to_string(f + 1) +
                              ": input_bits, output_bits and cycles_per_bit must be positive");
        }
    }
    if (cache_capacity < 0) throw ConfigError("cache_capacity must be non-negative");
    if (num_cores < 1) throw ConfigError("num_cores must be positive");
    if (!(core_frequency > 0.0)) throw ConfigError("core_frequency must be positive");
    if (!(slot_length > 0.0)) throw ConfigError("slot_length must be positive");
    if (!(switched_capacitance > 0.0)) throw ConfigError("switched_capacitance must be positive");
    if (!(cost_weight >= 0.0)) throw ConfigError("cost_weight must be non-negative");
    if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
    if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("discount must lie in (0,1)");
    for (int f = 0; f < num_tasks(); ++f) {
        if (min_workable_cores(*this, f, false) > num_cores) {
            throw ConfigError("task " + std::to_string(f + 1) +
                              " cannot be downloaded and computed within slot_length using all " +
                              std::to_string(num_cores) + " cores");
        }
    }
}

double TransitionModel::snr_at_epoch(int epoch) const {
    double snr = snr_schedule.empty() ? 1.0 : snr_schedule.front().snr;
    for (const SnrChange& c : snr_schedule) {
        if (c.epoch <= epoch) snr = c.snr;
    }
    return snr;
}

void TransitionModel::validate() const {
    const int n = num_tasks();
    if (n == 0) throw ConfigError("transition matrix is empty");
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(matrix[i].size()) != n) {
            throw ConfigError("transition matrix row " + std::to_string(i + 1) + " has " +
                              std::to_string(matrix[i].size()) + " entries, expected " +
                              std::to_string(n));
        }
        double sum = 0.0;
        for (double v : matrix[i]) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw ConfigError("transition matrix row " + std::to_string(i + 1) +
                                  " has a negative or non-finite entry");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            std::ostringstream os;
            os.precision(17);
            os << "transition matrix row " << i + 1 << " sums to " << sum;
            throw ConfigError(os.str());
        }
    }
    stationary_distribution(*this);  // irreducibility
    if (snr_change_period < 1) throw ConfigError("snr_change_period must be positive");
    if (snr_schedule.empty()) throw ConfigError("snr_schedule is empty");
    for (const SnrChange& c : snr_schedule) {
        if (!(c.snr > 0.0)) throw ConfigError("snr values must be positive");
    }
}

SystemState SystemState::empty(int num_tasks, int request) {
    SystemState s;
    s.request = request;
    s.input_cached.assign(num_tasks, 0);
    s.output_cached.assign(num_tasks, 0);
    return s;
}

SystemAction SystemAction::idle(int num_tasks) {
    SystemAction a;
    a.push.assign(num_tasks, 0);
    a.cache_delta_input.assign(num_tasks, 0);
    a.cache_delta_output.assign(num_tasks, 0);
    return a;
}

std::string ValidationResult::describe() const {
    if (violations.empty()) return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        const Violation& v = violations[i];
        if (i) os << "; ";
        os << v.constraint;
        if (v.task >= 0) os << "[task " << v.task + 1 << "]";
        if (!v.detail.empty()) os << ": " << v.detail;
    }
    return os.str();
}

InvalidAction::InvalidAction(ValidationResult verdict)
    : std::runtime_error("invalid action: " + verdict.describe()), verdict_(std::move(verdict)) {}

// ---------------------------------------------------------------------------

std::vector<double> stationary_distribution(const TransitionModel& model) {
    const auto& q = model.matrix;
    const int n = static_cast<int>(q.size());
    if (n == 0) throw ConfigError("transition matrix is empty");

    const auto forward = reachable(q, 0, false);
    const auto backward = reachable(q, 0, true);
    std::vector<int> stranded;
    for (int i = 0; i < n; ++i) {
        if (!forward[i] || !backward[i]) stranded.push_back(i);
    }
    if (!stranded.empty()) {
        std::ostringstream os;
        os << "request chain is not irreducible: tasks {";
        for (std::size_t k = 0; k < stranded.size(); ++k) os << (k ? "," : "") << stranded[k] + 1;
        os << "} are not mutually reachable with task 1";
        throw ConfigError(os.str());
    }

    // Solve (Q^T - I) p = 0 with the last equation replaced by sum(p) = 1.
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = q[j][i] - (i == j ? 1.0 : 0.0);
    }
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    const Eigen::VectorXd p = a.fullPivLu().solve(rhs);

    std::vector<double> out(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::max(0.0, p(i));
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

std::vector<std::vector<double>> build_transition_matrix(int num_tasks, double p_max,
                                                         std::uint64_t seed) {
    if (num_tasks < 2) throw ConfigError("build_transition_matrix needs at least 2 tasks");
    if (!(p_max > 0.0 && p_max < 1.0)) {
        throw ConfigError("p_max must lie in (0,1), got " + std::to_string(p_max));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, num_tasks - 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<double>> q(num_tasks, std::vector<double>(num_tasks, 0.0));
    for (int i = 0; i < num_tasks; ++i) {
        int j = pick(rng);
        if (j >= i) ++j;
        std::vector<double> weight(num_tasks, 0.0);
        double total = 0.0;
        for (int k = 0; k < num_tasks; ++k) {
            if (k == j) continue;
            weight[k] = 1.0 - unit(rng);  // (0,1]
            total += weight[k];
        }
        for (int k = 0; k < num_tasks; ++k) {
            q[i][k] = (k == j) ? p_max : (1.0 - p_max) * weight[k] / total;
        }
    }
    return q;
}

int sample_index(const std::vector<double>& probabilities, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i] <= 0.0) continue;
        acc += probabilities[i];
        last_positive = static_cast<int>(i);
        if (u < acc) return last_positive;
    }
    return last_positive;
}

int sample_next_request(const TransitionModel& model, int current, std::mt19937_64& rng) {
    return sample_index(model.matrix[current], rng);
}

std::vector<int> sample_request_trace(const TransitionModel& model, std::size_t length,
                                      std::uint64_t seed) {
    std::vector<int> trace;
    if (length == 0) return trace;
    trace.reserve(length);
    std::mt19937_64 rng(seed);
    trace.push_back(sample_index(stationary_distribution(model), rng));
    while (trace.size() < length) trace.push_back(sample_next_request(model, trace.back(), rng));
    return trace;
}

// ---------------------------------------------------------------------------

std::vector<Task> make_tasks(int num_tasks, std::int64_t input_base, std::int64_t output_base,
                             double cycles_per_bit, double offset_fraction, std::uint64_t seed) {
    if (num_tasks < 1) throw ConfigError("num_tasks must be positive");
    if (input_base <= 0 || output_base <= 0) throw ConfigError("base task sizes must be positive");
    if (!(offset_fraction >= 0.0 && offset_fraction < 1.0)) {
        throw ConfigError("size offset fraction must lie in [0,1)");
    }
    std::mt19937_64 rng(seed);
    const auto in_span = static_cast<std::int64_t>(std::llround(offset_fraction * input_base));
    const auto out_span = static_cast<std::int64_t>(std::llround(offset_fraction * output_base));
    std::uniform_int_distribution<std::int64_t> in_off(-in_span, in_span);
    std::uniform_int_distribution<std::int64_t> out_off(-out_span, out_span);

    std::vector<Task> tasks(num_tasks);
    for (Task& t : tasks) {
        t.input_bits = input_base + (in_span > 0 ? in_off(rng) : 0);
        t.output_bits = output_base + (out_span > 0 ? out_off(rng) : 0);
        t.cycles_per_bit = cycles_per_bit;
    }
    return tasks;
}

int min_workable_cores(const SystemConfig& config, int task, bool input_cached) {
    const Task& t = config.tasks.at(task);
    const double ratio = static_cast<double>(t.input_bits) * t.cycles_per_bit /
                         (config.slot_length * config.core_frequency);
    if (input_cached) return std::max(1, static_cast<int>(std::ceil(ratio)));
    return static_cast<int>(std::floor(ratio)) + 1;
}

std::int64_t cache_usage(const SystemConfig& config, const SystemState& state) {
    std::int64_t used = 0;
    for (int f = 0; f < config.num_tasks(); ++f) {
        used += config.tasks[f].input_bits * state.input_cached[f] +
                config.tasks[f].output_bits * state.output_cached[f];
    }
    return used;
}

std::int64_t cache_usage_after(const SystemConfig& config, const SystemState& state,
                               const SystemAction& action) {
    std::int64_t used = 0;
    for (int f = 0; f < config.num_tasks(); ++f) {
        used += config.tasks[f].input_bits * (state.input_cached[f] + action.cache_delta_input[f]) +
                config.tasks[f].output_bits * (state.output_cached[f] + action.cache_delta_output[f]);
    }
    return used;
}

ValidationResult validate_action(const SystemState& state, const SystemAction& action,
                                 const SystemConfig& config) {
    ValidationResult verdict;
    auto flag = [&](std::string constraint, int task, std::string detail) {
        verdict.violations.push_back({std::move(constraint), task, std::move(detail)});
    };

    const int n = config.num_tasks();
    const auto sized = [n](const auto& v) { return static_cast<int>(v.size()) == n; };
    if (state.request < 0 || state.request >= n || !sized(state.input_cached) ||
        !sized(state.output_cached) || !sized(action.push) || !sized(action.cache_delta_input) ||
        !sized(action.cache_delta_output)) {
        flag("shape", -1, "state/action vectors do not match num_tasks");
        return verdict;
    }
    for (int f = 0; f < n; ++f) {
        if (action.push[f] > 1 || std::abs(action.cache_delta_input[f]) > 1 ||
            std::abs(action.cache_delta_output[f]) > 1) {
            flag("shape", f, "push must be 0/1 and cache deltas in {-1,0,1}");
        }
    }
    if (!verdict.ok()) return verdict;

    const int req = state.request;
    const int cores = action.reactive_cores;
    const bool output_hit = state.output_cached[req] != 0;
    const int core_limit = output_hit ? 0 : config.num_cores;
    if (cores < 0 || cores > core_limit) {
        flag("core-limit", req,
             "reactive_cores=" + std::to_string(cores) + " outside [0," +
                 std::to_string(core_limit) + "]");
    } else if (!output_hit) {
        const int floor = min_workable_cores(config, req, state.input_cached[req] != 0);
        if (cores < floor) {
            flag("latency", req,
                 "reactive_cores=" + std::to_string(cores) + " below minimum workable " +
                     std::to_string(floor));
        }
    }

    for (int f = 0; f < n; ++f) {
        const int c = cores_for(action, state, f);
        const int s_in = state.input_cached[f];
        const int s_out = state.output_cached[f];
        const int d_in = action.cache_delta_input[f];
        const int d_out = action.cache_delta_output[f];
        const int in_hi = std::min(action.push[f] + c, 1 - s_in);
        if (d_in < -s_in || d_in > in_hi) {
            flag("input-window", f,
                 "delta=" + std::to_string(d_in) + " outside [" + std::to_string(-s_in) + "," +
                     std::to_string(in_hi) + "]");
        }
        const int out_hi = std::min(c, 1 - s_out);
        if (d_out < -s_out || d_out > out_hi) {
            flag("output-window", f,
                 "delta=" + std::to_string(d_out) + " outside [" + std::to_string(-s_out) + "," +
                     std::to_string(out_hi) + "]");
        }
    }

    const std::int64_t used = cache_usage_after(config, state, action);
    if (used > config.cache_capacity) {
        flag("capacity", -1,
             "updated cache holds " + std::to_string(used) + " bits > C=" +
                 std::to_string(config.cache_capacity));
    }
    return verdict;
}

double reactive_bandwidth(const SystemState& state, const SystemAction& action, double snr,
                          const SystemConfig& config) {
    const int req = state.request;
    const int gate = (1 - state.input_cached[req]) * (1 - state.output_cached[req]);
    if (gate == 0) return 0.0;
    const Task& t = config.tasks[req];
    const int cores = action.reactive_cores;
    const double compute_time =
        cores > 0 ? static_cast<double>(t.input_bits) * t.cycles_per_bit /
                        (cores * config.core_frequency)
                  : std::numeric_limits<double>::infinity();
    const double remaining = config.slot_length - compute_time;
    if (!(remaining > 0.0)) {
        throw LatencyInfeasible("latency infeasible: " + std::to_string(cores) +
                                " cores leave no time to download task " + std::to_string(req + 1));
    }
    return static_cast<double>(t.input_bits) / (remaining * shannon_efficiency(snr));
}

double reactive_energy(const SystemState& state, const SystemAction& action,
                       const SystemConfig& config) {
    const int req = state.request;
    const Task& t = config.tasks[req];
    const double c = action.reactive_cores;
    return (1 - state.output_cached[req]) * config.switched_capacitance * c * c *
           config.core_frequency * config.core_frequency * static_cast<double>(t.input_bits) *
           t.cycles_per_bit;
}

double push_bandwidth(const SystemAction& action, double snr, const SystemConfig& config) {
    std::int64_t bits = 0;
    for (int f = 0; f < config.num_tasks(); ++f) bits += config.tasks[f].input_bits * action.push[f];
    if (bits == 0) return 0.0;
    return static_cast<double>(bits) / (config.slot_length * shannon_efficiency(snr));
}

CostBreakdown evaluate_cost(const SystemState& state, const SystemAction& action, double snr,
                            const SystemConfig& config) {
    CostBreakdown c;
    c.reactive_bandwidth = reactive_bandwidth(state, action, snr, config);
    c.push_bandwidth = push_bandwidth(action, snr, config);
    c.reactive_energy = reactive_energy(state, action, config);
    c.total_bandwidth = c.reactive_bandwidth + c.push_bandwidth;
    c.energy = c.reactive_energy;
    c.weighted_cost = c.total_bandwidth + config.cost_weight * c.energy;
    c.reward = -config.reward_scale * c.weighted_cost;
    return c;
}

StepResult step(const SystemState& state, const SystemAction& action, double snr,
                int next_request, const SystemConfig& config) {
    ValidationResult verdict = validate_action(state, action, config);
    if (!verdict.ok()) throw InvalidAction(std::move(verdict));
    if (next_request < 0 || next_request >= config.num_tasks()) {
        throw ConfigError("next_request out of range: " + std::to_string(next_request));
    }

    StepResult out;
    out.cost = evaluate_cost(state, action, snr, config);
    out.next.request = next_request;
    out.next.input_cached = state.input_cached;
    out.next.output_cached = state.output_cached;
    for (int f = 0; f < config.num_tasks(); ++f) {
        out.next.input_cached[f] =
            static_cast<std::uint8_t>(state.input_cached[f] + action.cache_delta_input[f]);
        out.next.output_cached[f] =
            static_cast<std::uint8_t>(state.output_cached[f] + action.cache_delta_output[f]);
    }
    return out;
}

}  // namespace mecsac
