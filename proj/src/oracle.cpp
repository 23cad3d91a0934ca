#include "mecsac/oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

namespace mecsac {

namespace {

std::uint64_t pow_u64(std::uint64_t base, int exp) {
    std::uint64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

std::uint32_t cache_mask_of(const SystemState& s) {
    const int n = static_cast<int>(s.input_cached.size());
    std::uint32_t m = 0;
    for (int f = 0; f < n; ++f) {
        if (s.input_cached[f]) m |= 1u << f;
        if (s.output_cached[f]) m |= 1u << (n + f);
    }
    return m;
}

}  // namespace

std::size_t EnumeratedMdp::num_pairs() const {
    std::size_t n = 0;
    for (const auto& a : actions) n += a.size();
    return n;
}

SystemState EnumeratedMdp::state(std::size_t index) const {
    const int n = num_tasks();
    const auto nc = static_cast<std::size_t>(num_caches());
    SystemState s = SystemState::empty(n, static_cast<int>(index / nc));
    const std::uint32_t m = cache_masks.at(index % nc);
    for (int f = 0; f < n; ++f) {
        s.input_cached[f] = (m >> f) & 1u;
        s.output_cached[f] = (m >> (n + f)) & 1u;
    }
    return s;
}

std::size_t EnumeratedMdp::state_index(const SystemState& s) const {
    const int idx = cache_index.at(cache_mask_of(s));
    if (idx < 0) throw std::out_of_range("state violates the cache capacity");
    return static_cast<std::size_t>(s.request) * cache_masks.size() + static_cast<std::size_t>(idx);
}

SystemAction EnumeratedMdp::action(std::size_t state_index, std::size_t action_index) const {
    return decode_action_code(actions.at(state_index).at(action_index).code, num_tasks(), config.num_cores);
}

std::size_t EnumeratedMdp::find_action(std::size_t state_index, const SystemAction& a) const {
    const std::uint64_t code = encode_action(a, config.num_cores);
    const auto& list = actions.at(state_index);
    for (std::size_t k = 0; k < list.size(); ++k) {
        if (list[k].code == code) return k;
    }
    throw ConfigError("action is not valid in state " + std::to_string(state_index));
}

std::uint64_t encode_action(const SystemAction& a, int num_cores) {
    const int n = static_cast<int>(a.push.size());
    std::uint64_t push = 0;
    for (int f = 0; f < n; ++f) push |= static_cast<std::uint64_t>(a.push[f] ? 1 : 0) << f;
    std::uint64_t digits = 0;
    for (int f = 2 * n - 1; f >= 0; --f) {
        const int d = f < n ? a.cache_delta_input[f] : a.cache_delta_output[f - n];
        digits = digits * 3 + static_cast<std::uint64_t>(d + 1);
    }
    const std::uint64_t rest = push + (std::uint64_t{1} << n) * digits;
    return static_cast<std::uint64_t>(a.reactive_cores) + static_cast<std::uint64_t>(num_cores + 1) * rest;
}

SystemAction decode_action_code(std::uint64_t code, int num_tasks, int num_cores) {
    SystemAction a = SystemAction::idle(num_tasks);
    const auto base = static_cast<std::uint64_t>(num_cores + 1);
    a.reactive_cores = static_cast<int>(code % base);
    std::uint64_t rest = code / base;
    const std::uint64_t pushes = std::uint64_t{1} << num_tasks;
    const std::uint64_t push = rest % pushes;
    std::uint64_t digits = rest / pushes;
    for (int f = 0; f < num_tasks; ++f) a.push[f] = (push >> f) & 1u;
    for (int f = 0; f < 2 * num_tasks; ++f) {
        const auto d = static_cast<std::int8_t>(static_cast<int>(digits % 3) - 1);
        digits /= 3;
        if (f < num_tasks) a.cache_delta_input[f] = d;
        else a.cache_delta_output[f - num_tasks] = d;
    }
    return a;
}

std::uint64_t raw_action_count(int num_tasks, int num_cores) {
    return static_cast<std::uint64_t>(num_cores + 1) * pow_u64(2, num_tasks) * pow_u64(3, 2 * num_tasks);
}

EnumeratedMdp enumerate_mdp(const SystemConfig& config, const TransitionModel& model, double snr,
                            std::uint64_t budget) {
    config.validate();
    model.validate();
    const int n = config.num_tasks();
    if (model.num_tasks() != n) throw ConfigError("transition matrix size does not match num_tasks");
    if (n > 8) throw ConfigError("exact enumeration supports at most 8 tasks");

    EnumeratedMdp mdp;
    mdp.config = config;
    mdp.transition = model.matrix;
    mdp.snr = snr;
    const std::uint32_t masks = 1u << (2 * n);
    mdp.cache_index.assign(masks, -1);
    for (std::uint32_t m = 0; m < masks; ++m) {
        std::int64_t used = 0;
        for (int f = 0; f < n; ++f) {
            if ((m >> f) & 1u) used += config.tasks[f].input_bits;
            if ((m >> (n + f)) & 1u) used += config.tasks[f].output_bits;
        }
        if (used <= config.cache_capacity) {
            mdp.cache_index[m] = static_cast<int>(mdp.cache_masks.size());
            mdp.cache_masks.push_back(m);
        }
    }
    const std::size_t states = static_cast<std::size_t>(n) * mdp.cache_masks.size();
    mdp.actions.resize(states);

    std::uint64_t pairs = 0;
    for (std::size_t s = 0; s < states; ++s) {
        const SystemState st = mdp.state(s);
        auto& list = mdp.actions[s];
        SystemAction a = SystemAction::idle(n);
        // Depth-first over delta components restricted to their windows; the
        // full check is still delegated to validate_action.
        std::function<void(int)> deltas = [&](int k) {
            if (k == 2 * n) {
                if (!validate_action(st, a, config).ok()) return;
                if (++pairs > budget) {
                    throw ConfigError("enumeration budget exceeded: " + std::to_string(states) + " states, more than " +
                                      std::to_string(budget) + " valid state-action pairs (raw action space " +
                                      std::to_string(raw_action_count(n, config.num_cores)) + " per state)");
                }
                const CostBreakdown cost = evaluate_cost(st, a, snr, config);
                SystemState next = st;
                for (int f = 0; f < n; ++f) {
                    next.input_cached[f] = static_cast<std::uint8_t>(st.input_cached[f] + a.cache_delta_input[f]);
                    next.output_cached[f] = static_cast<std::uint8_t>(st.output_cached[f] + a.cache_delta_output[f]);
                }
                list.push_back(MdpAction{encode_action(a, config.num_cores), -cost.reward,
                                         mdp.cache_index[cache_mask_of(next)]});
                return;
            }
            const bool output = k >= n;
            const int f = output ? k - n : k;
            const int cores = f == st.request ? a.reactive_cores : 0;
            const int s_bit = output ? st.output_cached[f] : st.input_cached[f];
            const int hi = output ? std::min(cores, 1 - s_bit) : std::min(a.push[f] + cores, 1 - s_bit);
            for (int d = -s_bit; d <= hi; ++d) {
                (output ? a.cache_delta_output : a.cache_delta_input)[f] = static_cast<std::int8_t>(d);
                deltas(k + 1);
            }
            (output ? a.cache_delta_output : a.cache_delta_input)[f] = 0;
        };
        for (int c = 0; c <= config.num_cores; ++c) {
            a.reactive_cores = c;
            for (std::uint32_t p = 0; p < (1u << n); ++p) {
                for (int f = 0; f < n; ++f) a.push[f] = (p >> f) & 1u;
                deltas(0);
            }
        }
    }
    return mdp;
}

namespace {

// W[r][c] = sum_r' Q[r][r'] V(r', c)
std::vector<double> expected_next(const EnumeratedMdp& mdp, const std::vector<double>& v) {
    const int n = mdp.num_tasks();
    const int nc = mdp.num_caches();
    std::vector<double> w(static_cast<std::size_t>(n) * nc, 0.0);
    for (int r = 0; r < n; ++r)
        for (int r2 = 0; r2 < n; ++r2) {
            const double q = mdp.transition[r][r2];
            if (q == 0.0) continue;
            for (int c = 0; c < nc; ++c) w[r * nc + c] += q * v[r2 * nc + c];
        }
    return w;
}

}  // namespace

ValueIterationResult value_iteration(const EnumeratedMdp& mdp, double gamma, double tolerance, int max_sweeps) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("discount must be in (0,1)");
    const std::size_t states = mdp.num_states();
    const int nc = mdp.num_caches();
    ValueIterationResult out;
    std::vector<double> v(states, 0.0), next(states);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const std::vector<double> w = expected_next(mdp, v);
        double residual = 0.0;
        for (std::size_t s = 0; s < states; ++s) {
            const std::size_t r = s / static_cast<std::size_t>(nc);
            double best = std::numeric_limits<double>::infinity();
            for (const MdpAction& a : mdp.actions[s]) {
                best = std::min(best, a.cost + gamma * w[r * nc + a.next_cache]);
            }
            next[s] = best;
            residual = std::max(residual, std::abs(best - v[s]));
        }
        v.swap(next);
        out.residuals.push_back(residual);
        if (residual < tolerance) break;
    }
    const std::vector<double> w = expected_next(mdp, v);
    out.policy.resize(states);
    for (std::size_t s = 0; s < states; ++s) {
        const std::size_t r = s / static_cast<std::size_t>(nc);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < mdp.actions[s].size(); ++k) {
            const MdpAction& a = mdp.actions[s][k];
            const double q = a.cost + gamma * w[r * nc + a.next_cache];
            if (q < best) {
                best = q;
                out.policy[s] = k;
            }
        }
    }
    out.values = std::move(v);
    out.optimal_cost = start_cost(mdp, out.values);
    return out;
}

std::vector<double> evaluate_policy(const EnumeratedMdp& mdp, const std::vector<std::size_t>& policy, double gamma) {
    const std::size_t states = mdp.num_states();
    if (policy.size() != states) throw ConfigError("policy does not cover every state");
    const int n = mdp.num_tasks();
    const int nc = mdp.num_caches();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
    Eigen::VectorXd b(static_cast<Eigen::Index>(states));
    for (std::size_t s = 0; s < states; ++s) {
        if (policy[s] >= mdp.actions[s].size()) {
            throw ConfigError("policy action index out of range in state " + std::to_string(s));
        }
        const MdpAction& act = mdp.actions[s][policy[s]];
        b[static_cast<Eigen::Index>(s)] = act.cost;
        const std::size_t r = s / static_cast<std::size_t>(nc);
        for (int r2 = 0; r2 < n; ++r2) {
            a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r2 * nc + act.next_cache)) -=
                gamma * mdp.transition[r][r2];
        }
    }
    const Eigen::VectorXd v = a.partialPivLu().solve(b);
    return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> evaluate_policy(const EnumeratedMdp& mdp, const std::vector<SystemAction>& policy, double gamma) {
    if (policy.size() != mdp.num_states()) throw ConfigError("policy does not cover every state");
    std::vector<std::size_t> index(policy.size());
    for (std::size_t s = 0; s < policy.size(); ++s) {
        const SystemState st = mdp.state(s);
        const ValidationResult verdict = validate_action(st, policy[s], mdp.config);
        if (!verdict.ok()) {
            throw ConfigError("invalid action in state " + std::to_string(s) + " (request " +
                              std::to_string(st.request + 1) + ", cache " + bits_string(st.input_cached) + "/" +
                              bits_string(st.output_cached) + "): " + verdict.describe());
        }
        index[s] = mdp.find_action(s, policy[s]);
    }
    return evaluate_policy(mdp, index, gamma);
}

double start_cost(const EnumeratedMdp& mdp, const std::vector<double>& values) {
    TransitionModel model;
    model.matrix = mdp.transition;
    const std::vector<double> p = stationary_distribution(model);
    const int empty = mdp.cache_index.at(0);
    double total = 0.0;
    for (int f = 0; f < mdp.num_tasks(); ++f) total += p[f] * values.at(static_cast<std::size_t>(f) * mdp.num_caches() + empty);
    return total;
}

void write_value_csv(std::ostream& out, const EnumeratedMdp& mdp, const ValueIterationResult& result) {
    out << "state,request,input_cached,output_cached,value,cores,push,delta_input,delta_output\n";
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        const SystemState st = mdp.state(s);
        const SystemAction a = mdp.action(s, result.policy.at(s));
        out << s << ',' << st.request + 1 << ',' << bits_string(st.input_cached) << ','
            << bits_string(st.output_cached) << ',' << format_double(result.values.at(s)) << ',' << a.reactive_cores
            << ',' << bits_string(a.push) << ',' << delta_string(a.cache_delta_input) << ','
            << delta_string(a.cache_delta_output) << '\n';
    }
}

}  // namespace mecsac
