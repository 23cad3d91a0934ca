#include "mecsac/scenario.hpp"

#include "mecsac/rng.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mecsac {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double to_double(const std::string& text, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (trim(text.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("key '" + key + "': expected a number, got '" + text + "'");
}

std::int64_t to_int(const std::string& text, const std::string& key) {
    const double v = to_double(text, key);
    const auto i = static_cast<std::int64_t>(v);
    if (static_cast<double>(i) != v) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + text + "'");
    }
    return i;
}

std::vector<std::string> split_ws(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_key_values(in);
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

double get_double(const KeyValues& kv, const std::string& key, double fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : to_double(it->second, key);
}

std::int64_t get_int(const KeyValues& kv, const std::string& key, std::int64_t fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : to_int(it->second, key);
}

std::string get_string(const KeyValues& kv, const std::string& key, const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& key) {
    std::string normalized = text;
    std::replace(normalized.begin(), normalized.end(), ',', ' ');
    std::vector<double> out;
    for (const auto& tok : split_ws(normalized)) out.push_back(to_double(tok, key));
    return out;
}

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

// ---------------------------------------------------------------------------

KeyValues to_key_values(const SystemConfig& config) {
    KeyValues kv;
    kv["num_tasks"] = std::to_string(config.num_tasks());
    kv["cache_capacity"] = std::to_string(config.cache_capacity);
    kv["num_cores"] = std::to_string(config.num_cores);
    kv["core_frequency"] = format_double(config.core_frequency);
    kv["slot_length"] = format_double(config.slot_length);
    kv["switched_capacitance"] = format_double(config.switched_capacitance);
    kv["cost_weight"] = format_double(config.cost_weight);
    kv["reward_scale"] = format_double(config.reward_scale);
    kv["discount"] = format_double(config.discount);
    for (int f = 0; f < config.num_tasks(); ++f) {
        const Task& t = config.tasks[f];
        kv["task." + std::to_string(f + 1)] = std::to_string(t.input_bits) + " " +
                                              std::to_string(t.output_bits) + " " +
                                              format_double(t.cycles_per_bit);
    }
    return kv;
}

SystemConfig system_config_from(const KeyValues& kv) {
    SystemConfig c;
    const auto n = get_int(kv, "num_tasks", -1);
    if (n < 1) throw ConfigError("key 'num_tasks' is required and must be positive");
    for (std::int64_t f = 1; f <= n; ++f) {
        const std::string key = "task." + std::to_string(f);
        const auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError("missing key '" + key + "'");
        const auto parts = split_ws(it->second);
        if (parts.size() != 3) {
            throw ConfigError("key '" + key + "': expected '<input_bits> <output_bits> <cycles_per_bit>'");
        }
        c.tasks.push_back({to_int(parts[0], key), to_int(parts[1], key), to_double(parts[2], key)});
    }
    c.cache_capacity = get_int(kv, "cache_capacity", c.cache_capacity);
    c.num_cores = static_cast<int>(get_int(kv, "num_cores", c.num_cores));
    c.core_frequency = get_double(kv, "core_frequency", c.core_frequency);
    c.slot_length = get_double(kv, "slot_length", c.slot_length);
    c.switched_capacitance = get_double(kv, "switched_capacitance", c.switched_capacitance);
    c.cost_weight = get_double(kv, "cost_weight", c.cost_weight);
    c.reward_scale = get_double(kv, "reward_scale", c.reward_scale);
    c.discount = get_double(kv, "discount", c.discount);
    return c;
}

KeyValues to_key_values(const TransitionModel& model) {
    KeyValues kv;
    for (int i = 0; i < model.num_tasks(); ++i) {
        std::string row;
        for (int j = 0; j < model.num_tasks(); ++j) {
            if (j) row += ' ';
            row += format_double(model.matrix[i][j]);
        }
        kv["transition." + std::to_string(i + 1)] = row;
    }
    kv["snr_change_period"] = std::to_string(model.snr_change_period);
    std::string schedule;
    for (std::size_t k = 0; k < model.snr_schedule.size(); ++k) {
        if (k) schedule += ' ';
        schedule += std::to_string(model.snr_schedule[k].epoch) + ":" +
                    format_double(model.snr_schedule[k].snr);
    }
    kv["snr_schedule"] = schedule;
    return kv;
}

TransitionModel transition_model_from(const KeyValues& kv) {
    TransitionModel m;
    for (int i = 1;; ++i) {
        const auto it = kv.find("transition." + std::to_string(i));
        if (it == kv.end()) break;
        m.matrix.push_back(parse_double_list(it->second, it->first));
    }
    if (m.matrix.empty()) throw ConfigError("missing key 'transition.1'");
    m.snr_change_period = static_cast<int>(get_int(kv, "snr_change_period", m.snr_change_period));
    if (const auto it = kv.find("snr_schedule"); it != kv.end()) {
        m.snr_schedule.clear();
        for (const auto& tok : split_ws(it->second)) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos) {
                throw ConfigError("key 'snr_schedule': entries must be <epoch>:<snr>, got '" + tok + "'");
            }
            m.snr_schedule.push_back({static_cast<int>(to_int(tok.substr(0, colon), "snr_schedule")),
                                      to_double(tok.substr(colon + 1), "snr_schedule")});
        }
        std::stable_sort(m.snr_schedule.begin(), m.snr_schedule.end(),
                         [](const SnrChange& a, const SnrChange& b) { return a.epoch < b.epoch; });
    }
    return m;
}

ScenarioParams scenario_params_from(const KeyValues& kv, ScenarioParams p) {
    p.num_tasks = static_cast<int>(get_int(kv, "num_tasks", p.num_tasks));
    p.cache_capacity = get_int(kv, "cache_capacity", p.cache_capacity);
    p.num_cores = static_cast<int>(get_int(kv, "num_cores", p.num_cores));
    p.p_max = get_double(kv, "p_max", p.p_max);
    p.core_frequency = get_double(kv, "core_frequency", p.core_frequency);
    p.input_bits = get_int(kv, "input_bits", p.input_bits);
    p.output_bits = get_int(kv, "output_bits", p.output_bits);
    p.cycles_per_bit = get_double(kv, "cycles_per_bit", p.cycles_per_bit);
    p.slot_length = get_double(kv, "slot_length", p.slot_length);
    p.switched_capacitance = get_double(kv, "switched_capacitance", p.switched_capacitance);
    p.cost_weight = get_double(kv, "cost_weight", p.cost_weight);
    p.reward_scale = get_double(kv, "reward_scale", p.reward_scale);
    p.discount = get_double(kv, "discount", p.discount);
    p.size_offset = get_double(kv, "size_offset", p.size_offset);
    p.seed = static_cast<std::uint64_t>(get_int(kv, "scenario_seed", static_cast<std::int64_t>(p.seed)));
    const std::string mode = get_string(kv, "snr_mode", p.snr_mode == SnrMode::Fixed ? "fixed" : "dynamic");
    if (mode == "fixed") {
        p.snr_mode = SnrMode::Fixed;
    } else if (mode == "dynamic") {
        p.snr_mode = SnrMode::Dynamic;
    } else {
        throw ConfigError("key 'snr_mode': expected fixed|dynamic, got '" + mode + "'");
    }
    p.snr = get_double(kv, "snr", p.snr);
    if (const auto it = kv.find("snr_values"); it != kv.end()) {
        p.snr_values = parse_double_list(it->second, "snr_values");
    }
    p.snr_change_period = static_cast<int>(get_int(kv, "snr_change_period", p.snr_change_period));
    p.schedule_epochs = static_cast<int>(get_int(kv, "schedule_epochs", p.schedule_epochs));
    return p;
}

KeyValues to_key_values(const ScenarioParams& p) {
    KeyValues kv;
    kv["num_tasks"] = std::to_string(p.num_tasks);
    kv["cache_capacity"] = std::to_string(p.cache_capacity);
    kv["num_cores"] = std::to_string(p.num_cores);
    kv["p_max"] = format_double(p.p_max);
    kv["core_frequency"] = format_double(p.core_frequency);
    kv["input_bits"] = std::to_string(p.input_bits);
    kv["output_bits"] = std::to_string(p.output_bits);
    kv["cycles_per_bit"] = format_double(p.cycles_per_bit);
    kv["slot_length"] = format_double(p.slot_length);
    kv["switched_capacitance"] = format_double(p.switched_capacitance);
    kv["cost_weight"] = format_double(p.cost_weight);
    kv["reward_scale"] = format_double(p.reward_scale);
    kv["discount"] = format_double(p.discount);
    kv["size_offset"] = format_double(p.size_offset);
    kv["scenario_seed"] = std::to_string(p.seed);
    kv["snr_mode"] = p.snr_mode == SnrMode::Fixed ? "fixed" : "dynamic";
    kv["snr"] = format_double(p.snr);
    std::string values;
    for (std::size_t i = 0; i < p.snr_values.size(); ++i) {
        values += (i ? "," : "") + format_double(p.snr_values[i]);
    }
    kv["snr_values"] = values;
    kv["snr_change_period"] = std::to_string(p.snr_change_period);
    kv["schedule_epochs"] = std::to_string(p.schedule_epochs);
    return kv;
}

std::vector<SnrChange> make_snr_schedule(double initial, const std::vector<double>& values,
                                         int period, int total_epochs, std::uint64_t seed) {
    if (period < 1) throw ConfigError("snr_change_period must be positive");
    std::vector<SnrChange> schedule{{0, initial}};
    std::mt19937_64 rng(seed);
    for (int epoch = period; epoch < total_epochs; epoch += period) {
        std::vector<double> others;
        for (double v : values) {
            if (v != schedule.back().snr) others.push_back(v);
        }
        if (others.empty()) break;
        std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
        schedule.push_back({epoch, others[pick(rng)]});
    }
    return schedule;
}

Scenario build_scenario(const ScenarioParams& p) {
    Scenario s;
    s.config.tasks = make_tasks(p.num_tasks, p.input_bits, p.output_bits, p.cycles_per_bit,
                                p.size_offset, derive_seed(p.seed, 1));
    s.config.cache_capacity = p.cache_capacity;
    s.config.num_cores = p.num_cores;
    s.config.core_frequency = p.core_frequency;
    s.config.slot_length = p.slot_length;
    s.config.switched_capacitance = p.switched_capacitance;
    s.config.cost_weight = p.cost_weight;
    s.config.reward_scale = p.reward_scale;
    s.config.discount = p.discount;

    s.model.matrix = p.num_tasks == 1
                         ? std::vector<std::vector<double>>{{1.0}}
                         : build_transition_matrix(p.num_tasks, p.p_max, derive_seed(p.seed, 2));
    s.model.snr_change_period = p.snr_change_period;
    if (p.snr_mode == SnrMode::Fixed) {
        s.model.snr_schedule = {{0, p.snr}};
    } else {
        s.model.snr_schedule = make_snr_schedule(p.snr, p.snr_values, p.snr_change_period,
                                                 p.schedule_epochs, derive_seed(p.seed, 3));
    }
    return s;
}

Scenario scenario_from(const KeyValues& kv) {
    const ScenarioParams params = scenario_params_from(kv);
    Scenario s = build_scenario(params);
    if (kv.count("task.1")) {
        KeyValues sized = kv;
        sized["num_tasks"] = std::to_string(params.num_tasks);
        s.config = system_config_from(sized);
    }
    if (kv.count("transition.1")) {
        const TransitionModel explicit_model = transition_model_from(kv);
        s.model.matrix = explicit_model.matrix;
        if (kv.count("snr_schedule")) s.model.snr_schedule = explicit_model.snr_schedule;
    } else if (kv.count("snr_schedule")) {
        KeyValues with_rows = to_key_values(s.model);
        with_rows["snr_schedule"] = kv.at("snr_schedule");
        s.model.snr_schedule = transition_model_from(with_rows).snr_schedule;
    }
    s.validate();
    return s;
}

namespace {

KeyValues scenario_key_values(const Scenario& scenario) {
    KeyValues kv = to_key_values(scenario.config);
    for (auto& [k, v] : to_key_values(scenario.model)) kv[k] = v;
    return kv;
}

}  // namespace

void save_scenario(const std::string& path, const Scenario& scenario) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << "# MEC scenario (materialized)\n";
    write_key_values(out, scenario_key_values(scenario));
}

Scenario load_scenario(const std::string& path) { return scenario_from(read_key_values(path)); }

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::uint64_t config_hash(const Scenario& scenario) {
    std::ostringstream os;
    write_key_values(os, scenario_key_values(scenario));
    return fnv1a(os.str());
}

// ---------------------------------------------------------------------------

std::string bits_string(const std::vector<std::uint8_t>& bits) {
    std::string s;
    for (auto b : bits) s += b ? '1' : '0';
    return s;
}

std::string delta_string(const std::vector<std::int8_t>& deltas) {
    std::string s;
    for (auto d : deltas) s += d > 0 ? '+' : (d < 0 ? '-' : '0');
    return s;
}

void write_trace_header(std::ostream& out) {
    out << "t,request,snr,cache_input,cache_output,cores,push,delta_input,delta_output,"
           "reactive_bandwidth,push_bandwidth,reactive_energy,total_bandwidth,energy,"
           "weighted_cost,reward\n";
}

void write_trace_row(std::ostream& out, const TraceRecord& r) {
    out << r.t << ',' << r.state.request + 1 << ',' << format_double(r.snr) << ','
        << bits_string(r.state.input_cached) << ',' << bits_string(r.state.output_cached) << ','
        << r.action.reactive_cores << ',' << bits_string(r.action.push) << ','
        << delta_string(r.action.cache_delta_input) << ','
        << delta_string(r.action.cache_delta_output) << ','
        << format_double(r.cost.reactive_bandwidth) << ',' << format_double(r.cost.push_bandwidth)
        << ',' << format_double(r.cost.reactive_energy) << ','
        << format_double(r.cost.total_bandwidth) << ',' << format_double(r.cost.energy) << ','
        << format_double(r.cost.weighted_cost) << ',' << format_double(r.cost.reward) << '\n';
}

namespace {

std::vector<std::uint8_t> parse_bits(const std::string& s) {
    std::vector<std::uint8_t> out;
    for (char c : s) {
        if (c != '0' && c != '1') throw ConfigError("trace: bad bit string '" + s + "'");
        out.push_back(c == '1');
    }
    return out;
}

std::vector<std::int8_t> parse_deltas(const std::string& s) {
    std::vector<std::int8_t> out;
    for (char c : s) {
        if (c == '+') out.push_back(1);
        else if (c == '-') out.push_back(-1);
        else if (c == '0') out.push_back(0);
        else throw ConfigError("trace: bad delta string '" + s + "'");
    }
    return out;
}

}  // namespace

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
    std::vector<TraceRecord> out;
    std::string line;
    if (!std::getline(in, line)) return out;  // header
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 16) throw ConfigError("trace: expected 16 columns, got " + std::to_string(f.size()));
        TraceRecord r;
        r.t = static_cast<long>(to_int(f[0], "t"));
        r.state.request = static_cast<int>(to_int(f[1], "request")) - 1;
        r.snr = to_double(f[2], "snr");
        r.state.input_cached = parse_bits(f[3]);
        r.state.output_cached = parse_bits(f[4]);
        r.action.reactive_cores = static_cast<int>(to_int(f[5], "cores"));
        r.action.push = parse_bits(f[6]);
        r.action.cache_delta_input = parse_deltas(f[7]);
        r.action.cache_delta_output = parse_deltas(f[8]);
        r.cost.reactive_bandwidth = to_double(f[9], "reactive_bandwidth");
        r.cost.push_bandwidth = to_double(f[10], "push_bandwidth");
        r.cost.reactive_energy = to_double(f[11], "reactive_energy");
        r.cost.total_bandwidth = to_double(f[12], "total_bandwidth");
        r.cost.energy = to_double(f[13], "energy");
        r.cost.weighted_cost = to_double(f[14], "weighted_cost");
        r.cost.reward = to_double(f[15], "reward");
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace mecsac
