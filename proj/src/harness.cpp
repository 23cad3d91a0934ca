#include "mecsac/harness.hpp"

#include "mecsac/rng.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace mecsac {

namespace fs = std::filesystem;

Algorithm parse_algorithm(const std::string& name) {
    if (name == "PTDFC") return Algorithm::PTDFC;
    if (name == "DFC") return Algorithm::DFC;
    if (name == "DFNC") return Algorithm::DFNC;
    if (name == "MRU-LRU") return Algorithm::MruLru;
    if (name == "MFU-LFU") return Algorithm::MfuLfu;
    throw ConfigError("unknown algorithm '" + name + "' (expected PTDFC, DFC, DFNC, MRU-LRU or MFU-LFU)");
}

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::PTDFC: return "PTDFC";
        case Algorithm::DFC: return "DFC";
        case Algorithm::DFNC: return "DFNC";
        case Algorithm::MruLru: return "MRU-LRU";
        case Algorithm::MfuLfu: return "MFU-LFU";
    }
    return "?";
}

bool is_learned(Algorithm algorithm) {
    return algorithm == Algorithm::PTDFC || algorithm == Algorithm::DFC || algorithm == Algorithm::DFNC;
}

std::vector<Algorithm> all_algorithms() {
    return {Algorithm::PTDFC, Algorithm::DFC, Algorithm::DFNC, Algorithm::MruLru, Algorithm::MfuLfu};
}

const std::vector<std::string>& sweep_keys() {
    static const std::vector<std::string> keys{"cache_capacity", "num_cores",   "num_tasks",   "p_max",
                                               "core_frequency", "input_bits",  "output_bits", "slot_length",
                                               "cost_weight",    "snr"};
    return keys;
}

namespace {

std::int64_t as_integer(const std::string& key, double value) {
    if (value != std::floor(value)) throw ConfigError("sweep '" + key + "': value " + format_double(value) + " is not an integer");
    return static_cast<std::int64_t>(value);
}

void require(bool ok, const std::string& key, double value, const std::string& range) {
    if (!ok) throw ConfigError("sweep '" + key + "': value " + format_double(value) + " outside " + range);
}

}  // namespace

void apply_sweep_value(ScenarioParams& p, const std::string& key, double value) {
    if (key == "cache_capacity") {
        require(value >= 0, key, value, "[0, inf)");
        p.cache_capacity = as_integer(key, value);
    } else if (key == "num_cores") {
        require(value >= 1, key, value, "[1, inf)");
        p.num_cores = static_cast<int>(as_integer(key, value));
    } else if (key == "num_tasks") {
        require(value >= 1 && value <= 64, key, value, "[1, 64]");
        p.num_tasks = static_cast<int>(as_integer(key, value));
    } else if (key == "p_max") {
        require(value > 0 && value < 1, key, value, "(0, 1)");
        p.p_max = value;
    } else if (key == "core_frequency") {
        require(value > 0, key, value, "(0, inf)");
        p.core_frequency = value;
    } else if (key == "input_bits") {
        require(value >= 1, key, value, "[1, inf)");
        p.input_bits = as_integer(key, value);
    } else if (key == "output_bits") {
        require(value >= 1, key, value, "[1, inf)");
        p.output_bits = as_integer(key, value);
    } else if (key == "slot_length") {
        require(value > 0, key, value, "(0, inf)");
        p.slot_length = value;
    } else if (key == "cost_weight") {
        require(value >= 0, key, value, "[0, inf)");
        p.cost_weight = value;
    } else if (key == "snr") {
        require(value > 0, key, value, "(0, inf)");
        p.snr_mode = SnrMode::Fixed;
        p.snr = value;
    } else {
        std::string known;
        for (const auto& k : sweep_keys()) known += (known.empty() ? "" : ", ") + k;
        throw ConfigError("unknown sweep key '" + key + "' (expected one of " + known + ")");
    }
}

void ExperimentSpec::validate() const {
    if (algorithms.empty()) throw ConfigError("no algorithms selected");
    if (seeds.empty()) throw ConfigError("no seeds given");
    if (trace_length == 0) throw ConfigError("trace_length must be positive");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (learner.train_epochs < 0) throw ConfigError("train_epochs must be non-negative");
    if (!sweep_key.empty() && sweep_values.empty()) throw ConfigError("sweep '" + sweep_key + "' has no values");
    if (sweep_key.empty() && !sweep_values.empty()) throw ConfigError("sweep values given without a sweep key");
    for (double v : sweep_values) scenario_for(*this, v);
    if (sweep_values.empty()) scenario_for(*this, std::nullopt);
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::string s = text;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

}  // namespace

ExperimentSpec experiment_spec_from(const KeyValues& kv, ExperimentSpec spec) {
    spec.scenario = scenario_params_from(kv, spec.scenario);
    if (auto it = kv.find("algorithms"); it != kv.end()) {
        spec.algorithms.clear();
        for (const auto& name : split_list(it->second)) spec.algorithms.push_back(parse_algorithm(name));
    }
    spec.sweep_key = get_string(kv, "sweep", spec.sweep_key);
    if (auto it = kv.find("values"); it != kv.end()) spec.sweep_values = parse_double_list(it->second, "values");
    spec.trace_length = static_cast<std::size_t>(get_int(kv, "trace_length", static_cast<std::int64_t>(spec.trace_length)));
    if (auto it = kv.find("seeds"); it != kv.end()) {
        spec.seeds.clear();
        for (const auto& tok : split_list(it->second)) {
            try {
                std::size_t used = 0;
                spec.seeds.push_back(std::stoull(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ConfigError("key 'seeds': expected non-negative integers, got '" + tok + "'");
            }
        }
    }
    LearnerSettings& l = spec.learner;
    l.train_epochs = static_cast<int>(get_int(kv, "train_epochs", l.train_epochs));
    l.trainer.steps_per_epoch = static_cast<int>(get_int(kv, "steps_per_epoch", l.trainer.steps_per_epoch));
    l.trainer.eval_interval = static_cast<int>(get_int(kv, "eval_interval", l.trainer.eval_interval));
    l.trainer.eval_epochs = static_cast<int>(get_int(kv, "eval_epochs", l.trainer.eval_epochs));
    l.trainer.warmup_steps = static_cast<std::size_t>(get_int(kv, "warmup_steps", static_cast<std::int64_t>(l.trainer.warmup_steps)));
    l.trainer.updates_per_step = static_cast<int>(get_int(kv, "updates_per_step", l.trainer.updates_per_step));
    if (auto it = kv.find("hidden"); it != kv.end()) {
        l.sac.hidden.clear();
        for (double w : parse_double_list(it->second, "hidden")) {
            if (w < 1 || w != std::floor(w)) throw ConfigError("key 'hidden': widths must be positive integers");
            l.sac.hidden.push_back(static_cast<int>(w));
        }
    }
    l.sac.batch_size = static_cast<std::size_t>(get_int(kv, "batch_size", static_cast<std::int64_t>(l.sac.batch_size)));
    const double lr = get_double(kv, "learning_rate", l.sac.actor_optimizer.learning_rate);
    l.sac.actor_optimizer.learning_rate = lr;
    l.sac.critic_optimizer.learning_rate = get_double(kv, "critic_learning_rate", lr);
    l.sac.alpha_optimizer.learning_rate = get_double(kv, "alpha_learning_rate", l.sac.alpha_optimizer.learning_rate);
    const std::string opt = get_string(kv, "optimizer", l.sac.actor_optimizer.kind == nn::OptimizerKind::Adam ? "adam" : "sgd");
    if (opt != "adam" && opt != "sgd") throw ConfigError("key 'optimizer': expected adam|sgd, got '" + opt + "'");
    const auto kind = opt == "adam" ? nn::OptimizerKind::Adam : nn::OptimizerKind::Sgd;
    l.sac.actor_optimizer.kind = l.sac.critic_optimizer.kind = kind;
    l.sac.initial_alpha = get_double(kv, "initial_alpha", l.sac.initial_alpha);
    l.sac.polyak = get_double(kv, "polyak", l.sac.polyak);
    l.sac.target_update_interval = static_cast<int>(get_int(kv, "target_update_interval", l.sac.target_update_interval));
    l.sac.buffer_capacity = static_cast<std::size_t>(get_int(kv, "buffer_capacity", static_cast<std::int64_t>(l.sac.buffer_capacity)));
    spec.output_dir = get_string(kv, "output_dir", spec.output_dir);
    spec.workers = static_cast<int>(get_int(kv, "workers", spec.workers));
    return spec;
}

Scenario scenario_for(const ExperimentSpec& spec, std::optional<double> value) {
    ScenarioParams p = spec.scenario;
    if (value) apply_sweep_value(p, spec.sweep_key, *value);
    Scenario s = build_scenario(p);
    s.validate();
    return s;
}

std::vector<EpochMetrics> train_selecting_best(SacTrainer& trainer, int epochs,
                                              const std::function<void(const EpochMetrics&)>& on_epoch) {
    std::vector<EpochMetrics> metrics;
    std::optional<SacAgent> best;
    double best_reward = -std::numeric_limits<double>::infinity();
    for (int e = 0; e < epochs; ++e) {
        metrics.push_back(trainer.run_epoch());
        if (on_epoch) on_epoch(metrics.back());
        const double r = metrics.back().eval_reward;
        if (!std::isnan(r) && r >= best_reward) {
            best_reward = r;
            best = trainer.agent();
        }
    }
    if (best) trainer.agent() = *best;
    return metrics;
}

RunResult run_single(Algorithm algorithm, const Scenario& scenario, const LearnerSettings& learner,
                     std::size_t trace_length, std::uint64_t seed, const std::string& checkpoint_dir) {
    RunResult result;
    result.algorithm = algorithm;
    result.seed = seed;
    result.config_hash = hex64(config_hash(scenario));
    const std::vector<int> requests = sample_request_trace(scenario.model, trace_length + 1, derive_seed(seed, 21));
    const double snr = scenario.model.snr_at_epoch(std::max(learner.train_epochs - 1, 0));

    RolloutSummary summary;
    if (is_learned(algorithm)) {
        const ActionMask mask = restricted_action_space(to_string(algorithm));
        TrainerConfig trainer = learner.trainer;
        trainer.mask = mask;
        trainer.seed = derive_seed(seed, 31);
        SacConfig sac = learner.sac;
        sac.seed = trainer.seed;
        SacTrainer tr(scenario, sac, trainer);
        result.metrics = train_selecting_best(tr, learner.train_epochs);
        if (!checkpoint_dir.empty()) tr.save_checkpoint(checkpoint_dir);
        if (static_cast<int>(result.metrics.size()) >= 10) {
            std::vector<double> rewards;
            for (const auto& m : result.metrics) rewards.push_back(m.train_reward);
            result.convergence_epoch = convergence_epoch(rewards);
        }
        SacController controller(tr.agent(), scenario.config, mask, to_string(algorithm));
        summary = rollout(controller, scenario.config, requests, snr);
    } else {
        HeuristicController controller(
            algorithm == Algorithm::MruLru ? HeuristicKind::MruLru : HeuristicKind::MfuLfu, scenario.config);
        summary = rollout(controller, scenario.config, requests, snr);
    }
    result.mean_transmission = summary.mean_transmission;
    result.mean_computation = summary.mean_computation;
    result.mean_weighted_cost = summary.mean_weighted_cost;
    return result;
}

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results) {
    out << "algorithm,sweep,value,seed,mean_transmission,mean_computation,mean_weighted_cost,convergence_epoch,"
           "config_hash\n";
    for (const RunResult& r : results) {
        out << to_string(r.algorithm) << ',' << (r.sweep_key.empty() ? "none" : r.sweep_key) << ','
            << format_double(r.value) << ',' << r.seed << ',' << format_double(r.mean_transmission) << ','
            << format_double(r.mean_computation) << ',' << format_double(r.mean_weighted_cost) << ','
            << r.convergence_epoch << ',' << r.config_hash << '\n';
    }
}

void write_results_dat(std::ostream& out, const std::vector<RunResult>& results) {
    std::vector<Algorithm> order;
    for (const RunResult& r : results) {
        if (std::find(order.begin(), order.end(), r.algorithm) == order.end()) order.push_back(r.algorithm);
    }
    bool first = true;
    for (Algorithm alg : order) {
        std::map<double, std::array<double, 4>> rows;  // b, e, w, count
        for (const RunResult& r : results) {
            if (r.algorithm != alg) continue;
            auto& row = rows[r.value];
            row[0] += r.mean_transmission;
            row[1] += r.mean_computation;
            row[2] += r.mean_weighted_cost;
            row[3] += 1.0;
        }
        if (!first) out << "\n\n";
        first = false;
        out << "# " << to_string(alg) << "\n# value transmission computation weighted\n";
        for (const auto& [value, row] : rows) {
            out << format_double(value) << ' ' << format_double(row[0] / row[3]) << ' '
                << format_double(row[1] / row[3]) << ' ' << format_double(row[2] / row[3]) << '\n';
        }
    }
}

std::vector<RunResult> run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    struct Point {
        std::optional<double> value;
        std::uint64_t seed;
        Scenario scenario;
    };
    std::vector<Point> points;
    const std::vector<std::optional<double>> values = [&] {
        std::vector<std::optional<double>> v;
        if (spec.sweep_values.empty()) v.push_back(std::nullopt);
        for (double x : spec.sweep_values) v.push_back(x);
        return v;
    }();
    for (const auto& v : values)
        for (std::uint64_t seed : spec.seeds) points.push_back(Point{v, seed, scenario_for(spec, v)});

    if (!spec.output_dir.empty()) fs::create_directories(fs::path(spec.output_dir) / "metrics");

    const std::size_t per_point = spec.algorithms.size();
    std::vector<RunResult> results(points.size() * per_point);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= results.size()) return;
            const Point& point = points[job / per_point];
            const Algorithm alg = spec.algorithms[job % per_point];
            try {
                RunResult r = run_single(alg, point.scenario, spec.learner, spec.trace_length, point.seed);
                r.sweep_key = spec.sweep_key;
                r.value = point.value.value_or(0.0);
                if (!spec.output_dir.empty() && is_learned(alg)) {
                    const std::string name = to_string(alg) + "_" + (spec.sweep_key.empty() ? "none" : spec.sweep_key) +
                                             "_" + format_double(r.value) + "_seed" + std::to_string(point.seed) + ".csv";
                    std::ofstream out(fs::path(spec.output_dir) / "metrics" / name);
                    write_metrics_header(out);
                    for (const auto& m : r.metrics) write_metrics_row(out, m);
                }
                results[job] = std::move(r);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = results.size();
            }
        }
    };
    const int threads = std::min<int>(spec.workers, static_cast<int>(results.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    if (!spec.output_dir.empty()) {
        std::ofstream csv(fs::path(spec.output_dir) / "results.csv");
        write_results_csv(csv, results);
        std::ofstream dat(fs::path(spec.output_dir) / "results.dat");
        write_results_dat(dat, results);
        if (!csv || !dat) throw std::runtime_error("failed to write results to " + spec.output_dir);
    }
    return results;
}

// ---------------------------------------------------------------------------

int convergence_epoch(const std::vector<double>& series, int window, double tolerance) {
    if (window < 1) throw ConfigError("convergence window must be positive");
    const auto n = static_cast<int>(series.size());
    if (n < window) {
        throw ConfigError("series of " + std::to_string(n) + " epochs is shorter than the window of " +
                          std::to_string(window));
    }
    double final_mean = 0.0;
    for (int i = n - window; i < n; ++i) final_mean += series[i];
    final_mean /= window;
    const double band = tolerance * std::abs(final_mean);

    std::vector<double> prefix(n + 1, 0.0);
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series[i];
    int converged = n;
    for (int k = n; k >= 1; --k) {
        const int lo = std::max(0, k - window);
        const double mean = (prefix[k] - prefix[lo]) / (k - lo);
        if (std::abs(mean - final_mean) > band) break;
        converged = k;
    }
    return converged;
}

std::vector<RegimeConvergence> convergence_report(const std::vector<EpochMetrics>& metrics, int window,
                                                  double tolerance) {
    if (static_cast<int>(metrics.size()) < window) {
        throw ConfigError("metrics series of " + std::to_string(metrics.size()) +
                          " epochs is shorter than the window of " + std::to_string(window));
    }
    std::vector<RegimeConvergence> out;
    std::size_t start = 0;
    while (start < metrics.size()) {
        std::size_t end = start;
        while (end < metrics.size() && metrics[end].snr == metrics[start].snr) ++end;
        RegimeConvergence r;
        r.snr = metrics[start].snr;
        r.first_epoch = metrics[start].epoch;
        r.last_epoch = metrics[end - 1].epoch;
        std::vector<double> series;
        for (std::size_t i = start; i < end; ++i) series.push_back(metrics[i].train_reward);
        if (static_cast<int>(series.size()) >= window) {
            r.converged_after = convergence_epoch(series, window, tolerance);
            double tail = 0.0;
            for (std::size_t i = series.size() - window; i < series.size(); ++i) tail += series[i];
            r.final_mean = tail / window;
        }
        out.push_back(r);
        start = end;
    }
    return out;
}

std::vector<TraceRecord> emit_qualitative_trace(const std::string& checkpoint_dir, std::size_t steps,
                                                std::uint64_t seed, const std::optional<Scenario>& expected_config) {
    LoadedPolicy loaded = load_policy(checkpoint_dir);
    if (expected_config) {
        const std::string supplied = hex64(config_hash(*expected_config));
        const std::string stored = hex64(config_hash(loaded.scenario));
        if (supplied != stored) {
            throw ConfigError("checkpoint config hash " + stored + " does not match supplied config hash " + supplied);
        }
    }
    std::vector<TraceRecord> records;
    if (steps == 0) return records;
    const int epoch = static_cast<int>(get_int(loaded.manifest, "epoch", 1));
    const double snr = loaded.scenario.model.snr_at_epoch(std::max(epoch - 1, 0));
    const std::vector<int> requests = sample_request_trace(loaded.scenario.model, steps + 1, seed);
    SacController controller(loaded.agent, loaded.scenario.config, loaded.mask, "policy");
    rollout(controller, loaded.scenario.config, requests, snr,
            [&](const TraceRecord& r) { records.push_back(r); });
    return records;
}

}  // namespace mecsac
