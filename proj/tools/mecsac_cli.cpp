// mecsac: command-line front end for training, sweeps, the exact oracle,
// qualitative traces and convergence reports.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include "mecsac/baselines.hpp"
#include "mecsac/harness.hpp"
#include "mecsac/oracle.hpp"
#include "mecsac/rng.hpp"
#include "mecsac/sac.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mecsac;

namespace {

constexpr const char* kOutputEnv = "MECSAC_OUTPUT_DIR";

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

KeyValues load_kv(const Common& c) {
    KeyValues kv;
    if (!c.config.empty()) kv = read_key_values(c.config);
    for (const std::string& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    return kv;
}

// Flag, then environment, then config file, then the fallback.
std::string output_dir(const Common& c, const KeyValues& kv, const std::string& fallback) {
    if (!c.out.empty()) return c.out;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return get_string(kv, "output_dir", fallback);
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", c.sets, "override a configuration key (key=value), repeatable");
    app->add_option("-o,--out", c.out, std::string("output directory (default: $") + kOutputEnv + " or output_dir)");
}

void print_summary(const RunResult& r) {
    std::cout << to_string(r.algorithm) << ": mean transmission " << r.mean_transmission << " Hz, mean computation "
              << r.mean_computation << " J, mean weighted cost " << r.mean_weighted_cost;
    if (r.convergence_epoch > 0) std::cout << ", converged at epoch " << r.convergence_epoch;
    std::cout << '\n';
}

int cmd_train(const Common& c, const std::string& algorithm_name, int epochs, std::uint64_t seed,
              const std::string& dump_path) {
    KeyValues kv = load_kv(c);
    if (epochs >= 0) kv["train_epochs"] = std::to_string(epochs);
    const ExperimentSpec spec = experiment_spec_from(kv);
    const Algorithm algorithm = parse_algorithm(algorithm_name);
    const std::string dir = output_dir(c, kv, "mecsac_out");
    const Scenario scenario = scenario_for(spec, std::nullopt);
    fs::create_directories(dir);
    save_scenario((fs::path(dir) / "scenario.cfg").string(), scenario);

    if (!is_learned(algorithm)) {
        RunResult r = run_single(algorithm, scenario, spec.learner, spec.trace_length, seed);
        print_summary(r);
        return 0;
    }

    TrainerConfig trainer = spec.learner.trainer;
    trainer.mask = restricted_action_space(to_string(algorithm));
    trainer.seed = derive_seed(seed, 31);
    trainer.diagnostic_dir = (fs::path(dir) / "diverged").string();
    SacConfig sac = spec.learner.sac;
    sac.seed = trainer.seed;
    SacTrainer tr(scenario, sac, trainer);

    std::ofstream dump;
    long t = 0;
    if (!dump_path.empty()) {
        dump.open(dump_path);
        if (!dump) throw ConfigError("cannot open " + dump_path);
        dump << "t,request,cache_input,cache_output,pre_cores,pre_push,pre_delta_input,pre_delta_output,"
                "cores,push,delta_input,delta_output\n";
        tr.set_transition_observer([&](const SystemState& s, const std::vector<double>&, const ContinuousAction& raw,
                                       const SystemAction& fixed, double) {
            SystemAction pre = quantize(raw, tr.scenario().config);
            apply_mask(pre, tr.trainer_config().mask);
            dump << t++ << ',' << s.request + 1 << ',' << bits_string(s.input_cached) << ','
                 << bits_string(s.output_cached) << ',' << pre.reactive_cores << ',' << bits_string(pre.push) << ','
                 << delta_string(pre.cache_delta_input) << ',' << delta_string(pre.cache_delta_output) << ','
                 << fixed.reactive_cores << ',' << bits_string(fixed.push) << ','
                 << delta_string(fixed.cache_delta_input) << ',' << delta_string(fixed.cache_delta_output) << '\n';
        });
    }

    std::ofstream metrics(fs::path(dir) / "metrics.csv");
    write_metrics_header(metrics);
    const auto start = std::chrono::steady_clock::now();
    train_selecting_best(tr, spec.learner.train_epochs, [&](const EpochMetrics& m) {
        write_metrics_row(metrics, m);
        metrics.flush();
        std::cout << "epoch " << m.epoch << " snr " << m.snr << " train_reward " << m.train_reward;
        if (!std::isnan(m.eval_reward)) std::cout << " eval_reward " << m.eval_reward;
        std::cout << " alpha " << m.alpha << '\n';
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    tr.save_checkpoint((fs::path(dir) / "checkpoint").string());

    const std::vector<int> requests =
        sample_request_trace(scenario.model, spec.trace_length + 1, derive_seed(seed, 21));
    SacController controller(tr.agent(), scenario.config, trainer.mask, to_string(algorithm));
    const double snr = scenario.model.snr_at_epoch(std::max(spec.learner.train_epochs - 1, 0));
    const RolloutSummary s = rollout(controller, scenario.config, requests, snr);
    RunResult r;
    r.algorithm = algorithm;
    r.mean_transmission = s.mean_transmission;
    r.mean_computation = s.mean_computation;
    r.mean_weighted_cost = s.mean_weighted_cost;
    print_summary(r);
    std::cout << "trained " << spec.learner.train_epochs << " epochs in " << secs << " s; checkpoint in "
              << (fs::path(dir) / "checkpoint").string() << '\n';
    return 0;
}

int cmd_sweep(const Common& c, const std::string& algorithms, const std::string& key, const std::string& values,
              const std::string& seeds, long trace_length, int epochs, int workers) {
    KeyValues kv = load_kv(c);
    if (!algorithms.empty()) kv["algorithms"] = algorithms;
    if (!key.empty()) kv["sweep"] = key;
    if (!values.empty()) kv["values"] = values;
    if (!seeds.empty()) kv["seeds"] = seeds;
    if (trace_length > 0) kv["trace_length"] = std::to_string(trace_length);
    if (epochs >= 0) kv["train_epochs"] = std::to_string(epochs);
    if (workers > 0) kv["workers"] = std::to_string(workers);
    ExperimentSpec spec = experiment_spec_from(kv);
    spec.output_dir = output_dir(c, kv, "mecsac_sweep");
    const std::vector<RunResult> results = run_experiment(spec);
    for (const RunResult& r : results) {
        std::cout << (r.sweep_key.empty() ? std::string() : r.sweep_key + "=" + format_double(r.value) + " ")
                  << "seed " << r.seed << ' ';
        print_summary(r);
    }
    std::cout << "results in " << spec.output_dir << '\n';
    return 0;
}

int cmd_oracle(const Common& c, double snr, double gamma, double tolerance, std::uint64_t budget) {
    const KeyValues kv = load_kv(c);
    const Scenario scenario = scenario_from(kv);
    const double g = gamma > 0 ? gamma : scenario.config.discount;
    const EnumeratedMdp mdp = enumerate_mdp(scenario.config, scenario.model, snr, budget);
    const ValueIterationResult vi = value_iteration(mdp, g, tolerance);
    std::cout << "states " << mdp.num_states() << ", state-action pairs " << mdp.num_pairs() << ", sweeps "
              << vi.residuals.size() << ", final residual " << vi.residuals.back() << '\n';
    std::cout << "optimal discounted cost " << format_double(vi.optimal_cost) << " (reward-scaled)\n";
    const std::string dir = output_dir(c, kv, "");
    if (!dir.empty()) {
        fs::create_directories(dir);
        std::ofstream out(fs::path(dir) / "oracle_values.csv");
        write_value_csv(out, mdp, vi);
        std::cout << "values and policy in " << (fs::path(dir) / "oracle_values.csv").string() << '\n';
    }
    return 0;
}

int cmd_trace(const std::string& checkpoint, const std::string& config, long steps, std::uint64_t seed,
              const std::string& out_path) {
    std::optional<Scenario> expected;
    if (!config.empty()) expected = load_scenario(config);
    const std::vector<TraceRecord> records =
        emit_qualitative_trace(checkpoint, static_cast<std::size_t>(steps), seed, expected);
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw ConfigError("cannot open " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    write_trace_header(out);
    for (const TraceRecord& r : records) write_trace_row(out, r);
    return 0;
}

int cmd_report(const std::string& path, int window, double tolerance) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    const std::vector<EpochMetrics> metrics = read_metrics_csv(in);
    std::cout << "snr,first_epoch,last_epoch,converged_after,final_mean\n";
    for (const RegimeConvergence& r : convergence_report(metrics, window, tolerance)) {
        std::cout << format_double(r.snr) << ',' << r.first_epoch << ',' << r.last_epoch << ','
                  << (r.converged_after ? std::to_string(*r.converged_after) : std::string("n/a")) << ','
                  << (r.converged_after ? format_double(r.final_mean) : std::string()) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint pushing, caching and computing simulator with a soft actor-critic learner"};
    app.require_subcommand(1);

    Common train_c, sweep_c, oracle_c;
    std::string algorithm = "PTDFC", dump;
    int train_epochs = -1;
    std::uint64_t train_seed = 1;
    auto* train = app.add_subcommand("train", "train one algorithm and save a checkpoint");
    add_common(train, train_c);
    train->add_option("-a,--algorithm", algorithm, "PTDFC, DFC, DFNC, MRU-LRU or MFU-LFU");
    train->add_option("-e,--epochs", train_epochs, "training epochs (1000 steps each)");
    train->add_option("-s,--seed", train_seed, "experiment seed");
    train->add_option("--dump-corrections", dump, "CSV of pre/post-correction actions for every training step");

    std::string algorithms, sweep_key, sweep_values, seeds;
    long trace_length = 0;
    int sweep_epochs = -1, workers = 0;
    auto* sweep = app.add_subcommand("sweep", "run algorithms over a parameter sweep");
    add_common(sweep, sweep_c);
    sweep->add_option("-a,--algorithms", algorithms, "comma-separated algorithm list");
    sweep->add_option("-k,--key", sweep_key, "swept parameter");
    sweep->add_option("-v,--values", sweep_values, "comma-separated values");
    sweep->add_option("-s,--seeds", seeds, "comma-separated seeds");
    sweep->add_option("-t,--trace-length", trace_length, "evaluation trace length");
    sweep->add_option("-e,--epochs", sweep_epochs, "training epochs per learned run");
    sweep->add_option("-w,--workers", workers, "parallel sweep workers");

    double snr = 1.0, gamma = 0.0, tolerance = 1e-9;
    std::uint64_t budget = 10'000'000;
    auto* oracle = app.add_subcommand("oracle", "solve a tiny instance exactly by value iteration");
    add_common(oracle, oracle_c);
    oracle->add_option("--snr", snr, "fixed channel SNR (linear)");
    oracle->add_option("--gamma", gamma, "discount (default: the configuration's)");
    oracle->add_option("--tolerance", tolerance, "sup-norm Bellman residual target");
    oracle->add_option("--budget", budget, "maximum state-action pairs");

    std::string checkpoint, trace_config, trace_out;
    long steps = 4;
    std::uint64_t trace_seed = 1;
    auto* trace = app.add_subcommand("trace", "step-by-step log of a trained policy");
    trace->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    trace->add_option("-c,--config", trace_config, "scenario the checkpoint must match");
    trace->add_option("-n,--steps", steps, "number of slots");
    trace->add_option("-s,--seed", trace_seed, "request trace seed");
    trace->add_option("-o,--out", trace_out, "CSV output (default: stdout)");

    std::string metrics_path;
    int window = 10;
    double report_tol = 0.05;
    auto* report = app.add_subcommand("report", "epochs to convergence per SNR regime");
    report->add_option("metrics", metrics_path, "metrics CSV written by train")->required();
    report->add_option("--window", window, "moving-mean window (epochs)");
    report->add_option("--tolerance", report_tol, "relative band around the final mean");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train) return cmd_train(train_c, algorithm, train_epochs, train_seed, dump);
        if (*sweep) return cmd_sweep(sweep_c, algorithms, sweep_key, sweep_values, seeds, trace_length, sweep_epochs, workers);
        if (*oracle) return cmd_oracle(oracle_c, snr, gamma, tolerance, budget);
        if (*trace) return cmd_trace(checkpoint, trace_config, steps, trace_seed, trace_out);
        if (*report) return cmd_report(metrics_path, window, report_tol);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
