#include "mecsac/env.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mecsac;
using mecsac::testing::plain_config;
using mecsac::testing::random_state;
using mecsac::testing::random_valid_action;
using mecsac::testing::reference_cost;
using mecsac::testing::rel_err;

namespace {

SystemAction serve(int n, int cores) {
    SystemAction a = SystemAction::idle(n);
    a.reactive_cores = cores;
    return a;
}

}  // namespace

TEST(Chain, TwoStateFlipHasUniformLimit) {
    TransitionModel m;
    m.matrix = {{0, 1}, {1, 0}};
    auto p = stationary_distribution(m);
    EXPECT_NEAR(p[0], 0.5, 1e-12);
    EXPECT_NEAR(p[1], 0.5, 1e-12);
}

TEST(Chain, DisconnectedChainIsRejected) {
    TransitionModel m;
    m.matrix = {{1, 0}, {0, 1}};
    EXPECT_THROW(stationary_distribution(m), ConfigError);
}

TEST(Chain, StationaryMatchesMatrixPowerOracle) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        TransitionModel m;
        m.matrix.assign(4, std::vector<double>(4));
        for (auto& row : m.matrix) {
            double s = 0;
            for (double& v : row) s += (v = u(rng));
            for (double& v : row) v /= s;
        }
        auto p = stationary_distribution(m);
        // Q^1024 by repeated squaring; every row converges to p.
        auto q = m.matrix;
        for (int k = 0; k < 10; ++k) {
            std::vector<std::vector<double>> r(4, std::vector<double>(4, 0.0));
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    for (int l = 0; l < 4; ++l) r[i][j] += q[i][l] * q[l][j];
            q = r;
        }
        double sum = 0;
        for (int j = 0; j < 4; ++j) {
            sum += p[j];
            EXPECT_GE(p[j], 0.0);
            EXPECT_NEAR(p[j], q[0][j], 1e-10);
            double pq = 0;
            for (int i = 0; i < 4; ++i) pq += p[i] * m.matrix[i][j];
            EXPECT_NEAR(pq, p[j], 1e-10);
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Chain, SyntheticMatrixShape) {
    auto two = build_transition_matrix(2, 0.7, 3);
    for (const auto& row : two) {
        EXPECT_NEAR(std::min(row[0], row[1]), 0.3, 1e-12);
        EXPECT_NEAR(std::max(row[0], row[1]), 0.7, 1e-12);
    }
    for (std::uint64_t seed = 1; seed < 20; ++seed) {
        auto q = build_transition_matrix(4, 0.7, seed);
        for (int i = 0; i < 4; ++i) {
            double sum = 0;
            int at_max = 0;
            for (int j = 0; j < 4; ++j) {
                sum += q[i][j];
                if (q[i][j] == 0.7) {
                    ++at_max;
                    EXPECT_NE(i, j);
                }
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
            EXPECT_EQ(at_max, 1);
        }
    }
    EXPECT_THROW(build_transition_matrix(4, 1.2, 1), ConfigError);
    EXPECT_THROW(build_transition_matrix(4, 0.0, 1), ConfigError);
}

TEST(Chain, TraceIsSeededAndTracksQ) {
    TransitionModel m;
    m.matrix = build_transition_matrix(4, 0.7, 5);
    EXPECT_TRUE(sample_request_trace(m, 0, 1).empty());
    EXPECT_EQ(sample_request_trace(m, 10, 9), sample_request_trace(m, 10, 9));

    auto trace = sample_request_trace(m, 1'000'000, 11);
    ASSERT_EQ(trace.size(), 1'000'000u);
    std::vector<std::vector<double>> counts(4, std::vector<double>(4, 0.0));
    for (std::size_t t = 0; t + 1 < trace.size(); ++t) counts[trace[t]][trace[t + 1]] += 1;
    for (int i = 0; i < 4; ++i) {
        double total = 0, peak = 0;
        for (double c : counts[i]) total += c;
        for (double c : counts[i]) peak = std::max(peak, c / total);
        EXPECT_NEAR(peak, 0.7, 0.01);
    }
}

TEST(Validate, ReferenceExampleIsAccepted) {
    auto cfg = plain_config();
    EXPECT_EQ(min_workable_cores(cfg, 0, false), 4);
    auto s = SystemState::empty(4, 0);
    auto a = serve(4, 4);
    a.cache_delta_input[0] = 1;
    EXPECT_TRUE(validate_action(s, a, cfg).ok()) << validate_action(s, a, cfg).describe();
}

TEST(Validate, CoresWithCachedOutputViolateCoreLimit) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 0);
    s.output_cached[0] = 1;
    auto v = validate_action(s, serve(4, 1), cfg);
    ASSERT_FALSE(v.ok());
    EXPECT_EQ(v.violations[0].constraint, "core-limit");
}

TEST(Validate, RemovingAbsentInputViolatesWindow) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 0);
    auto a = serve(4, 5);
    a.cache_delta_input[2] = -1;
    auto v = validate_action(s, a, cfg);
    ASSERT_FALSE(v.ok());
    EXPECT_EQ(v.violations[0].constraint, "input-window");
    EXPECT_EQ(v.violations[0].task, 2);
}

TEST(Validate, LatencyAndCapacityViolations) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 0);
    EXPECT_EQ(validate_action(s, serve(4, 3), cfg).violations.at(0).constraint, "latency");
    auto a = serve(4, 5);
    a.cache_delta_input[0] = 1;
    a.cache_delta_output[0] = 1;  // 46000 bits > 40000
    EXPECT_EQ(validate_action(s, a, cfg).violations.at(0).constraint, "capacity");
}

TEST(Cost, ClosedFormExamples) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 0);
    auto a = serve(4, 5);
    EXPECT_NEAR(reactive_bandwidth(s, a, 1.0, cfg), 16000.0 / (0.02 - 12.8e6 / 8.5e8), 1e-6);
    EXPECT_NEAR(reactive_bandwidth(s, a, 1.0, cfg), 3.238e6, 1e3);
    EXPECT_NEAR(reactive_energy(s, a, cfg), 9.248e5, 1e2);
    EXPECT_EQ(reactive_energy(s, serve(4, 0), cfg), 0.0);

    auto in = s;
    in.input_cached[0] = 1;
    EXPECT_EQ(reactive_bandwidth(in, a, 1.0, cfg), 0.0);
    auto out = s;
    out.output_cached[0] = 1;
    EXPECT_EQ(reactive_bandwidth(out, a, 1.0, cfg), 0.0);
    EXPECT_EQ(reactive_energy(out, a, cfg), 0.0);

    auto p = SystemAction::idle(4);
    EXPECT_EQ(push_bandwidth(p, 1.0, cfg), 0.0);
    p.push[1] = 1;
    EXPECT_DOUBLE_EQ(push_bandwidth(p, 1.0, cfg), 8.0e5);
    cfg.tasks[2].input_bits = 17000;
    p.push[2] = 1;
    EXPECT_DOUBLE_EQ(push_bandwidth(p, 3.0, cfg), 8.25e5);
}

TEST(Cost, LatencyInfeasibleDenominator) {
    auto cfg = plain_config();
    EXPECT_THROW(reactive_bandwidth(SystemState::empty(4, 0), serve(4, 3), 1.0, cfg), LatencyInfeasible);
    EXPECT_THROW(reactive_bandwidth(SystemState::empty(4, 0), serve(4, 0), 1.0, cfg), LatencyInfeasible);
}

TEST(Step, ServePushAndCacheBothInputs) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 0);
    auto a = serve(4, 5);
    a.push[2] = 1;
    a.cache_delta_input[0] = 1;
    a.cache_delta_input[2] = 1;
    auto r = step(s, a, 1.0, 3, cfg);
    EXPECT_EQ(r.next.request, 3);
    EXPECT_EQ(r.next.input_cached, (std::vector<std::uint8_t>{1, 0, 1, 0}));
    EXPECT_EQ(r.next.output_cached, (std::vector<std::uint8_t>{0, 0, 0, 0}));
    const double br = reactive_bandwidth(s, a, 1.0, cfg);
    const double bp = push_bandwidth(a, 1.0, cfg);
    const double er = reactive_energy(s, a, cfg);
    EXPECT_DOUBLE_EQ(r.cost.weighted_cost, br + bp + er);
    EXPECT_DOUBLE_EQ(r.cost.reward, -1e-6 * (br + bp + er));
}

TEST(Step, CachedOutputIsFree) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 1);
    s.output_cached[1] = 1;
    auto r = step(s, SystemAction::idle(4), 2.0, 0, cfg);
    EXPECT_EQ(r.cost.weighted_cost, 0.0);
    EXPECT_EQ(r.next.output_cached, s.output_cached);
    EXPECT_EQ(r.next.input_cached, s.input_cached);
}

TEST(Step, InvalidActionCarriesViolations) {
    auto cfg = plain_config();
    try {
        step(SystemState::empty(4, 0), serve(4, 2), 1.0, 1, cfg);
        FAIL() << "expected InvalidAction";
    } catch (const InvalidAction& e) {
        EXPECT_EQ(e.verdict().violations.at(0).constraint, "latency");
    }
}

TEST(Step, FuzzedTransitionsKeepCapacityAndMatchOracle) {
    auto scenario = mecsac::testing::default_scenario();
    const auto& cfg = scenario.config;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> snr_dist(0.1, 4.0);
    std::uniform_int_distribution<int> next(0, cfg.num_tasks() - 1);
    auto s = SystemState::empty(cfg.num_tasks(), 0);
    for (int t = 0; t < 100'000; ++t) {
        const double snr = snr_dist(rng);
        const auto a = random_valid_action(s, cfg, rng);
        const auto r = step(s, a, snr, next(rng), cfg);
        ASSERT_LE(cache_usage(cfg, r.next), cfg.cache_capacity);
        const auto& c = r.cost;
        ASSERT_GE(c.reactive_bandwidth, 0.0);
        ASSERT_GE(c.push_bandwidth, 0.0);
        ASSERT_GE(c.reactive_energy, 0.0);
        ASSERT_LE(c.reward, 0.0);
        ASSERT_EQ(c.total_bandwidth, c.reactive_bandwidth + c.push_bandwidth);
        ASSERT_EQ(c.energy, c.reactive_energy);
        const auto ref = reference_cost(s, a, snr, cfg);
        ASSERT_LT(rel_err(ref.weighted, c.weighted_cost), 1e-12);
        if (t % 1000 == 0) s = random_state(cfg, rng);
        else s = r.next;
    }
}

TEST(Step, IsPure) {
    auto scenario = mecsac::testing::default_scenario();
    std::mt19937_64 rng(3);
    for (int k = 0; k < 200; ++k) {
        auto s = random_state(scenario.config, rng);
        auto a = random_valid_action(s, scenario.config, rng);
        auto r1 = step(s, a, 1.5, 2, scenario.config);
        auto r2 = step(s, a, 1.5, 2, scenario.config);
        EXPECT_EQ(r1.next, r2.next);
        EXPECT_EQ(r1.cost, r2.cost);
    }
}

TEST(Cost, SnrAndCoreMonotonicity) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 0);
    auto a = serve(4, 5);
    a.push[1] = 1;
    double prev_r = INFINITY, prev_p = INFINITY;
    for (double snr : {0.25, 0.5, 1.0, 2.0, 3.0, 10.0}) {
        const double br = reactive_bandwidth(s, a, snr, cfg);
        const double bp = push_bandwidth(a, snr, cfg);
        EXPECT_LT(br, prev_r);
        EXPECT_LT(bp, prev_p);
        prev_r = br;
        prev_p = bp;
    }
    double prev_b = INFINITY, prev_e = -1;
    for (int c = min_workable_cores(cfg, 0, false); c <= cfg.num_cores; ++c) {
        const double b = reactive_bandwidth(s, serve(4, c), 1.0, cfg);
        const double e = reactive_energy(s, serve(4, c), cfg);
        EXPECT_LT(b, prev_b);
        EXPECT_GT(e, prev_e);
        prev_b = b;
        prev_e = e;
    }
}

TEST(Config, ValidateRejectsInfeasibleTasks) {
    auto cfg = plain_config();
    cfg.num_cores = 3;  // needs 4
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = plain_config();
    cfg.cache_capacity = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_NO_THROW(plain_config().validate());
}

TEST(Config, ScenarioRoundTripsThroughKeyValues) {
    auto sc = mecsac::testing::default_scenario();
    const std::string path = ::testing::TempDir() + "/scenario_roundtrip.cfg";
    save_scenario(path, sc);
    auto back = load_scenario(path);
    EXPECT_EQ(config_hash(sc), config_hash(back));
    EXPECT_EQ(back.config.tasks[0].input_bits, sc.config.tasks[0].input_bits);
    EXPECT_EQ(back.model.matrix, sc.model.matrix);
}
