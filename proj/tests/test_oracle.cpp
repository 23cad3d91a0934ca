#include "mecsac/baselines.hpp"
#include "mecsac/oracle.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace mecsac;
using mecsac::testing::tiny_params;

namespace {

struct Tiny {
    Scenario sc = build_scenario(tiny_params());
    EnumeratedMdp mdp = enumerate_mdp(sc.config, sc.model, 1.0);
};

const Tiny& tiny() {
    static const Tiny t;
    return t;
}

}  // namespace

TEST(Enumerate, SingleTaskWithoutCache) {
    SystemConfig cfg;
    cfg.tasks = {Task{10000, 20000, 800.0}};
    cfg.num_cores = 1;
    cfg.core_frequency = 6.8e8;  // 10000*800 / (0.02*6.8e8) < 1
    cfg.cache_capacity = 0;
    TransitionModel model;
    model.matrix = {{1.0}};
    auto mdp = enumerate_mdp(cfg, model, 1.0);
    ASSERT_EQ(mdp.num_states(), 1u);
    ASSERT_EQ(mdp.num_caches(), 1);
    // One core and nothing cached; pushing the requested input is still a
    // valid (useless) option.
    std::set<std::vector<std::uint8_t>> pushes;
    for (std::size_t k = 0; k < mdp.actions[0].size(); ++k) {
        auto a = mdp.action(0, k);
        EXPECT_EQ(a.reactive_cores, 1);
        EXPECT_EQ(a.cache_delta_input, (std::vector<std::int8_t>{0}));
        EXPECT_EQ(a.cache_delta_output, (std::vector<std::int8_t>{0}));
        pushes.insert(a.push);
    }
    EXPECT_EQ(pushes, (std::set<std::vector<std::uint8_t>>{{0}, {1}}));

    // Single state: V = c_min / (1 - gamma).
    auto vi = value_iteration(mdp, 0.9, 1e-12);
    const double c = -evaluate_cost(SystemState::empty(1, 0), mdp.action(0, vi.policy[0]), 1.0, cfg).reward;
    EXPECT_EQ(mdp.action(0, vi.policy[0]).push, (std::vector<std::uint8_t>{0}));
    EXPECT_NEAR(vi.values[0], c / 0.1, 1e-9 * c);
    EXPECT_NEAR(vi.optimal_cost, vi.values[0], 1e-12);
}

TEST(Enumerate, SizesAndValidity) {
    const auto& t = tiny();
    const auto& cfg = t.sc.config;
    EXPECT_EQ(raw_action_count(2, 2), 3u * 4u * 81u);
    EXPECT_EQ(raw_action_count(4, 8), 9u * 16u * 6561u);
    EXPECT_LE(t.mdp.num_states(), 2u * 16u);
    // C holds exactly one input: empty plus one input of either task.
    EXPECT_EQ(t.mdp.num_caches(), 3);
    for (std::size_t s = 0; s < t.mdp.num_states(); ++s) {
        const auto st = t.mdp.state(s);
        EXPECT_EQ(t.mdp.state_index(st), s);
        ASSERT_FALSE(t.mdp.actions[s].empty());
        for (std::size_t k = 0; k < t.mdp.actions[s].size(); ++k) {
            const auto& entry = t.mdp.actions[s][k];
            const auto a = t.mdp.action(s, k);
            ASSERT_TRUE(validate_action(st, a, cfg).ok());
            for (int next = 0; next < 2; ++next) {
                auto r = step(st, a, 1.0, next, cfg);
                ASSERT_EQ(-r.cost.reward, entry.cost);
                ASSERT_EQ(t.mdp.state_index(r.next), static_cast<std::size_t>(next) * t.mdp.num_caches() + entry.next_cache);
            }
        }
    }
}

TEST(Enumerate, EveryValidActionIsListed) {
    // Brute force over the raw action space.
    const auto& t = tiny();
    const auto& cfg = t.sc.config;
    for (std::size_t s = 0; s < t.mdp.num_states(); ++s) {
        const auto st = t.mdp.state(s);
        std::size_t valid = 0;
        for (std::uint64_t code = 0; code < raw_action_count(2, 2); ++code) {
            auto a = decode_action_code(code, 2, 2);
            ASSERT_EQ(encode_action(a, 2), code);
            if (validate_action(st, a, cfg).ok()) {
                ++valid;
                EXPECT_NO_THROW(t.mdp.find_action(s, a));
            }
        }
        EXPECT_EQ(valid, t.mdp.actions[s].size());
    }
}

TEST(Enumerate, BudgetIsEnforced) {
    const auto& t = tiny();
    try {
        enumerate_mdp(t.sc.config, t.sc.model, 1.0, 10);
        FAIL() << "expected a budget error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("budget"), std::string::npos);
    }
    auto big = build_scenario(ScenarioParams{});
    big.config.tasks.resize(9, big.config.tasks[0]);
    big.model.matrix = build_transition_matrix(9, 0.7, 1);
    EXPECT_THROW(enumerate_mdp(big.config, big.model, 1.0), ConfigError);
}

TEST(ValueIteration, ZeroCostGivesZeroValues) {
    auto mdp = tiny().mdp;
    for (auto& list : mdp.actions)
        for (auto& a : list) a.cost = 0.0;
    auto vi = value_iteration(mdp, 0.9);
    for (double v : vi.values) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(vi.residuals.size(), 1u);
}

TEST(ValueIteration, ResidualsContractAndPolicyIsOptimal) {
    const auto& t = tiny();
    auto vi = value_iteration(t.mdp, 0.9, 1e-9);
    ASSERT_GE(vi.residuals.size(), 2u);
    EXPECT_LT(vi.residuals.back(), 1e-9);
    // Contraction by gamma, up to rounding at the scale of the values.
    double scale = 0.0;
    for (double v : vi.values) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 1; k < vi.residuals.size(); ++k) {
        EXPECT_LE(vi.residuals[k], 0.9 * vi.residuals[k - 1] + 1e-13 * scale);
    }
    auto greedy = evaluate_policy(t.mdp, vi.policy, 0.9);
    for (std::size_t s = 0; s < greedy.size(); ++s) EXPECT_NEAR(greedy[s], vi.values[s], 1e-8);
    EXPECT_NEAR(start_cost(t.mdp, greedy), vi.optimal_cost, 1e-8);

    // No stationary policy beats the optimum anywhere.
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> pol(t.mdp.num_states());
        for (std::size_t s = 0; s < pol.size(); ++s) {
            pol[s] = std::uniform_int_distribution<std::size_t>(0, t.mdp.actions[s].size() - 1)(rng);
        }
        auto v = evaluate_policy(t.mdp, pol, 0.9);
        for (std::size_t s = 0; s < v.size(); ++s) ASSERT_GE(v[s], vi.values[s] - 1e-8);
    }
}

TEST(ValueIteration, PolicyEvaluationMatchesSimulation) {
    // Linear-system evaluation against a Monte Carlo estimate of the same policy.
    const auto& t = tiny();
    auto vi = value_iteration(t.mdp, 0.9);
    const std::size_t s0 = t.mdp.state_index(SystemState::empty(2, 0));
    std::mt19937_64 rng(12);
    double total = 0.0;
    const int episodes = 4000;
    for (int e = 0; e < episodes; ++e) {
        auto st = SystemState::empty(2, 0);
        double g = 1.0;
        for (int k = 0; k < 200; ++k) {
            const auto s = t.mdp.state_index(st);
            const auto a = t.mdp.action(s, vi.policy[s]);
            auto r = step(st, a, 1.0, sample_next_request(t.sc.model, st.request, rng), t.sc.config);
            total += g * -r.cost.reward;
            g *= 0.9;
            st = r.next;
        }
    }
    EXPECT_NEAR(total / episodes, vi.values[s0], 0.02 * vi.values[s0]);
}

TEST(ValueIteration, HeuristicIsNoBetterThanOptimum) {
    // The recency heuristic lifted to a stationary policy: the tracker only
    // knows the current request.
    const auto& t = tiny();
    auto vi = value_iteration(t.mdp, 0.9);
    std::vector<SystemAction> policy;
    for (std::size_t s = 0; s < t.mdp.num_states(); ++s) {
        const auto st = t.mdp.state(s);
        RecencyTracker tracker(2);
        tracker.observe(st.request);
        policy.push_back(mru_lru_policy(st, tracker, t.sc.config));
    }
    auto v = evaluate_policy(t.mdp, policy, 0.9);
    EXPECT_GE(start_cost(t.mdp, v), vi.optimal_cost - 1e-8);

    auto bad = policy;
    bad[0].reactive_cores = 0;
    EXPECT_THROW(evaluate_policy(t.mdp, bad, 0.9), ConfigError);
    EXPECT_THROW(value_iteration(t.mdp, 1.0), ConfigError);
}

TEST(ValueIteration, CsvListsEveryState) {
    const auto& t = tiny();
    auto vi = value_iteration(t.mdp, 0.9);
    std::ostringstream out;
    write_value_csv(out, t.mdp, vi);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "state,request,input_cached,output_cached,value,cores,push,delta_input,delta_output");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, t.mdp.num_states());
}
