#include "mecsac/baselines.hpp"
#include "mecsac/rollout.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace mecsac;
using mecsac::testing::plain_config;

namespace {

RecencyTracker history(int n, std::initializer_list<int> requests) {
    RecencyTracker t(n);
    for (int r : requests) t.observe(r);
    return t;
}

SystemState with_inputs(int n, int request, std::initializer_list<int> cached) {
    SystemState s = SystemState::empty(n, request);
    for (int f : cached) s.input_cached[f] = 1;
    return s;
}

std::vector<TraceRecord> replay(HeuristicKind kind, const Scenario& sc, const std::vector<int>& trace) {
    HeuristicController ctl(kind, sc.config);
    std::vector<TraceRecord> out;
    rollout(ctl, sc.config, trace, 1.0, [&](const TraceRecord& r) { out.push_back(r); });
    return out;
}

}  // namespace

TEST(Heuristics, CoreBudgetRoundsHalfUp) {
    SystemConfig c = plain_config();
    for (auto [m, expect] : {std::pair{8, 6}, {2, 2}, {3, 2}, {5, 4}, {6, 5}, {4, 3}}) {
        c.num_cores = m;
        EXPECT_EQ(heuristic_core_budget(c), expect) << "M=" << m;
    }
}

TEST(Heuristics, ServesWithFixedBudget) {
    auto cfg = plain_config();
    auto t = history(4, {1, 0});
    for (auto* policy : {&mru_lru_policy, &mfu_lfu_policy}) {
        auto a = policy(SystemState::empty(4, 0), t, cfg);
        EXPECT_EQ(a.reactive_cores, 6);
        EXPECT_EQ(a.cache_delta_input[0], 1);
        EXPECT_EQ(a.push[1], 1);
        for (int f = 0; f < 4; ++f) EXPECT_EQ(a.cache_delta_output[f], 0);
    }
    // The deadline floor dominates a small budget.
    cfg.core_frequency = 1.0e8;  // I w / (tau f_D) = 6.4 -> 7 cores
    EXPECT_EQ(mru_lru_policy(SystemState::empty(4, 0), t, cfg).reactive_cores, 7);
}

TEST(Heuristics, NothingToPushWhenEveryInputIsCached) {
    auto cfg = plain_config();
    cfg.cache_capacity = 100000;
    auto t = history(4, {0, 1, 2, 3});
    auto s = with_inputs(4, 3, {0, 1, 2, 3});
    for (auto* policy : {&mru_lru_policy, &mfu_lfu_policy}) {
        auto a = policy(s, t, cfg);
        EXPECT_EQ(a.push, (std::vector<std::uint8_t>{0, 0, 0, 0}));
        EXPECT_TRUE(validate_action(s, a, cfg).ok());
    }
}

TEST(Heuristics, RecencyAndFrequencyEvictDifferentInputs) {
    auto cfg = plain_config();
    cfg.cache_capacity = 48000;  // three inputs
    auto t = history(4, {1, 1, 2, 2, 2, 3, 0});
    auto s = with_inputs(4, 0, {0, 1, 3});

    // Task 2 is both the most recent and the most frequent uncached task.
    auto mru = mru_lru_policy(s, t, cfg);
    EXPECT_EQ(mru.push, (std::vector<std::uint8_t>{0, 0, 1, 0}));
    EXPECT_EQ(mru.cache_delta_input, (std::vector<std::int8_t>{0, -1, 1, 0}));  // task 1 least recent

    auto mfu = mfu_lfu_policy(s, t, cfg);
    EXPECT_EQ(mfu.push, (std::vector<std::uint8_t>{0, 0, 1, 0}));
    EXPECT_EQ(mfu.cache_delta_input, (std::vector<std::int8_t>{0, 0, 1, -1}));  // task 3 least frequent
    EXPECT_TRUE(validate_action(s, mru, cfg).ok());
    EXPECT_TRUE(validate_action(s, mfu, cfg).ok());
}

TEST(Heuristics, FullCacheEvictsBeforePushing) {
    auto cfg = plain_config();
    auto t = history(4, {2, 1, 0});
    auto s = with_inputs(4, 0, {0, 2});
    auto a = mru_lru_policy(s, t, cfg);
    EXPECT_EQ(a.push, (std::vector<std::uint8_t>{0, 1, 0, 0}));
    EXPECT_EQ(a.cache_delta_input, (std::vector<std::int8_t>{0, 1, -1, 0}));
}

TEST(Heuristics, TrackerInvariants) {
    RecencyTracker t(3);
    EXPECT_EQ(t.last_seen(1), -1);
    std::uint64_t prev[3] = {0, 0, 0};
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> pick(0, 2);
    for (int k = 0; k < 1000; ++k) {
        t.observe(pick(rng));
        for (int f = 0; f < 3; ++f) {
            EXPECT_GE(t.count(f), prev[f]);
            EXPECT_LE(t.last_seen(f), t.now());
            prev[f] = t.count(f);
        }
    }
    t.reset();
    EXPECT_EQ(t.count(0), 0u);
    EXPECT_EQ(t.now(), -1);
}

TEST(Heuristics, AlwaysValidOnRandomTraces) {
    std::vector<ScenarioParams> variants(5);
    variants[1].cache_capacity = 0;
    variants[2].cache_capacity = 20000;
    variants[3].num_tasks = 7;
    variants[3].cache_capacity = 90000;
    variants[4].num_cores = 5;
    variants[4].cache_capacity = 70000;
    std::uint64_t seed = 1;
    for (const auto& p : variants) {
        auto sc = build_scenario(p);
        auto trace = sample_request_trace(sc.model, 20'000, seed++);
        for (auto kind : {HeuristicKind::MruLru, HeuristicKind::MfuLfu}) {
            // rollout() validates every action through step().
            EXPECT_NO_THROW(replay(kind, sc, trace));
        }
    }
    // Arbitrary reachable-looking states with arbitrary histories.
    auto sc = mecsac::testing::default_scenario();
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> pick(0, 3);
    for (int k = 0; k < 20'000; ++k) {
        RecencyTracker t(4);
        for (int j = 0, len = pick(rng) * 3; j < len; ++j) t.observe(pick(rng));
        auto s = mecsac::testing::random_state(sc.config, rng);
        t.observe(s.request);
        ASSERT_TRUE(validate_action(s, mru_lru_policy(s, t, sc.config), sc.config).ok());
        ASSERT_TRUE(validate_action(s, mfu_lfu_policy(s, t, sc.config), sc.config).ok());
    }
}

TEST(Heuristics, DeterministicAndShareComputationCost) {
    auto sc = mecsac::testing::default_scenario();
    auto trace = sample_request_trace(sc.model, 50'000, 9);
    auto a = replay(HeuristicKind::MruLru, sc, trace);
    auto b = replay(HeuristicKind::MruLru, sc, trace);
    auto c = replay(HeuristicKind::MfuLfu, sc, trace);
    ASSERT_EQ(a.size(), trace.size() - 1);
    bool differs = false;
    for (std::size_t t = 0; t < a.size(); ++t) {
        ASSERT_EQ(a[t].action, b[t].action);
        ASSERT_EQ(a[t].cost, b[t].cost);
        ASSERT_EQ(a[t].cost.reactive_energy, c[t].cost.reactive_energy) << "slot " << t;
        differs = differs || !(a[t].action == c[t].action);
    }
    EXPECT_TRUE(differs);
}

TEST(Restrictions, MasksPerVariant) {
    EXPECT_EQ(restricted_action_space(RestrictedKind::DFNC), (ActionMask{false, false}));
    EXPECT_EQ(restricted_action_space(RestrictedKind::DFC), (ActionMask{false, true}));
    EXPECT_EQ(restricted_action_space("PTDFC"), (ActionMask{true, true}));
    EXPECT_THROW(restricted_action_space("LRU"), ConfigError);
    for (auto k : {RestrictedKind::DFNC, RestrictedKind::DFC, RestrictedKind::PTDFC}) {
        EXPECT_EQ(parse_restricted_kind(to_string(k)), k);
    }

    auto cfg = plain_config();
    std::mt19937_64 rng(3);
    for (int k = 0; k < 5000; ++k) {
        auto s = mecsac::testing::random_state(cfg, rng);
        auto raw = mecsac::testing::random_continuous(cfg, rng);
        auto q = quantize(raw, cfg);
        auto dfc = q;
        apply_mask(dfc, restricted_action_space(RestrictedKind::DFC));
        EXPECT_EQ(dfc.cache_delta_input, q.cache_delta_input);
        EXPECT_EQ(dfc.push, (std::vector<std::uint8_t>(4, 0)));
        auto full = q;
        apply_mask(full, restricted_action_space(RestrictedKind::PTDFC));
        EXPECT_EQ(full, q);
        auto dfnc = decode_action(s, raw, cfg, restricted_action_space(RestrictedKind::DFNC));
        EXPECT_EQ(dfnc.push, (std::vector<std::uint8_t>(4, 0)));
        EXPECT_EQ(dfnc.cache_delta_input, (std::vector<std::int8_t>(4, 0)));
        EXPECT_EQ(dfnc.cache_delta_output, (std::vector<std::int8_t>(4, 0)));
    }
}
