#include "mecsac/codec.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace mecsac;
using mecsac::testing::default_scenario;
using mecsac::testing::plain_config;
using mecsac::testing::random_continuous;
using mecsac::testing::random_state;

TEST(Quantize, BinExamples) {
    EXPECT_EQ(quantize_component(0.3, 0, 1), 0);
    EXPECT_EQ(quantize_component(0.7, 0, 1), 1);
    EXPECT_EQ(quantize_component(0.0, -1, 1), 0);
    EXPECT_EQ(quantize_component(1.0, -1, 1), 1);
    EXPECT_EQ(quantize_component(-1.0, -1, 1), -1);
    EXPECT_EQ(quantize_component(8.0, 0, 8), 8);
    EXPECT_EQ(quantize_component(0.0, 0, 8), 0);
    // Nine bins of width 8/9 over [0, 8].
    EXPECT_EQ(quantize_component(4.0, 0, 8), 4);
    EXPECT_EQ(quantize_component(8.0 / 9.0 * 5.0 + 1e-9, 0, 8), 5);
    EXPECT_EQ(quantize_component(42.0, 0, 8), 8);
    EXPECT_EQ(quantize_component(-3.0, 0, 8), 0);
    EXPECT_EQ(quantize_component(std::numeric_limits<double>::quiet_NaN(), -1, 1), -1);
}

TEST(Quantize, IsMonotone) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 10.0);
    for (int k = 0; k < 100'000; ++k) {
        double x = u(rng), y = u(rng);
        if (x > y) std::swap(x, y);
        ASSERT_LE(quantize_component(x, 0, 8), quantize_component(y, 0, 8));
        ASSERT_LE(quantize_component(x / 5, -1, 1), quantize_component(y / 5, -1, 1));
        ASSERT_LE(quantize_component(x / 8, 0, 1), quantize_component(y / 8, 0, 1));
    }
}

TEST(Correct, RaisesCoresToDeadlineFloor) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 0);
    auto raw = ContinuousAction::zeros(4);
    auto a = SystemAction::idle(4);
    a.reactive_cores = 2;
    EXPECT_EQ(correct(s, a, raw, cfg).reactive_cores, 4);
    s.output_cached[0] = 1;
    a.reactive_cores = 7;
    EXPECT_EQ(correct(s, a, raw, cfg).reactive_cores, 0);
}

TEST(Correct, KeepsOnlyStrongestPush) {
    auto cfg = plain_config();
    cfg.cache_capacity = 100000;
    auto s = SystemState::empty(4, 3);
    auto raw = ContinuousAction::zeros(4);
    raw.reactive_cores_raw = 5.0;
    raw.push_raw = {0.9, 0.8, 0.2, 0.1};
    auto a = quantize(raw, cfg);
    EXPECT_EQ(a.push, (std::vector<std::uint8_t>{1, 1, 0, 0}));
    auto c = correct(s, a, raw, cfg);
    EXPECT_EQ(c.push, (std::vector<std::uint8_t>{1, 0, 0, 0}));
    EXPECT_EQ(c.cache_delta_input[0], 1);
    EXPECT_TRUE(validate_action(s, c, cfg).ok());
}

TEST(Correct, NoPushForCachedTasks) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 3);
    s.input_cached[0] = 1;
    s.output_cached[1] = 1;
    auto raw = ContinuousAction::zeros(4);
    raw.push_raw = {1.0, 1.0, 0.0, 0.0};
    auto c = correct(s, quantize(raw, cfg), raw, cfg);
    EXPECT_EQ(c.push, (std::vector<std::uint8_t>{0, 0, 0, 0}));
}

TEST(Correct, OverflowDropsLowestRawEntries) {
    auto cfg = plain_config();  // C = 40000: two inputs fit, not three
    auto s = SystemState::empty(4, 3);
    s.input_cached[0] = 1;
    s.input_cached[1] = 1;
    auto raw = ContinuousAction::zeros(4);
    raw.reactive_cores_raw = 5.0;
    raw.push_raw[2] = 1.0;
    raw.cache_delta_input_raw = {0.1, -0.1, 0.9, 0.0};
    auto c = correct(s, quantize(raw, cfg), raw, cfg);
    EXPECT_EQ(c.push[2], 1);
    EXPECT_EQ(c.cache_delta_input[2], 1);
    // Task 1 carries the smallest raw delta among the held inputs.
    EXPECT_EQ(c.cache_delta_input[1], -1);
    EXPECT_EQ(c.cache_delta_input[0], 0);
    EXPECT_TRUE(validate_action(s, c, cfg).ok());

    // Without a caching intent the push is kept but its data only stays when
    // there is room.
    raw.cache_delta_input_raw[2] = 0.0;
    auto d = correct(s, quantize(raw, cfg), raw, cfg);
    EXPECT_EQ(d.push[2], 1);
    EXPECT_EQ(d.cache_delta_input, (std::vector<std::int8_t>{0, 0, 0, 0}));
    s.input_cached[1] = 0;
    auto e = correct(s, quantize(raw, cfg), raw, cfg);
    EXPECT_EQ(e.cache_delta_input[2], 1);
}

TEST(Correct, FillsSlackWithRequestedData) {
    auto cfg = plain_config();
    auto s = SystemState::empty(4, 2);
    auto raw = ContinuousAction::zeros(4);
    raw.reactive_cores_raw = 5.0;
    raw.cache_delta_input_raw[2] = -0.9;
    raw.cache_delta_output_raw[2] = -0.5;
    auto a = quantize(raw, cfg);
    a.cache_delta_input[2] = 0;
    a.cache_delta_output[2] = 0;
    auto c = correct(s, a, raw, cfg);
    // Output ranks first; the input no longer fits next to it.
    EXPECT_EQ(c.cache_delta_output[2], 1);
    EXPECT_EQ(c.cache_delta_input[2], 0);
    // Without the cache family nothing is added.
    auto d = correct(s, a, raw, cfg, ActionMask{true, false});
    EXPECT_EQ(d.cache_delta_output[2], 0);
    EXPECT_EQ(d.cache_delta_input[2], 0);
}

TEST(Correct, MaskedFamiliesStayZero) {
    auto sc = default_scenario();
    std::mt19937_64 rng(17);
    for (int k = 0; k < 20'000; ++k) {
        auto s = random_state(sc.config, rng);
        auto raw = random_continuous(sc.config, rng);
        auto dfnc = decode_action(s, raw, sc.config, ActionMask{false, false});
        auto dfc = decode_action(s, raw, sc.config, ActionMask{false, true});
        for (int f = 0; f < 4; ++f) {
            ASSERT_EQ(dfnc.push[f], 0);
            ASSERT_EQ(dfnc.cache_delta_input[f], 0);
            ASSERT_EQ(dfnc.cache_delta_output[f], 0);
            ASSERT_EQ(dfc.push[f], 0);
        }
    }
}

// Totality, idempotence and the single-push rule over random pairs.
TEST(Correct, FuzzTotalityAndIdempotence) {
    auto sc = default_scenario();
    const auto& cfg = sc.config;
    std::mt19937_64 rng(99);
    for (int k = 0; k < 100'000; ++k) {
        auto s = random_state(cfg, rng);
        auto raw = random_continuous(cfg, rng);
        auto once = decode_action(s, raw, cfg);
        auto verdict = validate_action(s, once, cfg);
        ASSERT_TRUE(verdict.ok()) << verdict.describe();
        ASSERT_EQ(correct(s, once, raw, cfg), once) << ::testing::PrintToString(s);
        int pushes = 0;
        for (int f = 0; f < cfg.num_tasks(); ++f) {
            if (once.push[f]) {
                ++pushes;
                ASSERT_EQ(s.input_cached[f] + s.output_cached[f], 0);
            }
        }
        ASSERT_LE(pushes, 1);
    }
}

TEST(Correct, PreservesValidIntent) {
    auto sc = default_scenario();
    const auto& cfg = sc.config;
    std::mt19937_64 rng(123);
    int checked = 0;
    while (checked < 20'000) {
        auto s = random_state(cfg, rng);
        auto intent = mecsac::testing::random_valid_action(s, cfg, rng);
        int pushes = 0;
        bool clean = true;
        for (int f = 0; f < cfg.num_tasks(); ++f) {
            pushes += intent.push[f];
            if (intent.push[f] && s.input_cached[f] + s.output_cached[f] > 0) clean = false;
        }
        if (pushes > 1 || !clean) continue;
        auto raw = mecsac::testing::bin_centres(intent, cfg);
        auto q = quantize(raw, cfg);
        ASSERT_EQ(q, intent);
        ++checked;
        auto c = correct(s, q, raw, cfg);
        ASSERT_EQ(c.reactive_cores, q.reactive_cores);
        ASSERT_EQ(c.push, q.push) << ::testing::PrintToString(s) << ::testing::PrintToString(q);
        ASSERT_TRUE(validate_action(s, c, cfg).ok());
    }
}

TEST(Normalize, BoundsAndRoundTrip) {
    auto cfg = plain_config();
    Normalizer n(cfg);
    const auto& spec = n.spec();
    ASSERT_EQ(spec.state.size(), 9u);
    ASSERT_EQ(spec.action.size(), 13u);
    for (const auto& b : spec.state) EXPECT_LT(b.lo, b.hi);
    for (const auto& b : spec.action) EXPECT_LT(b.lo, b.hi);

    auto s = SystemState::empty(4, 0);
    EXPECT_EQ(n.normalize_state(s)[0], -1.0);
    auto mid = ContinuousAction::zeros(4);
    mid.reactive_cores_raw = 4.0;
    auto v = n.normalize_action(mid);
    EXPECT_DOUBLE_EQ(v[0], 0.0);
    EXPECT_DOUBLE_EQ(v[1], -1.0);
    EXPECT_DOUBLE_EQ(v[5], 0.0);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 10'000; ++k) {
        std::vector<double> x(13);
        for (double& e : x) e = u(rng);
        auto back = n.normalize_action(n.denormalize_action(x));
        for (int i = 0; i < 13; ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
    }
    EXPECT_LT(worst, 1e-12);
    EXPECT_EQ(n.clamped_count(), 0u);
}

TEST(Normalize, OutOfRangeIsClampedAndCounted) {
    Normalizer n(plain_config());
    std::vector<double> x(13, 0.0);
    x[0] = 3.0;
    x[4] = std::numeric_limits<double>::quiet_NaN();
    auto a = n.denormalize_action(x);
    EXPECT_EQ(a.reactive_cores_raw, 8.0);
    EXPECT_EQ(a.push_raw[3], 0.5);
    EXPECT_EQ(n.clamped_count(), 2u);
}

TEST(Normalize, ActiveExpansionFillsMaskedDefaults) {
    EXPECT_EQ(active_action_dim(4, {}), 13);
    EXPECT_EQ(active_action_dim(4, {false, true}), 9);
    EXPECT_EQ(active_action_dim(4, {false, false}), 1);
    std::vector<double> one{0.25};
    auto full = expand_active_action(one, 4, {false, false});
    ASSERT_EQ(full.size(), 13u);
    EXPECT_EQ(full[0], 0.25);
    for (int f = 1; f <= 4; ++f) EXPECT_EQ(full[f], -1.0);
    for (int f = 5; f < 13; ++f) EXPECT_EQ(full[f], 0.0);
    EXPECT_THROW(expand_active_action(one, 4, {}), std::invalid_argument);
}
