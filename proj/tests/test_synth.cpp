#include <gtest/gtest.h>

#include <sstream>

#include "mxg/ingest.hpp"
#include "mxg/synth.hpp"

using namespace mxg;

namespace {

double mean_pairwise(const WindowFeatures& w) {
    double s = 0.0;
    int n = 0;
    for (int a = 0; a < kTrackedRoles; ++a) {
        for (int b = a + 1; b < kTrackedRoles; ++b) {
            s += std::hypot(w.positions[2 * a] - w.positions[2 * b], w.positions[2 * a + 1] - w.positions[2 * b + 1]);
            ++n;
        }
    }
    return s / n;
}

}  // namespace

TEST(Synth, SameSeedIsBitIdentical) {
    SynthConfig c;
    c.n_games = 5;
    const auto a = generate(c);
    const auto b = generate(c);
    std::ostringstream sa;
    std::ostringstream sb;
    write_events_csv(sa, a.events);
    write_events_csv(sb, b.events);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(to_json(a.truth).dump(), to_json(b.truth).dump());
    c.seed += 1;
    std::ostringstream sc;
    write_events_csv(sc, generate(c).events);
    EXPECT_NE(sa.str(), sc.str());
}

TEST(Synth, ZeroBetasGiveBaseRate) {
    SynthConfig c;
    c.seed = 3;
    c.n_games = 250;
    c.segments_per_game = 200;
    c.events_per_game = 0.0;
    c.planted_betas = SynthConfig::zero_betas();
    c.pattern_rate = 0.0;
    c.compact_odds = 1.0;
    const auto out = generate(c);
    ASSERT_EQ(out.truth.segments.size(), 50000u);
    double goals = 0.0;
    for (const auto& s : out.truth.segments) {
        EXPECT_NEAR(s.true_prob, 0.02, 1e-12);
        goals += s.goal;
    }
    EXPECT_NEAR(goals / 50000.0, 0.02, 0.003);
}

TEST(Synth, CompactWindowsAreTighter) {
    SynthConfig c;
    c.seed = 5;
    c.n_games = 10;
    const auto out = generate(c);
    const auto windows = build_windows(out.events, {30, 30});
    const auto idx = out.truth.index();
    double sum[2] = {0, 0};
    int n[2] = {0, 0};
    for (const auto& w : windows) {
        if (!w.has_full_positions()) {
            continue;
        }
        const int k = out.truth.segments[idx.at(w.window_id)].mode == FormationMode::compact ? 1 : 0;
        sum[k] += mean_pairwise(w);
        ++n[k];
    }
    ASSERT_GT(n[0], 50);
    ASSERT_GT(n[1], 50);
    EXPECT_LT(sum[1] / n[1], sum[0] / n[0]);
}

TEST(Synth, TruthMatchesWindowsAndPlantedQuantities) {
    SynthConfig c;
    c.n_games = 4;
    const auto out = generate(c);
    EXPECT_EQ(out.truth.segments.size(), static_cast<std::size_t>(c.n_games * c.segments_per_game));
    EXPECT_EQ(out.truth.planted_pattern, c.planted_pattern);
    EXPECT_EQ(out.truth.planted_ate, c.planted_ate);
    const auto windows = build_windows(out.events, {30, 30});
    const auto idx = out.truth.index();
    for (const auto& w : windows) {
        ASSERT_TRUE(idx.count(w.window_id)) << w.window_id;
        EXPECT_EQ(w.goal_label, out.truth.segments[idx.at(w.window_id)].goal);
    }
    const auto j = to_json(out.truth);
    EXPECT_TRUE(j.contains("planted_betas"));
    EXPECT_EQ(j["segments"].size(), out.truth.segments.size());
}

TEST(Synth, InvalidConfigIsAnError) {
    SynthConfig c;
    c.base_goal_rate = 1.0;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.n_games = -1;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.planted_betas[EventType::goal] = 1.0;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.pattern_odds = 0.0;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.pattern_rate = 1.5;
    EXPECT_THROW(generate(c), ConfigError);
    CausalSynthConfig cc;
    cc.p = 2;
    EXPECT_THROW(generate_causal(cc), ConfigError);
}

TEST(SynthCausal, ConfoundedTableCarriesPlantedEffect) {
    CausalSynthConfig cc;
    cc.n = 5000;
    const auto t = generate_causal(cc);
    EXPECT_EQ(t.X.rows(), 5000);
    EXPECT_EQ(t.names.size(), 5u);
    EXPECT_EQ(t.planted_ate, 0.12);
    // treated units sit higher on the confounders
    double m1 = 0;
    double m0 = 0;
    int n1 = 0;
    for (std::size_t i = 0; i < t.treatment.size(); ++i) {
        const double s = t.X(static_cast<Eigen::Index>(i), 0) + t.X(static_cast<Eigen::Index>(i), 1);
        (t.treatment[i] ? m1 : m0) += s;
        n1 += t.treatment[i];
    }
    EXPECT_GT(m1 / n1, m0 / (5000 - n1));
    EXPECT_EQ(generate_causal(cc).outcome, t.outcome);
}
