#pragma once

// Seeded synthetic event streams with planted ground truth.
//
// A game is a run of 30 s segments. Each segment belongs to one team, draws
// Poisson counts per modeled event type, and scores a goal with probability
// sigmoid(b0 + sum_e b_e x_e [+ pattern bonus] [+ compact bonus]).
// Player positions come from a two-mode mixture: a tight forward wedge
// ("compact") and a spread-out shape ("diffuse").

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mxg/common.hpp"
#include "mxg/event.hpp"
#include "mxg/ingest.hpp"
#include "mxg/momentum.hpp"

namespace mxg {

struct SynthConfig {
    std::uint64_t seed = 7;
    int n_games = 40;
    int segments_per_game = 120;  ///< 30 s each, split evenly over 3 periods
    double segment_s = 30.0;
    double events_per_game = 1200.0;  ///< expected modeled events per game (spread evenly over types)
    std::map<EventType, double> planted_betas = default_betas();
    double base_goal_rate = 0.02;  ///< goal probability of a segment with average counts
    std::vector<EventType> planted_pattern = {EventType::penalty_drawn, EventType::lpr, EventType::shot};
    double pattern_rate = 0.05;  ///< chance a segment carries the planted pattern
    double pattern_odds = 4.0;   ///< goal-odds multiplier when it does
    double compact_fraction = 0.35;
    double compact_odds = 2.0;  ///< goal-odds multiplier in compact-mode segments
    double planted_ate = 0.12;
    double confounding_strength = 1.0;

    static std::map<EventType, double> default_betas() {
        const auto m = reference_momentum_model();
        return m.coefficients;
    }
    static std::map<EventType, double> zero_betas() {
        std::map<EventType, double> b;
        for (EventType e : modeled_events()) {
            b[e] = 0.0;
        }
        return b;
    }

    double rate_per_type() const { return events_per_game / (static_cast<double>(segments_per_game) * kModeledEventCount); }

    void validate() const {
        if (!(base_goal_rate > 0.0 && base_goal_rate < 1.0)) {
            throw ConfigError("synth: base_goal_rate must be in (0, 1)");
        }
        if (n_games < 0 || segments_per_game <= 0 || !(segment_s > 0.0)) {
            throw ConfigError("synth: n_games >= 0, segments_per_game > 0 and segment_s > 0 required");
        }
        if (!(events_per_game >= 0.0)) {
            throw ConfigError("synth: events_per_game must be >= 0");
        }
        for (const auto& [e, b] : planted_betas) {
            if (feature_index(e) < 0) {
                throw ConfigError("synth: planted_betas may only key modeled events, got '" + std::string(event_name(e)) + "'");
            }
            if (!std::isfinite(b)) {
                throw ConfigError("synth: planted beta for '" + std::string(event_name(e)) + "' is not finite");
            }
        }
        if (!(pattern_rate >= 0.0 && pattern_rate <= 1.0) || !(compact_fraction >= 0.0 && compact_fraction <= 1.0)) {
            throw ConfigError("synth: pattern_rate and compact_fraction must be in [0, 1]");
        }
        if (!(pattern_odds > 0.0) || !(compact_odds > 0.0)) {
            throw ConfigError("synth: odds multipliers must be > 0");
        }
        for (EventType e : planted_pattern) {
            if (feature_index(e) < 0) {
                throw ConfigError("synth: planted_pattern may only use modeled events");
            }
        }
        if (!std::isfinite(planted_ate) || !std::isfinite(confounding_strength)) {
            throw ConfigError("synth: planted_ate and confounding_strength must be finite");
        }
    }
};

enum class FormationMode { compact, diffuse };

/// Role means (x, y) in the attack frame for each mode, and the per-segment
/// spread around them.
struct FormationShape {
    std::array<double, 10> center;
    double segment_sd;  ///< spread of the segment's anchor around the center
    double event_sd;    ///< spread of single events around the anchor
};

inline FormationShape compact_shape() {
    return {{82.0, 0.0, 72.0, 10.0, 72.0, -10.0, 60.0, 15.0, 60.0, -15.0}, 1.5, 2.0};
}
inline FormationShape diffuse_shape() {
    return {{62.0, -4.0, 74.0, 30.0, 74.0, -30.0, 42.0, 32.0, 42.0, -32.0}, 6.0, 4.0};
}

struct SegmentTruth {
    std::string window_id;  ///< id of the window that coincides with this segment
    std::string game_id;
    TeamSide team = TeamSide::home;
    double start_s = 0.0;
    double true_prob = 0.0;
    FormationMode mode = FormationMode::diffuse;
    bool pattern = false;
    int goal = 0;
};

struct GroundTruth {
    std::map<EventType, double> planted_betas;
    double intercept = 0.0;
    double base_goal_rate = 0.0;
    std::vector<EventType> planted_pattern;
    double pattern_odds = 1.0;
    double compact_odds = 1.0;
    double planted_ate = 0.0;
    double confounding_strength = 0.0;
    double segment_s = 30.0;
    std::vector<SegmentTruth> segments;

    /// window_id -> index into segments.
    std::map<std::string, std::size_t> index() const {
        std::map<std::string, std::size_t> m;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            m[segments[i].window_id] = i;
        }
        return m;
    }
};

struct SynthOutput {
    std::vector<EventRecord> events;
    GroundTruth truth;
};

/// Intercept giving `base` goal probability at the expected counts.
inline double planted_intercept(const SynthConfig& cfg) {
    double s = 0.0;
    for (const auto& [e, b] : cfg.planted_betas) {
        s += b * cfg.rate_per_type();
    }
    return logit(cfg.base_goal_rate) - s;
}

inline std::string segment_window_id(const std::string& game, TeamSide side, double start) {
    return game + ":" + std::string(side_name(side)) + ":" + detail::format_start(start);
}

namespace detail {

inline std::string game_name(int g) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "g%04d", g + 1);
    return buf;
}

inline bool is_chain_end(EventType e) {
    return e == EventType::shot || e == EventType::goal || e == EventType::controlled_exit || e == EventType::icing ||
           e == EventType::dump_out || e == EventType::offside || e == EventType::save;
}

inline void generate_game(const SynthConfig& cfg, int g, double b0, std::vector<EventRecord>& events, std::vector<SegmentTruth>& truth) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(g)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::poisson_distribution<int> pois(std::max(cfg.rate_per_type(), 1e-12));
    const std::string gid = game_name(g);
    const int per_period = std::max(1, cfg.segments_per_game / 3);
    const auto compact = compact_shape();
    const auto diffuse = diffuse_shape();

    for (int s = 0; s < cfg.segments_per_game; ++s) {
        const double start = s * cfg.segment_s;
        const int period = std::min(3, 1 + s / per_period);
        const TeamSide side = uniform01(rng) < 0.5 ? TeamSide::home : TeamSide::away;
        const bool is_compact = uniform01(rng) < cfg.compact_fraction;
        const bool pattern = uniform01(rng) < cfg.pattern_rate;
        const auto& shape = is_compact ? compact : diffuse;

        std::vector<EventType> seq;
        for (EventType e : modeled_events()) {
            const int c = cfg.rate_per_type() > 0.0 ? pois(rng) : 0;
            for (int k = 0; k < c; ++k) {
                seq.push_back(e);
            }
        }
        std::shuffle(seq.begin(), seq.end(), rng);
        if (pattern && !cfg.planted_pattern.empty()) {
            // Insert where a chain would start: at the front or right after a terminator.
            std::vector<std::size_t> slots{0};
            for (std::size_t i = 0; i < seq.size(); ++i) {
                if (is_chain_end(seq[i])) {
                    slots.push_back(i + 1);
                }
            }
            const std::size_t at = slots[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(slots.size()))];
            seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(at), cfg.planted_pattern.begin(), cfg.planted_pattern.end());
        }

        double z = b0;
        for (EventType e : seq) {
            auto it = cfg.planted_betas.find(e);
            if (it != cfg.planted_betas.end()) {
                z += it->second;
            }
        }
        if (pattern) {
            z += std::log(cfg.pattern_odds);
        }
        if (is_compact) {
            z += std::log(cfg.compact_odds);
        }
        const double p = sigmoid(z);
        const int goal = uniform01(rng) < p ? 1 : 0;
        if (goal) {
            // The goal follows a shot when there is one, otherwise opens the segment.
            std::vector<std::size_t> shots;
            for (std::size_t i = 0; i < seq.size(); ++i) {
                if (seq[i] == EventType::shot) {
                    shots.push_back(i + 1);
                }
            }
            const std::size_t at = shots.empty() ? 0 : shots[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(shots.size()))];
            seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(at), EventType::goal);
            if (uniform01(rng) < 0.7) {
                seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(at) + 1, EventType::assist);
            }
        }

        std::array<double, 10> anchor{};
        for (int k = 0; k < 10; ++k) {
            anchor[static_cast<std::size_t>(k)] = shape.center[static_cast<std::size_t>(k)] + shape.segment_sd * gauss(rng);
        }
        std::vector<double> times(seq.size());
        for (auto& t : times) {
            t = start + uniform01(rng) * cfg.segment_s;
        }
        std::sort(times.begin(), times.end());
        // The first five events cover every tracked role once.
        std::array<int, kTrackedRoles> perm{0, 1, 2, 3, 4};
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            EventRecord r;
            r.game_id = gid;
            r.period = period;
            r.clock_s = times[i];
            r.team_side = side;
            r.event_type = seq[i];
            int role = i < kTrackedRoles ? perm[i] : static_cast<int>(rng() % 6);
            r.player_role = static_cast<Role>(role);
            if (role < kTrackedRoles) {
                r.x = anchor[static_cast<std::size_t>(2 * role)] + shape.event_sd * gauss(rng);
                r.y = anchor[static_cast<std::size_t>(2 * role + 1)] + shape.event_sd * gauss(rng);
            } else {
                r.x = 50.0 + 20.0 * gauss(rng);
                r.y = 15.0 * gauss(rng);
            }
            r.x = std::clamp(r.x, -100.0, 100.0);
            r.y = std::clamp(r.y, -42.5, 42.5);
            if (attacks_left(period, side)) {
                r.x = -r.x;
                r.y = -r.y;
            }
            r.frame = Frame::raw;
            events.push_back(std::move(r));
        }
        SegmentTruth st;
        st.window_id = segment_window_id(gid, side, start);
        st.game_id = gid;
        st.team = side;
        st.start_s = start;
        st.true_prob = p;
        st.mode = is_compact ? FormationMode::compact : FormationMode::diffuse;
        st.pattern = pattern;
        st.goal = goal;
        truth.push_back(std::move(st));
    }
}

}  // namespace detail

/// Events for every game plus the planted quantities. Games draw from
/// independent seed streams, so output is bit-identical for a given seed.
inline SynthOutput generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthOutput out;
    const double b0 = planted_intercept(cfg);
    for (int g = 0; g < cfg.n_games; ++g) {
        detail::generate_game(cfg, g, b0, out.events, out.truth.segments);
    }
    auto& t = out.truth;
    t.planted_betas = cfg.planted_betas;
    t.intercept = b0;
    t.base_goal_rate = cfg.base_goal_rate;
    t.planted_pattern = cfg.planted_pattern;
    t.pattern_odds = cfg.pattern_odds;
    t.compact_odds = cfg.compact_odds;
    t.planted_ate = cfg.planted_ate;
    t.confounding_strength = cfg.confounding_strength;
    t.segment_s = cfg.segment_s;
    return out;
}

inline nlohmann::ordered_json to_json(const GroundTruth& t, bool include_segments = true) {
    nlohmann::ordered_json j;
    auto& b = j["planted_betas"] = nlohmann::ordered_json::object();
    for (const auto& [e, v] : t.planted_betas) {
        b[std::string(event_name(e))] = v;
    }
    j["intercept"] = t.intercept;
    j["base_goal_rate"] = t.base_goal_rate;
    auto& pat = j["planted_pattern"] = nlohmann::ordered_json::array();
    for (EventType e : t.planted_pattern) {
        pat.push_back(std::string(event_name(e)));
    }
    j["pattern_odds"] = t.pattern_odds;
    j["compact_odds"] = t.compact_odds;
    j["planted_ate"] = t.planted_ate;
    j["confounding_strength"] = t.confounding_strength;
    j["segment_s"] = t.segment_s;
    const auto c = compact_shape();
    const auto d = diffuse_shape();
    j["formation_modes"] = {{"compact", {{"center", c.center}, {"segment_sd", c.segment_sd}, {"event_sd", c.event_sd}}},
                            {"diffuse", {{"center", d.center}, {"segment_sd", d.segment_sd}, {"event_sd", d.event_sd}}}};
    if (include_segments) {
        auto& segs = j["segments"] = nlohmann::ordered_json::array();
        for (const auto& s : t.segments) {
            segs.push_back({{"window_id", s.window_id},
                            {"true_prob", s.true_prob},
                            {"mode", s.mode == FormationMode::compact ? "compact" : "diffuse"},
                            {"pattern", s.pattern},
                            {"goal", s.goal}});
        }
    }
    return j;
}

// ---- confounded treatment table ----

struct CausalTable {
    Eigen::MatrixXd X;
    std::vector<std::string> names;
    std::vector<int> treatment;
    std::vector<double> outcome;
    std::vector<double> true_propensity;
    double planted_ate = 0.0;
};

struct CausalSynthConfig {
    std::uint64_t seed = 11;
    std::size_t n = 20000;
    int p = 5;
    double planted_ate = 0.12;
    double confounding_strength = 1.0;
    double noise_sd = 0.3;
};

/// Baseline outcome shared by both arms.
inline double causal_baseline(const Eigen::RowVectorXd& x) {
    return 0.6 * x(0) + 0.4 * x(1) + 0.3 * std::sin(x(2)) + (x.size() > 3 ? 0.2 * x(3) * (x(3) > 0.0) : 0.0);
}

/// X ~ N(0, I); T ~ Bernoulli(sigmoid(strength * sum(x) / sqrt p));
/// Y = baseline(X) + ate * T + noise. Every covariate shifts treatment and
/// most also shift the outcome, so the naive difference in means is biased.
inline CausalTable generate_causal(const CausalSynthConfig& cfg) {
    if (cfg.p < 3) {
        throw ConfigError("generate_causal: need at least 3 covariates");
    }
    if (cfg.n == 0) {
        throw ConfigError("generate_causal: n must be > 0");
    }
    CausalTable t;
    t.planted_ate = cfg.planted_ate;
    Rng rng(derive_seed(cfg.seed, 0xCA05));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(cfg.n);
    t.X.resize(n, cfg.p);
    for (int j = 0; j < cfg.p; ++j) {
        t.names.push_back("x" + std::to_string(j));
    }
    t.treatment.resize(cfg.n);
    t.outcome.resize(cfg.n);
    t.true_propensity.resize(cfg.n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < cfg.p; ++j) {
            t.X(i, j) = gauss(rng);
        }
        const double e = sigmoid(cfg.confounding_strength * t.X.row(i).sum() / std::sqrt(static_cast<double>(cfg.p)));
        const int ti = uniform01(rng) < e ? 1 : 0;
        const auto u = static_cast<std::size_t>(i);
        t.true_propensity[u] = e;
        t.treatment[u] = ti;
        t.outcome[u] = causal_baseline(t.X.row(i)) + cfg.planted_ate * ti + cfg.noise_sd * gauss(rng);
    }
    return t;
}

}  // namespace mxg
