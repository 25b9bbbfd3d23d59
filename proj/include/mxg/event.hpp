#pragma once

// Event vocabulary and the raw event record.
//
// Token ids are stable and versioned (schema/event_vocabulary.v1.json):
//   0      pad
//   1..20  the twenty modeled micro-events, in coefficient-table order
//   21,22  goal, assist (labels only, never counted as features)

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "mxg/common.hpp"

namespace mxg {

enum class EventType : std::uint8_t {
    pad = 0,
    faceoff_success,
    lpr,
    pass,
    reception,
    block,
    puck_protection,
    carry,
    check,
    controlled_entry_against,
    controlled_entry,
    controlled_exit,
    icing,
    dump_out,
    dump_in,
    shot,
    penalty,
    penalty_drawn,
    save,
    rebound,
    offside,
    goal,
    assist,
};

inline constexpr int kVocabularySize = 23;
inline constexpr int kModeledEventCount = 20;
inline constexpr int kVocabularyVersion = 1;

inline constexpr std::array<std::string_view, kVocabularySize> kEventNames = {
    "pad",
    "faceoff_success",
    "lpr",
    "pass",
    "reception",
    "block",
    "puck_protection",
    "carry",
    "check",
    "controlled_entry_against",
    "controlled_entry",
    "controlled_exit",
    "icing",
    "dump_out",
    "dump_in",
    "shot",
    "penalty",
    "penalty_drawn",
    "save",
    "rebound",
    "offside",
    "goal",
    "assist",
};

constexpr int token_id(EventType e) { return static_cast<int>(e); }

constexpr std::string_view event_name(EventType e) { return kEventNames[static_cast<std::size_t>(e)]; }

/// The twenty event types that enter count features, in coefficient order.
constexpr std::array<EventType, kModeledEventCount> modeled_events() {
    std::array<EventType, kModeledEventCount> out{};
    for (int i = 0; i < kModeledEventCount; ++i) {
        out[static_cast<std::size_t>(i)] = static_cast<EventType>(i + 1);
    }
    return out;
}

/// Column index of a modeled event in count vectors, or -1 for pad/goal/assist.
constexpr int feature_index(EventType e) {
    const int t = token_id(e);
    return (t >= 1 && t <= kModeledEventCount) ? t - 1 : -1;
}

constexpr bool is_label_token(EventType e) { return e == EventType::goal || e == EventType::assist; }

inline EventType event_from_token(int token) {
    if (token < 0 || token >= kVocabularySize) {
        throw DataError("token id out of vocabulary: " + std::to_string(token));
    }
    return static_cast<EventType>(token);
}

namespace detail {
inline std::string squash(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '_' || c == '-' || c == ' ') {
            continue;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}
}  // namespace detail

/// Case-insensitive lookup that ignores '_', '-' and spaces, so "puckprotection",
/// "Puck Protection" and "puck_protection" all resolve. Also accepts
/// "loose_puck_recovery" for lpr.
inline std::optional<EventType> try_parse_event(std::string_view name) {
    const std::string key = detail::squash(name);
    if (key.empty()) {
        return std::nullopt;
    }
    for (int i = 0; i < kVocabularySize; ++i) {
        if (detail::squash(kEventNames[static_cast<std::size_t>(i)]) == key) {
            return static_cast<EventType>(i);
        }
    }
    if (key == "loosepuckrecovery") {
        return EventType::lpr;
    }
    return std::nullopt;
}

inline EventType parse_event(std::string_view name) {
    if (auto e = try_parse_event(name)) {
        return *e;
    }
    throw DataError("unknown event_type '" + std::string(name) + "'");
}

enum class Role : std::uint8_t { F1 = 0, F2, F3, D1, D2, other };
inline constexpr int kTrackedRoles = 5;
inline constexpr std::array<std::string_view, 6> kRoleNames = {"F1", "F2", "F3", "D1", "D2", "other"};

inline std::string_view role_name(Role r) { return kRoleNames[static_cast<std::size_t>(r)]; }

inline Role parse_role(std::string_view s) {
    for (std::size_t i = 0; i < kRoleNames.size(); ++i) {
        if (detail::squash(kRoleNames[i]) == detail::squash(s)) {
            return static_cast<Role>(i);
        }
    }
    throw DataError("unknown player_role '" + std::string(s) + "'");
}

enum class TeamSide : std::uint8_t { home = 0, away = 1 };

inline std::string_view side_name(TeamSide s) { return s == TeamSide::home ? "home" : "away"; }

inline TeamSide parse_side(std::string_view s) {
    const auto k = detail::squash(s);
    if (k == "home") {
        return TeamSide::home;
    }
    if (k == "away") {
        return TeamSide::away;
    }
    throw DataError("unknown team_side '" + std::string(s) + "'");
}

/// Coordinate frame of an event: as recorded, or rotated so the acting team
/// attacks toward +x.
enum class Frame : std::uint8_t { raw, attack_right };

struct EventRecord {
    std::string game_id;
    int period = 1;
    double clock_s = 0.0;
    TeamSide team_side = TeamSide::home;
    EventType event_type = EventType::pass;
    double x = 0.0;
    double y = 0.0;
    Role player_role = Role::other;
    bool is_shootout = false;
    Frame frame = Frame::raw;

    bool operator==(const EventRecord&) const = default;
};

}  // namespace mxg
