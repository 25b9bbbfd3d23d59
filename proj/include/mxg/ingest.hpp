#pragma once

// Event-stream ingestion: parsing, attack-frame standardization, sliding
// window aggregation and variance-inflation diagnostics.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mxg/common.hpp"
#include "mxg/event.hpp"

namespace mxg {

enum class EventFormat { csv, jsonl };

inline constexpr std::array<std::string_view, 9> kCsvColumns = {
    "game_id", "period", "clock_s", "team_side", "event_type", "x", "y", "player_role", "is_shootout"};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline double parse_double(const std::string& s, const char* field, std::size_t line) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') {
        ++b;
    }
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e || !std::isfinite(v)) {
        throw DataError("line " + std::to_string(line) + ": field '" + field + "' is not a finite number: '" + s + "'");
    }
    return v;
}

inline int parse_int(const std::string& s, const char* field, std::size_t line) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw DataError("line " + std::to_string(line) + ": field '" + field + "' is not an integer: '" + s + "'");
    }
    return v;
}

inline bool parse_bool(const std::string& s, std::size_t line) {
    const auto k = squash(s);
    if (k == "true" || k == "1") {
        return true;
    }
    if (k == "false" || k == "0" || k.empty()) {
        return false;
    }
    throw DataError("line " + std::to_string(line) + ": field 'is_shootout' is not a boolean: '" + s + "'");
}

template <class Fn>
auto with_line(std::size_t line, Fn&& fn) {
    try {
        return fn();
    } catch (const DataError& e) {
        const std::string msg = e.what();
        if (msg.rfind("line ", 0) == 0) {
            throw;
        }
        throw DataError("line " + std::to_string(line) + ": " + msg);
    }
}

inline void validate_record(const EventRecord& r, std::size_t line) {
    if (r.period < 1) {
        throw DataError("line " + std::to_string(line) + ": period must be >= 1");
    }
    if (r.clock_s < 0.0) {
        throw DataError("line " + std::to_string(line) + ": clock_s must be >= 0");
    }
    if (r.event_type == EventType::pad) {
        throw DataError("line " + std::to_string(line) + ": 'pad' is not a recordable event");
    }
}

}  // namespace detail

/// Parses a CSV (header required) or JSONL event stream. Records keep file
/// order; shootout rows are kept and flagged. Errors carry the 1-based line.
inline std::vector<EventRecord> parse_events(std::istream& in, EventFormat format) {
    std::vector<EventRecord> out;
    std::unordered_map<std::string, double> last_clock;
    std::string line;
    std::size_t lineno = 0;

    auto check_order = [&](const EventRecord& r) {
        auto [it, inserted] = last_clock.try_emplace(r.game_id, r.clock_s);
        if (!inserted) {
            if (r.clock_s < it->second) {
                throw DataError("line " + std::to_string(lineno) + ": clock_s decreases within game '" + r.game_id + "'");
            }
            it->second = r.clock_s;
        }
    };

    if (format == EventFormat::csv) {
        std::array<int, kCsvColumns.size()> col{};
        bool have_header = false;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line == "\r") {
                continue;
            }
            auto fields = detail::split_csv_line(line);
            if (!have_header) {
                if (fields.size() != kCsvColumns.size()) {
                    throw DataError("line " + std::to_string(lineno) + ": header must have columns game_id,period,clock_s,team_side,event_type,x,y,player_role,is_shootout");
                }
                for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
                    col[c] = -1;
                    for (std::size_t f = 0; f < fields.size(); ++f) {
                        if (fields[f] == kCsvColumns[c]) {
                            col[c] = static_cast<int>(f);
                        }
                    }
                    if (col[c] < 0) {
                        throw DataError("line " + std::to_string(lineno) + ": header missing column '" + std::string(kCsvColumns[c]) + "'");
                    }
                }
                have_header = true;
                continue;
            }
            if (fields.size() != kCsvColumns.size()) {
                throw DataError("line " + std::to_string(lineno) + ": expected 9 fields, got " + std::to_string(fields.size()));
            }
            auto f = [&](std::size_t c) -> const std::string& { return fields[static_cast<std::size_t>(col[c])]; };
            EventRecord r;
            r.game_id = f(0);
            r.period = detail::parse_int(f(1), "period", lineno);
            r.clock_s = detail::parse_double(f(2), "clock_s", lineno);
            r.team_side = detail::with_line(lineno, [&] { return parse_side(f(3)); });
            r.event_type = detail::with_line(lineno, [&] { return parse_event(f(4)); });
            r.x = detail::parse_double(f(5), "x", lineno);
            r.y = detail::parse_double(f(6), "y", lineno);
            r.player_role = detail::with_line(lineno, [&] { return parse_role(f(7)); });
            r.is_shootout = detail::parse_bool(f(8), lineno);
            detail::validate_record(r, lineno);
            check_order(r);
            out.push_back(std::move(r));
        }
        return out;
    }

    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
        if (!j.is_object()) {
            throw DataError("line " + std::to_string(lineno) + ": expected a JSON object");
        }
        for (auto key : kCsvColumns) {
            if (!j.contains(std::string(key))) {
                throw DataError("line " + std::to_string(lineno) + ": missing key '" + std::string(key) + "'");
            }
        }
        EventRecord r;
        try {
            const auto& gid = j.at("game_id");
            r.game_id = gid.is_string() ? gid.get<std::string>() : gid.dump();
            r.period = j.at("period").get<int>();
            r.clock_s = j.at("clock_s").get<double>();
            r.x = j.at("x").get<double>();
            r.y = j.at("y").get<double>();
            const auto& so = j.at("is_shootout");
            r.is_shootout = so.is_boolean() ? so.get<bool>() : detail::parse_bool(so.is_string() ? so.get<std::string>() : so.dump(), lineno);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": bad field type: " + e.what());
        }
        r.team_side = detail::with_line(lineno, [&] { return parse_side(j.at("team_side").get<std::string>()); });
        r.event_type = detail::with_line(lineno, [&] { return parse_event(j.at("event_type").get<std::string>()); });
        r.player_role = detail::with_line(lineno, [&] { return parse_role(j.at("player_role").get<std::string>()); });
        detail::validate_record(r, lineno);
        check_order(r);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<EventRecord> parse_events(const std::string& text, EventFormat format) {
    std::istringstream in(text);
    return parse_events(in, format);
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        char tmp[64];
        std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
        if (std::strtod(tmp, nullptr) == v) {
            return tmp;
        }
    }
    return buf;
}

inline void write_events_csv(std::ostream& out, const std::vector<EventRecord>& events) {
    out << "game_id,period,clock_s,team_side,event_type,x,y,player_role,is_shootout\n";
    for (const auto& e : events) {
        out << e.game_id << ',' << e.period << ',' << format_number(e.clock_s) << ',' << side_name(e.team_side) << ','
            << event_name(e.event_type) << ',' << format_number(e.x) << ',' << format_number(e.y) << ','
            << role_name(e.player_role) << ',' << (e.is_shootout ? "true" : "false") << '\n';
    }
}

inline void write_events_jsonl(std::ostream& out, const std::vector<EventRecord>& events) {
    for (const auto& e : events) {
        nlohmann::ordered_json j;
        j["game_id"] = e.game_id;
        j["period"] = e.period;
        j["clock_s"] = e.clock_s;
        j["team_side"] = side_name(e.team_side);
        j["event_type"] = event_name(e.event_type);
        j["x"] = e.x;
        j["y"] = e.y;
        j["player_role"] = role_name(e.player_role);
        j["is_shootout"] = e.is_shootout;
        out << j.dump() << '\n';
    }
}

/// Home attacks toward +x in odd periods, away in even periods.
constexpr bool attacks_left(int period, TeamSide side) {
    const bool even = period % 2 == 0;
    return side == TeamSide::home ? even : !even;
}

/// Rotates every raw-frame event so its team attacks toward +x:
/// (x, y) -> (-x, -y) when the team attacks left. Already standardized
/// records pass through unchanged.
inline std::vector<EventRecord> standardize_coordinates(std::vector<EventRecord> events) {
    for (auto& e : events) {
        if (e.frame == Frame::attack_right) {
            continue;
        }
        if (attacks_left(e.period, e.team_side)) {
            e.x = -e.x;
            e.y = -e.y;
        }
        e.frame = Frame::attack_right;
    }
    return events;
}

/// Inverse of standardize_coordinates.
inline std::vector<EventRecord> destandardize_coordinates(std::vector<EventRecord> events) {
    for (auto& e : events) {
        if (e.frame == Frame::raw) {
            continue;
        }
        if (attacks_left(e.period, e.team_side)) {
            e.x = -e.x;
            e.y = -e.y;
        }
        e.frame = Frame::raw;
    }
    return events;
}

/// Shootout rows and anything past the first overtime are not regulation play.
inline bool is_regulation(const EventRecord& e) { return !e.is_shootout && e.period <= 4; }

inline std::vector<EventRecord> filter_regulation(const std::vector<EventRecord>& events) {
    std::vector<EventRecord> out;
    out.reserve(events.size());
    for (const auto& e : events) {
        if (is_regulation(e)) {
            out.push_back(e);
        }
    }
    return out;
}

struct WindowFeatures {
    std::string window_id;
    std::string game_id;
    TeamSide team = TeamSide::home;
    double window_start_s = 0.0;
    std::array<int, kModeledEventCount> counts{};
    int goal_label = 0;
    /// Mean (x, y) per role F1, F2, F3, D1, D2 in the attack frame.
    std::array<double, 2 * kTrackedRoles> positions{};
    std::array<bool, kTrackedRoles> role_present{};
    std::vector<EventType> tokens;

    int count(EventType e) const {
        const int idx = feature_index(e);
        return idx < 0 ? 0 : counts[static_cast<std::size_t>(idx)];
    }

    bool has_full_positions() const {
        for (bool p : role_present) {
            if (!p) {
                return false;
            }
        }
        return true;
    }

    bool operator==(const WindowFeatures&) const = default;
};

struct WindowConfig {
    double window_s = 30.0;
    double stride_s = 10.0;
};

namespace detail {
inline std::string format_start(double s) {
    char buf[32];
    if (s == std::floor(s) && s < 1e9) {
        std::snprintf(buf, sizeof buf, "%05lld", static_cast<long long>(s));
    } else {
        std::snprintf(buf, sizeof buf, "%.3f", s);
    }
    return buf;
}
}  // namespace detail

/// Number of stride-aligned windows starting at t = 0 needed so that their
/// union covers an event at `last_clock`.
inline std::size_t window_count(double last_clock, const WindowConfig& cfg) {
    const double d = last_clock - cfg.window_s;
    if (d < 0.0) {
        return 1;
    }
    return static_cast<std::size_t>(std::floor(d / cfg.stride_s)) + 2;
}

/// Aggregates regulation events into overlapping windows, one per stride step
/// per (game, team) holding at least one event of that team. Goal and assist
/// events set the label but are not counted as features.
inline std::vector<WindowFeatures> build_windows(const std::vector<EventRecord>& events, const WindowConfig& cfg = {}) {
    if (!(cfg.window_s > 0.0) || !(cfg.stride_s > 0.0)) {
        throw ConfigError("build_windows: window_s and stride_s must be > 0");
    }
    std::vector<std::string> game_order;
    std::unordered_map<std::string, std::vector<EventRecord>> by_game;
    for (const auto& e : events) {
        if (!is_regulation(e)) {
            continue;
        }
        auto [it, inserted] = by_game.try_emplace(e.game_id);
        if (inserted) {
            game_order.push_back(e.game_id);
        }
        it->second.push_back(e);
    }

    std::vector<WindowFeatures> out;
    for (const auto& gid : game_order) {
        auto game = standardize_coordinates(std::move(by_game[gid]));
        std::stable_sort(game.begin(), game.end(), [](const EventRecord& a, const EventRecord& b) { return a.clock_s < b.clock_s; });
        const std::size_t n_windows = window_count(game.back().clock_s, cfg);
        std::size_t lo = 0;
        for (std::size_t k = 0; k < n_windows; ++k) {
            const double start = static_cast<double>(k) * cfg.stride_s;
            const double end = start + cfg.window_s;
            while (lo < game.size() && game[lo].clock_s < start) {
                ++lo;
            }
            for (TeamSide side : {TeamSide::home, TeamSide::away}) {
                WindowFeatures w;
                std::array<double, 2 * kTrackedRoles> sums{};
                std::array<int, kTrackedRoles> role_n{};
                bool any = false;
                for (std::size_t i = lo; i < game.size() && game[i].clock_s < end; ++i) {
                    const auto& e = game[i];
                    if (e.team_side != side) {
                        continue;
                    }
                    any = true;
                    w.tokens.push_back(e.event_type);
                    if (e.event_type == EventType::goal) {
                        w.goal_label = 1;
                    }
                    const int f = feature_index(e.event_type);
                    if (f >= 0) {
                        ++w.counts[static_cast<std::size_t>(f)];
                    }
                    const auto r = static_cast<std::size_t>(e.player_role);
                    if (r < kTrackedRoles) {
                        sums[2 * r] += e.x;
                        sums[2 * r + 1] += e.y;
                        ++role_n[r];
                    }
                }
                if (!any) {
                    continue;
                }
                for (std::size_t r = 0; r < kTrackedRoles; ++r) {
                    w.role_present[r] = role_n[r] > 0;
                    if (role_n[r] > 0) {
                        w.positions[2 * r] = sums[2 * r] / role_n[r];
                        w.positions[2 * r + 1] = sums[2 * r + 1] / role_n[r];
                    } else {
                        w.positions[2 * r] = std::numeric_limits<double>::quiet_NaN();
                        w.positions[2 * r + 1] = std::numeric_limits<double>::quiet_NaN();
                    }
                }
                w.game_id = gid;
                w.team = side;
                w.window_start_s = start;
                w.window_id = gid + ":" + std::string(side_name(side)) + ":" + detail::format_start(start);
                out.push_back(std::move(w));
            }
        }
    }
    return out;
}

/// n x 20 matrix of modeled event counts.
inline Eigen::MatrixXd count_matrix(const std::vector<WindowFeatures>& windows) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(windows.size()), kModeledEventCount);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        for (int j = 0; j < kModeledEventCount; ++j) {
            X(static_cast<Eigen::Index>(i), j) = windows[i].counts[static_cast<std::size_t>(j)];
        }
    }
    return X;
}

struct VifEntry {
    std::string name;
    double vif = 1.0;  ///< +infinity when the column is an exact linear combination of the others.
    bool infinite = false;
    bool flagged = false;  ///< vif >= threshold
};

struct VifReport {
    std::vector<VifEntry> entries;
    std::vector<std::string> skipped_zero_variance;
    double threshold = 5.0;

    bool any_flagged() const {
        for (const auto& e : entries) {
            if (e.flagged) {
                return true;
            }
        }
        return false;
    }
    bool any_infinite() const {
        for (const auto& e : entries) {
            if (e.infinite) {
                return true;
            }
        }
        return false;
    }
    const VifEntry* find(std::string_view name) const {
        for (const auto& e : entries) {
            if (e.name == name) {
                return &e;
            }
        }
        return nullptr;
    }
};

/// VIF_j = 1 / (1 - R^2_j), R^2_j from regressing column j (with intercept) on
/// every other column. Requires >= 2 columns, each with nonzero variance.
inline VifReport vif_diagnostics(const Eigen::MatrixXd& X, const std::vector<std::string>& names, double threshold = 5.0) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (static_cast<std::size_t>(p) != names.size()) {
        throw ConfigError("vif_diagnostics: name count does not match column count");
    }
    if (p < 2) {
        throw DataError("vif_diagnostics: need at least 2 feature columns");
    }
    if (n < 3) {
        throw DataError("vif_diagnostics: need at least 3 rows");
    }
    const Eigen::MatrixXd C = X.rowwise() - X.colwise().mean();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (C.col(j).squaredNorm() <= 0.0) {
            throw DataError("vif_diagnostics: column '" + names[static_cast<std::size_t>(j)] + "' has zero variance");
        }
    }
    VifReport report;
    report.threshold = threshold;
    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::MatrixXd others(n, p - 1);
        for (Eigen::Index k = 0, c = 0; k < p; ++k) {
            if (k != j) {
                others.col(c++) = C.col(k);
            }
        }
        const Eigen::VectorXd y = C.col(j);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(others);
        const Eigen::VectorXd beta = qr.solve(y);
        const double sse = (y - others * beta).squaredNorm();
        const double sst = y.squaredNorm();
        const double unexplained = sse / sst;
        VifEntry e;
        e.name = names[static_cast<std::size_t>(j)];
        if (unexplained < 1e-10) {
            e.vif = std::numeric_limits<double>::infinity();
            e.infinite = true;
        } else {
            e.vif = 1.0 / unexplained;
        }
        e.flagged = e.infinite || e.vif >= threshold;
        report.entries.push_back(e);
    }
    return report;
}

/// VIF over the modeled event-count columns of `windows`. Columns with zero
/// variance (event never varies) are listed in skipped_zero_variance.
inline VifReport vif_diagnostics(const std::vector<WindowFeatures>& windows, double threshold = 5.0) {
    const Eigen::MatrixXd all = count_matrix(windows);
    std::vector<Eigen::Index> keep;
    std::vector<std::string> names;
    VifReport skipped;
    for (int j = 0; j < kModeledEventCount; ++j) {
        const auto col = all.col(j);
        const double m = col.mean();
        if ((col.array() - m).square().sum() > 0.0) {
            keep.push_back(j);
            names.emplace_back(event_name(static_cast<EventType>(j + 1)));
        } else {
            skipped.skipped_zero_variance.emplace_back(event_name(static_cast<EventType>(j + 1)));
        }
    }
    Eigen::MatrixXd X(all.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        X.col(static_cast<Eigen::Index>(c)) = all.col(keep[c]);
    }
    auto report = vif_diagnostics(X, names, threshold);
    report.skipped_zero_variance = std::move(skipped.skipped_zero_variance);
    return report;
}

inline nlohmann::ordered_json to_json(const VifReport& r) {
    nlohmann::ordered_json j;
    j["threshold"] = r.threshold;
    j["any_flagged"] = r.any_flagged();
    j["any_infinite"] = r.any_infinite();
    auto& arr = j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : r.entries) {
        arr.push_back({{"event", e.name}, {"vif", e.infinite ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(e.vif)}, {"infinite", e.infinite}, {"flagged", e.flagged}});
    }
    j["skipped_zero_variance"] = r.skipped_zero_variance;
    return j;
}

// Window (de)serialization. Missing role coordinates are written as null.
inline nlohmann::ordered_json to_json(const WindowFeatures& w) {
    nlohmann::ordered_json j;
    j["window_id"] = w.window_id;
    j["game_id"] = w.game_id;
    j["team_side"] = side_name(w.team);
    j["window_start_s"] = w.window_start_s;
    j["goal_label"] = w.goal_label;
    j["counts"] = w.counts;
    auto& pos = j["positions"] = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < kTrackedRoles; ++r) {
        if (w.role_present[r]) {
            pos.push_back(w.positions[2 * r]);
            pos.push_back(w.positions[2 * r + 1]);
        } else {
            pos.push_back(nullptr);
            pos.push_back(nullptr);
        }
    }
    auto& toks = j["tokens"] = nlohmann::ordered_json::array();
    for (auto t : w.tokens) {
        toks.push_back(token_id(t));
    }
    return j;
}

inline WindowFeatures window_from_json(const nlohmann::json& j) {
    WindowFeatures w;
    try {
        w.window_id = j.at("window_id").get<std::string>();
        w.game_id = j.at("game_id").get<std::string>();
        w.team = parse_side(j.at("team_side").get<std::string>());
        w.window_start_s = j.at("window_start_s").get<double>();
        w.goal_label = j.at("goal_label").get<int>();
        w.counts = j.at("counts").get<std::array<int, kModeledEventCount>>();
        const auto& pos = j.at("positions");
        if (pos.size() != 2 * kTrackedRoles) {
            throw DataError("window positions must have 10 entries");
        }
        for (std::size_t r = 0; r < kTrackedRoles; ++r) {
            const auto& px = pos.at(2 * r);
            const auto& py = pos.at(2 * r + 1);
            w.role_present[r] = !px.is_null() && !py.is_null();
            w.positions[2 * r] = w.role_present[r] ? px.get<double>() : std::numeric_limits<double>::quiet_NaN();
            w.positions[2 * r + 1] = w.role_present[r] ? py.get<double>() : std::numeric_limits<double>::quiet_NaN();
        }
        for (const auto& t : j.at("tokens")) {
            w.tokens.push_back(event_from_token(t.get<int>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed window record: ") + e.what());
    }
    return w;
}

}  // namespace mxg
