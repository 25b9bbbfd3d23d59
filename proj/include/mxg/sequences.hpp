#pragma once

// Offensive chain mining over window token streams, with rankings by mean
// composite score and by LSTM probability.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mxg/common.hpp"
#include "mxg/event.hpp"
#include "mxg/ingest.hpp"
#include "mxg/lstm.hpp"

namespace mxg {

inline std::set<EventType> default_terminators() {
    return {EventType::shot, EventType::goal, EventType::controlled_exit, EventType::icing,
            EventType::dump_out, EventType::offside, EventType::save};
}

/// One distinct token pattern with every window it was seen in.
struct Chain {
    std::vector<EventType> tokens;
    std::size_t occurrences = 0;
    std::vector<std::size_t> source_windows;  ///< indices into the window list, one per occurrence
    std::vector<std::string> source_window_ids;
    double composite_score = std::numeric_limits<double>::quiet_NaN();
    double lstm_score = std::numeric_limits<double>::quiet_NaN();

    std::string pattern() const {
        std::string s;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) {
                s += " -> ";
            }
            s += event_name(tokens[i]);
        }
        return s;
    }
    bool contains(EventType e) const { return std::find(tokens.begin(), tokens.end(), e) != tokens.end(); }
};

/// Splits one token stream into terminated runs. Assist tokens are skipped;
/// a terminator closes the current run (and is part of it). A run still open
/// at the end of the stream is dropped, as is a goal arriving with no
/// preceding run (its shot already closed the chain).
inline std::vector<std::vector<EventType>> split_chains(std::span<const EventType> tokens,
                                                        const std::set<EventType>& terminators = default_terminators()) {
    std::vector<std::vector<EventType>> out;
    std::vector<EventType> run;
    for (EventType e : tokens) {
        if (e == EventType::pad || e == EventType::assist) {
            continue;
        }
        if (e == EventType::goal && run.empty()) {
            continue;
        }
        run.push_back(e);
        if (terminators.count(e)) {
            out.push_back(std::move(run));
            run.clear();
        }
    }
    return out;
}

/// Chains across all windows, deduplicated by pattern and sorted by pattern.
inline std::vector<Chain> extract_chains(const std::vector<WindowFeatures>& windows,
                                         const std::set<EventType>& terminators = default_terminators()) {
    std::map<std::string, Chain> by_pattern;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        for (auto& toks : split_chains(windows[w].tokens, terminators)) {
            Chain c;
            c.tokens = std::move(toks);
            auto [it, inserted] = by_pattern.try_emplace(c.pattern(), std::move(c));
            Chain& slot = it->second;
            ++slot.occurrences;
            slot.source_windows.push_back(w);
            slot.source_window_ids.push_back(windows[w].window_id);
        }
    }
    std::vector<Chain> out;
    out.reserve(by_pattern.size());
    for (auto& [_, c] : by_pattern) {
        out.push_back(std::move(c));
    }
    return out;
}

/// Sets each chain's composite to the mean of its source windows' scores.
inline void assign_composite(std::vector<Chain>& chains, std::span<const double> window_scores) {
    for (auto& c : chains) {
        double s = 0.0;
        for (std::size_t w : c.source_windows) {
            if (w >= window_scores.size()) {
                throw DataError("assign_composite: window index out of range");
            }
            s += window_scores[w];
        }
        c.composite_score = c.source_windows.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(c.source_windows.size());
    }
}

struct ChainRanking {
    std::vector<Chain> top;
    std::size_t n_patterns = 0;       ///< distinct patterns considered
    std::size_t n_chains = 0;         ///< total chain occurrences considered
    std::optional<double> lpr_uplift;  ///< relative mean-composite gain of LPR patterns; nullopt when undefined
};

/// Relative gain in mean composite of patterns containing `token` over the
/// rest. Undefined when either side is empty or the baseline mean is not positive.
inline std::optional<double> token_uplift(const std::vector<Chain>& chains, EventType token) {
    double with = 0.0;
    double without = 0.0;
    std::size_t nw = 0;
    std::size_t no = 0;
    for (const auto& c : chains) {
        if (!std::isfinite(c.composite_score)) {
            continue;
        }
        if (c.contains(token)) {
            with += c.composite_score;
            ++nw;
        } else {
            without += c.composite_score;
            ++no;
        }
    }
    if (nw == 0 || no == 0) {
        return std::nullopt;
    }
    const double base = without / static_cast<double>(no);
    if (!(base > 0.0)) {
        return std::nullopt;
    }
    return (with / static_cast<double>(nw)) / base - 1.0;
}

namespace detail {
template <class Key>
void rank_in_place(std::vector<Chain>& v, Key key) {
    std::sort(v.begin(), v.end(), [&](const Chain& a, const Chain& b) {
        const double ka = key(a);
        const double kb = key(b);
        if (ka != kb) {
            return ka > kb;
        }
        return a.pattern() < b.pattern();
    });
}
}  // namespace detail

/// Ranks patterns seen at least `min_occurrences` times by mean composite,
/// descending, ties by pattern string.
inline ChainRanking rank_chains(std::vector<Chain> chains, std::size_t top_n, std::size_t min_occurrences = 1) {
    ChainRanking r;
    std::erase_if(chains, [&](const Chain& c) { return c.occurrences < min_occurrences || !std::isfinite(c.composite_score); });
    r.lpr_uplift = token_uplift(chains, EventType::lpr);
    r.n_patterns = chains.size();
    for (const auto& c : chains) {
        r.n_chains += c.occurrences;
    }
    detail::rank_in_place(chains, [](const Chain& c) { return c.composite_score; });
    if (chains.size() > top_n) {
        chains.resize(top_n);
    }
    r.top = std::move(chains);
    return r;
}

/// Scores every pattern with the LSTM (label tokens stripped, left-padded)
/// and returns the top_n by probability, ties by pattern string.
inline std::vector<Chain> rank_by_lstm(const LstmModel& model, std::vector<Chain> chains, std::size_t top_n = 10,
                                       std::size_t min_occurrences = 1) {
    if (top_n == 0) {
        return {};
    }
    std::erase_if(chains, [&](const Chain& c) { return c.occurrences < min_occurrences; });
    std::vector<TokenSequence> seqs;
    seqs.reserve(chains.size());
    for (const auto& c : chains) {
        const auto toks = model_input_tokens(c.tokens);
        seqs.push_back(encode_sequence(toks, model.config.max_seq_len, model.vocab_size));
    }
    const auto p = predict_lstm(model, seqs);
    for (std::size_t i = 0; i < chains.size(); ++i) {
        chains[i].lstm_score = p[i];
    }
    detail::rank_in_place(chains, [](const Chain& c) { return c.lstm_score; });
    if (chains.size() > top_n) {
        chains.resize(top_n);
    }
    return chains;
}

/// "1. LSTM Score: 0.9871, Sequence: lpr -> pass -> shot"
inline std::string format_lstm_report(const std::vector<Chain>& ranked) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu. LSTM Score: %.4f, Sequence: ", i + 1, ranked[i].lstm_score);
        out += buf;
        out += ranked[i].pattern();
        out += '\n';
    }
    return out;
}

inline std::string format_composite_report(const ChainRanking& r) {
    std::string out;
    char buf[96];
    for (std::size_t i = 0; i < r.top.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu. Composite Score: %.4f, Occurrences: %zu, Sequence: ", i + 1, r.top[i].composite_score, r.top[i].occurrences);
        out += buf;
        out += r.top[i].pattern();
        out += '\n';
    }
    return out;
}

inline nlohmann::ordered_json to_json(const Chain& c) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json toks = nlohmann::ordered_json::array();
    for (EventType e : c.tokens) {
        toks.push_back(std::string(event_name(e)));
    }
    return {{"pattern", c.pattern()}, {"tokens", toks}, {"occurrences", c.occurrences},
            {"mean_composite", num(c.composite_score)}, {"mean_lstm", num(c.lstm_score)}};
}

inline nlohmann::ordered_json to_json(const ChainRanking& r) {
    nlohmann::ordered_json top = nlohmann::ordered_json::array();
    for (const auto& c : r.top) {
        top.push_back(to_json(c));
    }
    return {{"n_patterns", r.n_patterns}, {"n_chains", r.n_chains},
            {"lpr_uplift", r.lpr_uplift ? nlohmann::ordered_json(*r.lpr_uplift) : nlohmann::ordered_json(nullptr)},
            {"top", top}};
}

inline std::string chains_csv(const std::vector<Chain>& chains) {
    std::string s = "rank,pattern,occurrences,mean_composite,mean_lstm\n";
    for (std::size_t i = 0; i < chains.size(); ++i) {
        const auto& c = chains[i];
        s += std::to_string(i + 1) + ",\"" + c.pattern() + "\"," + std::to_string(c.occurrences) + ',' +
             (std::isfinite(c.composite_score) ? format_number(c.composite_score) : std::string()) + ',' +
             (std::isfinite(c.lstm_score) ? format_number(c.lstm_score) : std::string()) + '\n';
    }
    return s;
}

}  // namespace mxg
