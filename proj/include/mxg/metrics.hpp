#pragma once

// Binary classifier evaluation: rank AUC and threshold metrics.

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mxg/common.hpp"

namespace mxg {

struct ClassifierReport {
    double auc = 0.0;
    double accuracy = 0.0;   ///< at threshold 0.5
    double precision = 0.0;  ///< NaN when nothing is predicted positive
    double recall = 0.0;
    std::size_t n = 0;
    std::size_t n_positive = 0;
};

/// AUC as the probability a random positive outscores a random negative,
/// ties counting one half (midrank statistic). Optional per-row weights turn
/// every count into a weight sum.
inline ClassifierReport evaluate_classifier(std::span<const double> scores, std::span<const int> labels,
                                            std::span<const double> weights = {}) {
    if (scores.size() != labels.size() || (!weights.empty() && weights.size() != scores.size())) {
        throw ConfigError("evaluate_classifier: scores, labels and weights must have equal length");
    }
    const std::size_t n = scores.size();
    auto wt = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
    double wpos = 0.0;
    double wneg = 0.0;
    std::size_t npos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw DataError("evaluate_classifier: labels must be 0 or 1");
        }
        if (labels[i] == 1) {
            wpos += wt(i);
            ++npos;
        } else {
            wneg += wt(i);
        }
    }
    if (npos == 0 || npos == n) {
        throw DataError("evaluate_classifier: AUC is undefined with a single class");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum over positives of (negative weight strictly below + half the tied negative weight).
    double neg_below = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        double tie_pos = 0.0;
        double tie_neg = 0.0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tie_pos : tie_neg) += wt(order[j]);
            ++j;
        }
        pairs += tie_pos * (neg_below + 0.5 * tie_neg);
        neg_below += tie_neg;
        i = j;
    }

    ClassifierReport r;
    r.n = n;
    r.n_positive = npos;
    r.auc = pairs / (wpos * wneg);
    double tp = 0.0;
    double fp = 0.0;
    double correct = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pred = scores[i] >= 0.5;
        const bool pos = labels[i] == 1;
        total += wt(i);
        if (pred == pos) {
            correct += wt(i);
        }
        if (pred && pos) {
            tp += wt(i);
        }
        if (pred && !pos) {
            fp += wt(i);
        }
    }
    r.accuracy = correct / total;
    r.precision = (tp + fp) > 0.0 ? tp / (tp + fp) : std::numeric_limits<double>::quiet_NaN();
    r.recall = tp / wpos;
    return r;
}

inline nlohmann::ordered_json to_json(const ClassifierReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    return {{"auc", num(r.auc)}, {"accuracy", num(r.accuracy)}, {"precision", num(r.precision)}, {"recall", num(r.recall)}, {"n", r.n}, {"n_positive", r.n_positive}};
}

}  // namespace mxg
