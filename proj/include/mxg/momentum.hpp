#pragma once

// Logistic momentum model: P(goal | counts) = sigmoid(b0 + sum_e b_e x_e), and
// the per-window momentum score M = exp(sum_e b_e x_e) (intercept excluded).

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mxg/common.hpp"
#include "mxg/event.hpp"
#include "mxg/ingest.hpp"
#include "mxg/logistic.hpp"

namespace mxg {

struct MomentumTrainMeta {
    int iterations = 0;
    double final_log_loss = 0.0;
    bool converged = false;
    int iteration_cap = 0;
    double l2 = 0.0;
    std::size_t n_windows = 0;
};

struct MomentumModel {
    double intercept = 0.0;
    std::map<EventType, double> coefficients;  ///< exactly the twenty modeled events
    bool fitted = false;
    MomentumTrainMeta train_meta;

    double coefficient(EventType e) const {
        auto it = coefficients.find(e);
        return it == coefficients.end() ? 0.0 : it->second;
    }
};

enum class MomentumScale { exponential, log };

/// Reference coefficient table, one value per modeled event, in token order.
inline constexpr std::array<double, kModeledEventCount> kReferenceCoefficients = {
    0.2242,   // faceoff_success
    0.0365,   // lpr
    0.0391,   // pass
    0.1014,   // reception
    -0.0366,  // block
    -0.0696,  // puck_protection
    0.0771,   // carry
    0.0303,   // check
    0.0147,   // controlled_entry_against
    0.0114,   // controlled_entry
    -0.1674,  // controlled_exit
    -0.2367,  // icing
    -0.1753,  // dump_out
    -0.2530,  // dump_in
    0.0174,   // shot
    -0.8414,  // penalty
    0.7205,   // penalty_drawn
    -0.1103,  // save
    0.2190,   // rebound
    -0.1184,  // offside
};

/// Goal rate of an average window in the reference data.
inline constexpr double kReferenceGoalRate = 0.02;

/// Scoring-only model carrying the reference coefficients. The table has no
/// intercept; logit(2%) is used so predict_goal_prob stays meaningful.
inline MomentumModel reference_momentum_model() {
    MomentumModel m;
    m.intercept = std::log(kReferenceGoalRate / (1.0 - kReferenceGoalRate));
    for (int i = 0; i < kModeledEventCount; ++i) {
        m.coefficients[static_cast<EventType>(i + 1)] = kReferenceCoefficients[static_cast<std::size_t>(i)];
    }
    m.fitted = true;
    return m;
}

namespace detail {
inline void require_fitted(const MomentumModel& m) {
    if (!m.fitted) {
        throw StateError("momentum model is not fitted");
    }
}
inline double linear_predictor(const MomentumModel& m, const std::array<int, kModeledEventCount>& counts) {
    double z = 0.0;
    for (const auto& [e, b] : m.coefficients) {
        const int idx = feature_index(e);
        if (idx >= 0) {
            z += b * counts[static_cast<std::size_t>(idx)];
        }
    }
    return z;
}
}  // namespace detail

/// sum_e b_e x_e, the log of the momentum score.
inline double log_momentum(const MomentumModel& model, const std::array<int, kModeledEventCount>& counts) {
    detail::require_fitted(model);
    return detail::linear_predictor(model, counts);
}

inline double momentum_score(const MomentumModel& model, const std::array<int, kModeledEventCount>& counts,
                             MomentumScale scale = MomentumScale::exponential) {
    const double z = log_momentum(model, counts);
    return scale == MomentumScale::log ? z : std::exp(z);
}

inline double momentum_score(const MomentumModel& model, const WindowFeatures& window,
                             MomentumScale scale = MomentumScale::exponential) {
    return momentum_score(model, window.counts, scale);
}

inline double predict_goal_prob(const MomentumModel& model, const std::array<int, kModeledEventCount>& counts) {
    detail::require_fitted(model);
    return sigmoid(model.intercept + detail::linear_predictor(model, counts));
}

inline double predict_goal_prob(const MomentumModel& model, const WindowFeatures& window) {
    return predict_goal_prob(model, window.counts);
}

/// Maximum-likelihood fit of the momentum model (ridge l2 on slopes).
inline MomentumModel fit_logistic(const std::vector<WindowFeatures>& windows, double l2 = 1e-6, int max_iterations = 100) {
    if (l2 < 0.0) {
        throw ConfigError("fit_logistic: l2 must be >= 0");
    }
    if (windows.empty()) {
        throw DataError("fit_logistic: no windows");
    }
    const Eigen::MatrixXd X = count_matrix(windows);
    Eigen::VectorXd y(X.rows());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        y(static_cast<Eigen::Index>(i)) = windows[i].goal_label;
    }
    const double pos = y.sum();
    if (pos == 0.0 || pos == static_cast<double>(y.size())) {
        throw DataError("fit_logistic: labels are single-class; the momentum model is unfittable");
    }
    LogisticOptions opt;
    opt.l2 = l2;
    opt.max_iterations = max_iterations;
    const auto fit = fit_logistic_irls(X, y, opt);

    MomentumModel m;
    m.intercept = fit.intercept;
    for (int j = 0; j < kModeledEventCount; ++j) {
        m.coefficients[static_cast<EventType>(j + 1)] = fit.coefficients(j);
    }
    m.fitted = true;
    m.train_meta.iterations = fit.iterations;
    m.train_meta.final_log_loss = fit.log_loss;
    m.train_meta.converged = fit.converged;
    m.train_meta.iteration_cap = max_iterations;
    m.train_meta.l2 = l2;
    m.train_meta.n_windows = windows.size();
    return m;
}

// JSON: {"intercept": b0, "coefficients": {event: value, ...}, "meta": {...}}
inline nlohmann::ordered_json to_json(const MomentumModel& m) {
    nlohmann::ordered_json j;
    j["intercept"] = m.intercept;
    auto& c = j["coefficients"] = nlohmann::ordered_json::object();
    for (const auto& [e, b] : m.coefficients) {
        c[std::string(event_name(e))] = b;
    }
    j["meta"] = {{"fitted", m.fitted},
                 {"iterations", m.train_meta.iterations},
                 {"final_log_loss", m.train_meta.final_log_loss},
                 {"converged", m.train_meta.converged},
                 {"iteration_cap", m.train_meta.iteration_cap},
                 {"l2", m.train_meta.l2},
                 {"n_windows", m.train_meta.n_windows},
                 {"vocabulary_version", kVocabularyVersion}};
    return j;
}

inline MomentumModel momentum_model_from_json(const nlohmann::json& j) {
    MomentumModel m;
    try {
        m.intercept = j.at("intercept").get<double>();
        for (const auto& [k, v] : j.at("coefficients").items()) {
            const EventType e = parse_event(k);
            if (feature_index(e) < 0) {
                throw DataError("momentum model: '" + k + "' is not a modeled event");
            }
            m.coefficients[e] = v.get<double>();
        }
        if (j.contains("meta")) {
            const auto& meta = j.at("meta");
            m.fitted = meta.value("fitted", true);
            m.train_meta.iterations = meta.value("iterations", 0);
            m.train_meta.final_log_loss = meta.value("final_log_loss", 0.0);
            m.train_meta.converged = meta.value("converged", false);
            m.train_meta.iteration_cap = meta.value("iteration_cap", 0);
            m.train_meta.l2 = meta.value("l2", 0.0);
            m.train_meta.n_windows = meta.value("n_windows", std::size_t{0});
        } else {
            m.fitted = true;
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed momentum model: ") + e.what());
    }
    if (m.coefficients.size() != static_cast<std::size_t>(kModeledEventCount)) {
        throw DataError("momentum model must carry exactly " + std::to_string(kModeledEventCount) + " coefficients, got " + std::to_string(m.coefficients.size()));
    }
    for (const auto& [e, b] : m.coefficients) {
        if (!std::isfinite(b)) {
            throw DataError("momentum model coefficient for '" + std::string(event_name(e)) + "' is not finite");
        }
    }
    return m;
}

inline MomentumModel load_momentum_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open momentum model '" + path + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("momentum model '" + path + "' is not valid JSON: " + e.what());
    }
    return momentum_model_from_json(j);
}

}  // namespace mxg
