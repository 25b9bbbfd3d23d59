#pragma once

// Token-embedding LSTM sequence classifier.
//
//   tokens -> embedding (V x E) -> one LSTM layer (H units) -> final hidden
//   state -> inverted dropout (training only) -> dense H->1 -> sigmoid
//
// Gate rows of the stacked weight matrix W (4H x (E+H)) are ordered
// input, forget, cell candidate, output. Sequences are left-padded with the
// pad token (id 0), which has its own learned embedding and is not masked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mxg/common.hpp"
#include "mxg/event.hpp"

namespace mxg {

struct LstmConfig {
    int embed_dim = 32;
    int hidden_units = 50;
    double dropout = 0.30;
    int max_seq_len = 20;
    int batch_size = 32;
    double learning_rate = 0.001;
    int early_stop_epochs = 5;  ///< 0 disables early stopping
    int max_epochs = 30;
    std::uint64_t seed = 0;
    double init_scale = 0.08;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const {
        if (embed_dim <= 0 || hidden_units <= 0 || max_seq_len <= 0 || batch_size <= 0) {
            throw ConfigError("lstm: embed_dim, hidden_units, max_seq_len and batch_size must be > 0");
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) {
            throw ConfigError("lstm: dropout must be in [0, 1)");
        }
        if (!(learning_rate > 0.0)) {
            throw ConfigError("lstm: learning_rate must be > 0");
        }
        if (max_epochs < 0 || early_stop_epochs < 0) {
            throw ConfigError("lstm: max_epochs and early_stop_epochs must be >= 0");
        }
    }
};

/// Trainable tensors. Gradients use the same layout.
struct LstmParams {
    Eigen::MatrixXd embedding;  ///< V x E
    Eigen::MatrixXd weights;    ///< 4H x (E + H)
    Eigen::VectorXd bias;       ///< 4H
    Eigen::VectorXd dense_w;    ///< H
    double dense_b = 0.0;

    static LstmParams zeros(int vocab, int embed, int hidden) {
        LstmParams p;
        p.embedding = Eigen::MatrixXd::Zero(vocab, embed);
        p.weights = Eigen::MatrixXd::Zero(4 * hidden, embed + hidden);
        p.bias = Eigen::VectorXd::Zero(4 * hidden);
        p.dense_w = Eigen::VectorXd::Zero(hidden);
        p.dense_b = 0.0;
        return p;
    }

    /// Visits every tensor as a flat span, in serialization order.
    template <class Fn>
    void for_each(Fn&& fn) {
        fn("embedding", std::span<double>(embedding.data(), static_cast<std::size_t>(embedding.size())));
        fn("lstm_weights", std::span<double>(weights.data(), static_cast<std::size_t>(weights.size())));
        fn("lstm_bias", std::span<double>(bias.data(), static_cast<std::size_t>(bias.size())));
        fn("dense_w", std::span<double>(dense_w.data(), static_cast<std::size_t>(dense_w.size())));
        fn("dense_b", std::span<double>(&dense_b, 1));
    }
    template <class Fn>
    void for_each(Fn&& fn) const {
        const_cast<LstmParams*>(this)->for_each([&](const char* name, std::span<double> s) {
            fn(name, std::span<const double>(s.data(), s.size()));
        });
    }

    std::size_t size() const {
        return static_cast<std::size_t>(embedding.size() + weights.size() + bias.size() + dense_w.size() + 1);
    }
};

struct LstmModel {
    LstmConfig config;
    int vocab_size = kVocabularySize;
    LstmParams params;
    std::uint64_t dropout_seed = 0;

    int hidden() const { return static_cast<int>(params.dense_w.size()); }
    int embed() const { return static_cast<int>(params.embedding.cols()); }
};

/// Uniform(-s, s) weights, zero biases except the forget gate (+1).
inline LstmModel init_lstm(const LstmConfig& cfg, int vocab_size = kVocabularySize) {
    cfg.validate();
    LstmModel m;
    m.config = cfg;
    m.vocab_size = vocab_size;
    m.params = LstmParams::zeros(vocab_size, cfg.embed_dim, cfg.hidden_units);
    m.dropout_seed = derive_seed(cfg.seed, 0xD50F);
    Rng rng(derive_seed(cfg.seed, 0x1A17));
    auto fill = [&](auto& mat) {
        for (Eigen::Index i = 0; i < mat.size(); ++i) {
            mat.data()[i] = (2.0 * uniform01(rng) - 1.0) * cfg.init_scale;
        }
    };
    fill(m.params.embedding);
    fill(m.params.weights);
    fill(m.params.dense_w);
    const int H = cfg.hidden_units;
    m.params.bias.segment(H, H).setOnes();
    return m;
}

using TokenSequence = std::vector<int>;

/// Keeps the last `max_len` tokens; shorter input is left-padded with 0.
inline TokenSequence encode_sequence(std::span<const int> tokens, int max_len = 20, int vocab_size = kVocabularySize) {
    if (max_len <= 0) {
        throw ConfigError("encode_sequence: max_len must be > 0");
    }
    for (int t : tokens) {
        if (t < 0 || t >= vocab_size) {
            throw DataError("encode_sequence: unknown token id " + std::to_string(t));
        }
    }
    TokenSequence out(static_cast<std::size_t>(max_len), 0);
    const std::size_t keep = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_len));
    std::copy(tokens.end() - static_cast<std::ptrdiff_t>(keep), tokens.end(), out.end() - static_cast<std::ptrdiff_t>(keep));
    return out;
}

inline TokenSequence encode_sequence(std::span<const EventType> events, int max_len = 20) {
    std::vector<int> ids;
    ids.reserve(events.size());
    for (auto e : events) {
        ids.push_back(token_id(e));
    }
    return encode_sequence(ids, max_len);
}

/// Token ids of a window's events without goal/assist (labels, not inputs).
inline std::vector<int> model_input_tokens(std::span<const EventType> events) {
    std::vector<int> ids;
    ids.reserve(events.size());
    for (auto e : events) {
        if (!is_label_token(e) && e != EventType::pad) {
            ids.push_back(token_id(e));
        }
    }
    return ids;
}

/// Activations kept for backpropagation. Matrices are (units x batch).
struct LstmForwardPass {
    std::vector<Eigen::MatrixXd> xh;      ///< per step: [x_t; h_{t-1}]
    std::vector<Eigen::MatrixXd> gates;   ///< per step: activated [i; f; g; o]
    std::vector<Eigen::MatrixXd> cell;    ///< per step: c_t
    std::vector<Eigen::MatrixXd> hidden;  ///< per step: h_t
    Eigen::MatrixXd mask;                 ///< dropout multipliers on h_T (ones at inference)
    Eigen::RowVectorXd logits;
    Eigen::RowVectorXd probs;
};

namespace detail {

inline void check_batch(const LstmModel& m, std::span<const TokenSequence> batch) {
    if (batch.empty()) {
        return;
    }
    const std::size_t T = batch.front().size();
    for (const auto& s : batch) {
        if (s.size() != T) {
            throw DataError("lstm: sequences in a batch must share one length");
        }
        for (int t : s) {
            if (t < 0 || t >= m.vocab_size) {
                throw DataError("lstm: token id " + std::to_string(t) + " is outside the vocabulary");
            }
        }
    }
}

inline Eigen::MatrixXd sigmoid_m(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace detail

/// Runs the network. With `mask` given it is used as the dropout multiplier
/// matrix (H x B); otherwise training mode draws an inverted-dropout mask from
/// `rng` and inference uses none.
inline LstmForwardPass forward_pass(const LstmModel& m, std::span<const TokenSequence> batch, bool training,
                                    Rng* rng = nullptr, const Eigen::MatrixXd* mask = nullptr) {
    detail::check_batch(m, batch);
    const auto B = static_cast<Eigen::Index>(batch.size());
    const int H = m.hidden();
    const int E = m.embed();
    const std::size_t T = batch.empty() ? 0 : batch.front().size();
    const auto& P = m.params;

    LstmForwardPass fp;
    fp.xh.reserve(T);
    fp.gates.reserve(T);
    fp.cell.reserve(T);
    fp.hidden.reserve(T);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(H, B);
    for (std::size_t t = 0; t < T; ++t) {
        Eigen::MatrixXd xh(E + H, B);
        for (Eigen::Index b = 0; b < B; ++b) {
            xh.col(b).head(E) = P.embedding.row(batch[static_cast<std::size_t>(b)][t]).transpose();
        }
        xh.bottomRows(H) = h;
        Eigen::MatrixXd z = P.weights * xh;
        z.colwise() += P.bias;
        Eigen::MatrixXd a(4 * H, B);
        a.topRows(2 * H) = detail::sigmoid_m(z.topRows(2 * H));
        a.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
        a.bottomRows(H) = detail::sigmoid_m(z.bottomRows(H));
        c = (a.middleRows(H, H).array() * c.array() + a.topRows(H).array() * a.middleRows(2 * H, H).array()).matrix();
        h = (a.bottomRows(H).array() * c.array().tanh()).matrix();
        fp.xh.push_back(std::move(xh));
        fp.gates.push_back(std::move(a));
        fp.cell.push_back(c);
        fp.hidden.push_back(h);
    }

    if (mask) {
        fp.mask = *mask;
    } else if (training && m.config.dropout > 0.0) {
        if (!rng) {
            throw StateError("lstm: training-mode forward needs an RNG for dropout");
        }
        const double keep = 1.0 - m.config.dropout;
        fp.mask.resize(H, B);
        for (Eigen::Index i = 0; i < fp.mask.size(); ++i) {
            fp.mask.data()[i] = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
        }
    } else {
        fp.mask = Eigen::MatrixXd::Ones(H, B);
    }
    const Eigen::MatrixXd hd = (h.array() * fp.mask.array()).matrix();
    fp.logits = (P.dense_w.transpose() * hd).array() + P.dense_b;
    fp.probs = fp.logits.unaryExpr([](double v) { return sigmoid(v); });
    return fp;
}

/// Goal probability per sequence.
inline std::vector<double> forward(const LstmModel& m, std::span<const TokenSequence> batch, bool training = false, Rng* rng = nullptr) {
    const auto fp = forward_pass(m, batch, training, rng);
    return std::vector<double>(fp.probs.data(), fp.probs.data() + fp.probs.size());
}

/// Inference over any number of sequences in fixed-size chunks. Each
/// sequence's output does not depend on its chunk companions.
inline std::vector<double> predict_lstm(const LstmModel& m, const std::vector<TokenSequence>& seqs, std::size_t chunk = 256) {
    std::vector<double> out;
    out.reserve(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); i += chunk) {
        const std::size_t e = std::min(seqs.size(), i + chunk);
        auto p = forward(m, std::span<const TokenSequence>(seqs.data() + i, e - i), false);
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

/// Mean binary cross-entropy computed from logits.
inline double bce_from_logits(const Eigen::RowVectorXd& logits, std::span<const double> labels) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        s += softplus(logits(i)) - labels[static_cast<std::size_t>(i)] * logits(i);
    }
    return logits.size() ? s / static_cast<double>(logits.size()) : 0.0;
}

/// Gradients of the mean BCE of a completed forward pass.
inline LstmParams backward(const LstmModel& m, std::span<const TokenSequence> batch, const LstmForwardPass& fp,
                           std::span<const double> labels) {
    const auto B = static_cast<Eigen::Index>(batch.size());
    const int H = m.hidden();
    const int E = m.embed();
    const std::size_t T = fp.xh.size();
    const auto& P = m.params;
    LstmParams g = LstmParams::zeros(m.vocab_size, E, H);
    if (B == 0) {
        return g;
    }

    Eigen::RowVectorXd dlogit(B);
    for (Eigen::Index b = 0; b < B; ++b) {
        dlogit(b) = (fp.probs(b) - labels[static_cast<std::size_t>(b)]) / static_cast<double>(B);
    }
    const Eigen::MatrixXd& hT = fp.hidden.back();
    const Eigen::MatrixXd hd = (hT.array() * fp.mask.array()).matrix();
    g.dense_w = hd * dlogit.transpose();
    g.dense_b = dlogit.sum();

    Eigen::MatrixXd dh = ((P.dense_w * dlogit).array() * fp.mask.array()).matrix();
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd dz(4 * H, B);
    for (std::size_t step = T; step-- > 0;) {
        const Eigen::MatrixXd& a = fp.gates[step];
        const auto gi = a.topRows(H).array();
        const auto gf = a.middleRows(H, H).array();
        const auto gg = a.middleRows(2 * H, H).array();
        const auto go = a.bottomRows(H).array();
        const Eigen::ArrayXXd tc = fp.cell[step].array().tanh();
        const Eigen::ArrayXXd c_prev = step > 0 ? Eigen::ArrayXXd(fp.cell[step - 1].array()) : Eigen::ArrayXXd(Eigen::ArrayXXd::Zero(H, B));

        dc.array() += dh.array() * go * (1.0 - tc.square());
        dz.topRows(H) = (dc.array() * gg * gi * (1.0 - gi)).matrix();
        dz.middleRows(H, H) = (dc.array() * c_prev * gf * (1.0 - gf)).matrix();
        dz.middleRows(2 * H, H) = (dc.array() * gi * (1.0 - gg.square())).matrix();
        dz.bottomRows(H) = (dh.array() * tc * go * (1.0 - go)).matrix();

        g.weights.noalias() += dz * fp.xh[step].transpose();
        g.bias += dz.rowwise().sum();
        const Eigen::MatrixXd dxh = P.weights.transpose() * dz;
        for (Eigen::Index b = 0; b < B; ++b) {
            g.embedding.row(batch[static_cast<std::size_t>(b)][step]) += dxh.col(b).head(E).transpose();
        }
        dh = dxh.bottomRows(H);
        dc = (dc.array() * gf).matrix();
    }
    return g;
}

/// Loss and gradients in one call; `mask` fixes the dropout pattern.
inline std::pair<double, LstmParams> loss_and_gradients(const LstmModel& m, std::span<const TokenSequence> batch,
                                                         std::span<const double> labels, const Eigen::MatrixXd* mask = nullptr) {
    const auto fp = forward_pass(m, batch, false, nullptr, mask);
    return {bce_from_logits(fp.logits, labels), backward(m, batch, fp, labels)};
}

/// Adam optimizer state over an LstmParams-shaped model.
class AdamOptimizer {
public:
    AdamOptimizer(const LstmModel& m, double lr, double beta1, double beta2, double eps)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps),
          m_(LstmParams::zeros(m.vocab_size, m.embed(), m.hidden())),
          v_(LstmParams::zeros(m.vocab_size, m.embed(), m.hidden())) {}

    void step(LstmParams& params, LstmParams& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        std::vector<std::span<double>> ps;
        std::vector<std::span<double>> gs;
        std::vector<std::span<double>> ms;
        std::vector<std::span<double>> vs;
        params.for_each([&](const char*, std::span<double> s) { ps.push_back(s); });
        grads.for_each([&](const char*, std::span<double> s) { gs.push_back(s); });
        m_.for_each([&](const char*, std::span<double> s) { ms.push_back(s); });
        v_.for_each([&](const char*, std::span<double> s) { vs.push_back(s); });
        for (std::size_t k = 0; k < ps.size(); ++k) {
            for (std::size_t i = 0; i < ps[k].size(); ++i) {
                const double gr = gs[k][i];
                ms[k][i] = b1_ * ms[k][i] + (1.0 - b1_) * gr;
                vs[k][i] = b2_ * vs[k][i] + (1.0 - b2_) * gr * gr;
                const double mhat = ms[k][i] / c1;
                const double vhat = vs[k][i] / c2;
                ps[k][i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    double lr_;
    double b1_;
    double b2_;
    double eps_;
    long long t_ = 0;
    LstmParams m_;
    LstmParams v_;
};

struct LstmEpoch {
    int epoch = 0;
    double train_loss = 0.0;  ///< mean over the epoch's batches, training mode
    double valid_loss = 0.0;
    double train_acc = 0.0;
    double valid_acc = 0.0;
};

struct LstmTrainResult {
    LstmModel model;  ///< parameters from the epoch with the lowest validation loss
    std::vector<LstmEpoch> history;
    int best_epoch = 0;
    double initial_train_loss = 0.0;  ///< inference-mode loss before any update
};

struct SequenceSet {
    std::vector<TokenSequence> sequences;
    std::vector<double> labels;
};

inline std::pair<double, double> evaluate_lstm(const LstmModel& m, const SequenceSet& data) {
    const auto p = predict_lstm(m, data.sequences);
    double loss = 0.0;
    double correct = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = std::clamp(p[i], 1e-15, 1.0 - 1e-15);
        const double y = data.labels[i];
        loss += -(y * std::log(pi) + (1.0 - y) * std::log(1.0 - pi));
        correct += ((pi >= 0.5) == (y > 0.5)) ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(p.size());
    return {loss / n, correct / n};
}

/// Mini-batch Adam on mean BCE. Stops after `early_stop_epochs` epochs without
/// a validation-loss improvement, or at max_epochs; the best epoch's
/// parameters are returned.
inline LstmTrainResult train_lstm(const SequenceSet& train, const SequenceSet& valid, const LstmConfig& cfg,
                                  const std::function<void(const LstmEpoch&)>& on_epoch = {}) {
    cfg.validate();
    if (train.sequences.empty() || valid.sequences.empty()) {
        throw DataError("train_lstm: training and validation sets must be non-empty");
    }
    if (train.sequences.size() != train.labels.size() || valid.sequences.size() != valid.labels.size()) {
        throw ConfigError("train_lstm: sequence and label counts differ");
    }
    LstmTrainResult res;
    res.model = init_lstm(cfg);
    LstmModel& m = res.model;
    AdamOptimizer adam(m, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
    Rng dropout_rng(m.dropout_seed);
    res.initial_train_loss = evaluate_lstm(m, train).first;

    LstmParams best = m.params;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<std::size_t> order(train.sequences.size());
    std::vector<TokenSequence> batch;
    std::vector<double> labels;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(cfg.seed, 0x5A00 + static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        double correct = 0.0;
        for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            labels.clear();
            for (std::size_t k = s; k < e; ++k) {
                batch.push_back(train.sequences[order[k]]);
                labels.push_back(train.labels[order[k]]);
            }
            const auto fp = forward_pass(m, batch, true, &dropout_rng);
            loss_sum += bce_from_logits(fp.logits, labels) * static_cast<double>(batch.size());
            for (std::size_t k = 0; k < batch.size(); ++k) {
                correct += ((fp.probs(static_cast<Eigen::Index>(k)) >= 0.5) == (labels[k] > 0.5)) ? 1.0 : 0.0;
            }
            auto grads = backward(m, batch, fp, labels);
            adam.step(m.params, grads);
        }
        LstmEpoch rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.train_acc = correct / static_cast<double>(order.size());
        std::tie(rec.valid_loss, rec.valid_acc) = evaluate_lstm(m, valid);
        res.history.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }
        if (rec.valid_loss < best_loss) {
            best_loss = rec.valid_loss;
            best = m.params;
            res.best_epoch = epoch;
            since_best = 0;
        } else if (cfg.early_stop_epochs > 0 && ++since_best >= cfg.early_stop_epochs) {
            break;
        }
    }
    if (res.best_epoch > 0) {
        m.params = best;
    }
    return res;
}

/// S = M + p_xg + p_lstm.
inline double composite_s(double momentum, double p_xg, double p_lstm) { return momentum + p_xg + p_lstm; }

// --- serialization: flat little-endian float64 blob + JSON manifest ---------

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::vector<unsigned char> lstm_blob(const LstmModel& m) {
    std::vector<unsigned char> out;
    out.reserve(m.params.size() * sizeof(double));
    m.params.for_each([&](const char*, std::span<const double> s) {
        for (double v : s) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, &v, sizeof bits);
            for (int k = 0; k < 8; ++k) {
                out.push_back(static_cast<unsigned char>(bits >> (8 * k)));
            }
        }
    });
    return out;
}

inline nlohmann::ordered_json lstm_manifest(const LstmModel& m) {
    nlohmann::ordered_json j;
    j["format"] = "mxg-lstm";
    j["format_version"] = 1;
    j["dtype"] = "float64-le";
    j["vocab_size"] = m.vocab_size;
    auto& vocab = j["vocabulary"] = nlohmann::ordered_json::array();
    for (int i = 0; i < m.vocab_size && i < kVocabularySize; ++i) {
        vocab.push_back(std::string(event_name(static_cast<EventType>(i))));
    }
    auto& shapes = j["tensors"] = nlohmann::ordered_json::array();
    shapes.push_back({{"name", "embedding"}, {"shape", {m.params.embedding.rows(), m.params.embedding.cols()}}, {"order", "column-major"}});
    shapes.push_back({{"name", "lstm_weights"}, {"shape", {m.params.weights.rows(), m.params.weights.cols()}}, {"order", "column-major"}, {"gate_rows", "input, forget, cell, output"}});
    shapes.push_back({{"name", "lstm_bias"}, {"shape", {m.params.bias.size()}}});
    shapes.push_back({{"name", "dense_w"}, {"shape", {m.params.dense_w.size()}}});
    shapes.push_back({{"name", "dense_b"}, {"shape", {1}}});
    const auto& c = m.config;
    j["config"] = {{"embed_dim", c.embed_dim}, {"hidden_units", c.hidden_units}, {"dropout", c.dropout}, {"max_seq_len", c.max_seq_len},
                   {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"early_stop_epochs", c.early_stop_epochs},
                   {"max_epochs", c.max_epochs}, {"init_scale", c.init_scale}};
    j["seed"] = c.seed;
    j["dropout_seed"] = m.dropout_seed;
    const auto blob = lstm_blob(m);
    j["blob_bytes"] = blob.size();
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(blob)));
    j["blob_fnv1a64"] = hex;
    return j;
}

inline void save_lstm(const LstmModel& m, const std::string& blob_path, const std::string& manifest_path) {
    const auto blob = lstm_blob(m);
    std::ofstream b(blob_path, std::ios::binary);
    if (!b) {
        throw DataError("cannot write '" + blob_path + "'");
    }
    b.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    std::ofstream j(manifest_path);
    if (!j) {
        throw DataError("cannot write '" + manifest_path + "'");
    }
    j << lstm_manifest(m).dump(2) << '\n';
}

inline LstmModel load_lstm(const std::string& blob_path, const std::string& manifest_path) {
    std::ifstream jin(manifest_path);
    if (!jin) {
        throw DataError("cannot open '" + manifest_path + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(jin);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("lstm manifest is not valid JSON: " + std::string(e.what()));
    }
    LstmConfig c;
    try {
        const auto& jc = j.at("config");
        c.embed_dim = jc.at("embed_dim").get<int>();
        c.hidden_units = jc.at("hidden_units").get<int>();
        c.dropout = jc.at("dropout").get<double>();
        c.max_seq_len = jc.at("max_seq_len").get<int>();
        c.batch_size = jc.at("batch_size").get<int>();
        c.learning_rate = jc.at("learning_rate").get<double>();
        c.early_stop_epochs = jc.at("early_stop_epochs").get<int>();
        c.max_epochs = jc.at("max_epochs").get<int>();
        c.init_scale = jc.value("init_scale", 0.08);
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("lstm manifest is missing fields: " + std::string(e.what()));
    }
    LstmModel m;
    m.config = c;
    m.vocab_size = j.value("vocab_size", kVocabularySize);
    m.dropout_seed = j.value("dropout_seed", std::uint64_t{0});
    m.params = LstmParams::zeros(m.vocab_size, c.embed_dim, c.hidden_units);
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) {
        throw DataError("cannot open '" + blob_path + "'");
    }
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (blob.size() != m.params.size() * sizeof(double)) {
        throw DataError("lstm blob has " + std::to_string(blob.size()) + " bytes, manifest shapes need " + std::to_string(m.params.size() * sizeof(double)));
    }
    std::size_t off = 0;
    m.params.for_each([&](const char*, std::span<double> s) {
        for (double& v : s) {
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) {
                bits |= static_cast<std::uint64_t>(blob[off++]) << (8 * k);
            }
            std::memcpy(&v, &bits, sizeof v);
        }
    });
    return m;
}

}  // namespace mxg
