#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>

#include "mxg/lstm.hpp"
#include "oracles.hpp"

using namespace mxg;

namespace {

LstmConfig tiny(std::uint64_t seed = 1) {
    LstmConfig c;
    c.embed_dim = 4;
    c.hidden_units = 3;
    c.seed = seed;
    return c;
}

int random_token(Rng& rng, EventType avoid_a = EventType::pad, EventType avoid_b = EventType::pad) {
    for (;;) {
        const auto e = static_cast<EventType>(1 + rng() % kModeledEventCount);
        if (e != avoid_a && e != avoid_b) {
            return token_id(e);
        }
    }
}

// Positives end with lpr, a few filler events, then shot. Negatives either
// end with shot but never saw lpr, or saw lpr but end elsewhere.
SequenceSet planted(int n, std::uint64_t seed) {
    Rng rng(seed);
    SequenceSet out;
    for (int i = 0; i < n; ++i) {
        const bool pos = i % 2 == 0;
        const int len = 6 + static_cast<int>(rng() % 20);
        std::vector<int> t;
        for (int k = 0; k < len; ++k) {
            t.push_back(random_token(rng, EventType::lpr, EventType::shot));
        }
        const int gap = static_cast<int>(rng() % 3);
        if (pos) {
            t[static_cast<std::size_t>(len - 2 - gap)] = token_id(EventType::lpr);
            t.back() = token_id(EventType::shot);
        } else if (rng() % 2) {
            t.back() = token_id(EventType::shot);
        } else {
            t[static_cast<std::size_t>(len - 2 - gap)] = token_id(EventType::lpr);
        }
        out.sequences.push_back(encode_sequence(std::span<const int>(t)));
        out.labels.push_back(pos ? 1.0 : 0.0);
    }
    return out;
}

std::vector<TokenSequence> random_batch(int n, int len, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TokenSequence> b(static_cast<std::size_t>(n));
    for (auto& s : b) {
        for (int k = 0; k < len; ++k) {
            s.push_back(static_cast<int>(rng() % kVocabularySize));
        }
    }
    return b;
}

}  // namespace

TEST(EncodeSequence, EmptyIsAllPadding) {
    const auto s = encode_sequence(std::span<const int>{});
    EXPECT_EQ(s, TokenSequence(20, 0));
}

TEST(EncodeSequence, LongInputKeepsLastTokens) {
    std::vector<int> t;
    for (int i = 0; i < 25; ++i) {
        t.push_back(1 + i % 20);
    }
    const auto s = encode_sequence(std::span<const int>(t));
    ASSERT_EQ(s.size(), 20u);
    EXPECT_TRUE(std::equal(s.begin(), s.end(), t.begin() + 5));
}

TEST(EncodeSequence, ShortInputIsLeftPadded) {
    const std::vector<EventType> ev{EventType::pass, EventType::reception, EventType::shot};
    const auto s = encode_sequence(std::span<const EventType>(ev));
    ASSERT_EQ(s.size(), 20u);
    for (int i = 0; i < 17; ++i) {
        EXPECT_EQ(s[static_cast<std::size_t>(i)], 0);
    }
    EXPECT_EQ(s[17], token_id(EventType::pass));
    EXPECT_EQ(s[18], token_id(EventType::reception));
    EXPECT_EQ(s[19], token_id(EventType::shot));
}

TEST(EncodeSequence, UnknownTokenIsAnError) {
    const std::vector<int> t{3, 99};
    EXPECT_THROW(encode_sequence(std::span<const int>(t)), DataError);
    EXPECT_THROW(encode_sequence(std::span<const int>(std::vector<int>{-1})), DataError);
}

TEST(LstmForward, ZeroParametersGiveOneHalf) {
    auto m = init_lstm(LstmConfig{});
    m.params = LstmParams::zeros(m.vocab_size, m.embed(), m.hidden());
    for (double p : forward(m, random_batch(7, 20, 3))) {
        EXPECT_EQ(p, 0.5);
    }
}

TEST(LstmForward, InferenceIsDeterministic) {
    const auto m = init_lstm(LstmConfig{});
    const auto b = random_batch(16, 20, 4);
    EXPECT_EQ(forward(m, b), forward(m, b));
}

TEST(LstmForward, OutputsIndependentOfBatchComposition) {
    const auto m = init_lstm(LstmConfig{});
    const auto b = random_batch(33, 20, 5);
    const auto all = forward(m, b);
    std::vector<TokenSequence> rev(b.rbegin(), b.rend());
    const auto back = forward(m, rev);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto single = forward(m, std::vector<TokenSequence>{b[i]});
        EXPECT_NEAR(single[0], all[i], 1e-14);
        EXPECT_NEAR(back[b.size() - 1 - i], all[i], 1e-14);
    }
}

TEST(LstmForward, RejectsOutOfVocabularyTokens) {
    const auto m = init_lstm(tiny());
    EXPECT_THROW(forward(m, std::vector<TokenSequence>{{1, 2, kVocabularySize}}), DataError);
    EXPECT_THROW(forward(m, std::vector<TokenSequence>{{1, 2}, {1}}), DataError);
}

TEST(LstmForwardProperty, HiddenStatesBoundedAndCellsFinite) {
    auto cfg = LstmConfig{};
    cfg.init_scale = 2.0;  // large weights push the gates to saturation
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        const auto m = init_lstm(cfg);
        const auto fp = forward_pass(m, random_batch(8, 20, seed + 10), false);
        ASSERT_EQ(fp.hidden.size(), 20u);
        for (std::size_t t = 0; t < 20; ++t) {
            EXPECT_LE(fp.hidden[t].cwiseAbs().maxCoeff(), 1.0);
            EXPECT_TRUE(fp.cell[t].allFinite());
        }
    }
}

TEST(LstmGradient, MatchesCentralDifferences) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto m = init_lstm(tiny(seed));
        const auto batch = random_batch(2, 20, seed);
        const auto chk = oracle::lstm_gradient_check(m, batch, {1.0, 0.0});
        EXPECT_LT(chk.max_rel_error, 1e-4) << "worst group " << chk.worst_group;
        EXPECT_EQ(chk.n_params, m.params.size());
    }
}

TEST(LstmGradient, MatchesCentralDifferencesUnderFixedDropoutMask) {
    const auto m = init_lstm(tiny(9));
    const auto batch = random_batch(2, 12, 9);
    Eigen::MatrixXd mask(3, 2);
    mask << 1.0 / 0.7, 0.0, 0.0, 1.0 / 0.7, 1.0 / 0.7, 1.0 / 0.7;
    const auto chk = oracle::lstm_gradient_check(m, batch, {0.0, 1.0}, 1e-5, &mask);
    EXPECT_LT(chk.max_rel_error, 1e-4) << "worst group " << chk.worst_group;
}

// Inverted dropout: averaging training-mode outputs of the dropout layer over
// many masks recovers the inference-mode activations.
TEST(LstmDropoutProperty, MaskExpectationMatchesInference) {
    auto cfg = LstmConfig{};
    cfg.embed_dim = 8;
    cfg.hidden_units = 16;
    const auto m = init_lstm(cfg);
    const auto seq = random_batch(1, 20, 11).front();
    const auto inf = forward_pass(m, std::vector<TokenSequence>{seq}, false);
    const Eigen::VectorXd h = inf.hidden.back().col(0);
    const double logit = inf.logits(0);

    constexpr int kMasks = 50000;
    constexpr int kChunk = 5000;
    const std::vector<TokenSequence> copies(kChunk, seq);
    Rng rng(12);
    Eigen::VectorXd sum_act = Eigen::VectorXd::Zero(h.size());
    double sum_logit = 0.0;
    for (int done = 0; done < kMasks; done += kChunk) {
        const auto fp = forward_pass(m, copies, true, &rng);
        sum_act += (fp.hidden.back().array() * fp.mask.array()).matrix().rowwise().sum();
        sum_logit += fp.logits.sum();
    }
    const Eigen::VectorXd mean_act = sum_act / kMasks;
    EXPECT_LT((mean_act - h).norm() / h.norm(), 0.01);
    EXPECT_NEAR(sum_logit / kMasks, logit, 0.01 * std::max(1.0, std::abs(logit)));
}

TEST(TrainLstm, RejectsEmptySets) {
    const auto d = planted(10, 1);
    EXPECT_THROW(train_lstm({}, d, LstmConfig{}), DataError);
    EXPECT_THROW(train_lstm(d, {}, LstmConfig{}), DataError);
}

TEST(TrainLstm, MemorizesSmallRandomSet) {
    Rng rng(21);
    SequenceSet d;
    while (d.sequences.size() < 32) {
        std::vector<int> t;
        for (int k = 0; k < 20; ++k) {
            t.push_back(1 + static_cast<int>(rng() % kModeledEventCount));
        }
        auto s = encode_sequence(std::span<const int>(t));
        if (std::find(d.sequences.begin(), d.sequences.end(), s) == d.sequences.end()) {
            d.sequences.push_back(std::move(s));
            d.labels.push_back(uniform01(rng) < 0.5 ? 1.0 : 0.0);
        }
    }
    LstmConfig c;
    c.seed = 3;
    c.max_epochs = 200;
    c.early_stop_epochs = 0;
    c.batch_size = 4;
    double best = 0.0;
    train_lstm(d, d, c, [&](const LstmEpoch& e) { best = std::max(best, e.valid_acc); });
    EXPECT_GE(best, 0.95);
}

TEST(TrainLstm, LearnsPlantedPatternAndFirstEpochDescends) {
    const auto train = planted(2400, 31);
    const auto valid = planted(600, 32);
    LstmConfig c;
    c.seed = 5;
    c.max_epochs = 15;
    const auto res = train_lstm(train, valid, c);
    ASSERT_FALSE(res.history.empty());
    EXPECT_NEAR(res.initial_train_loss, std::log(2.0), 0.05);
    EXPECT_LT(res.history.front().train_loss, std::log(2.0));
    EXPECT_GE(evaluate_lstm(res.model, valid).second, 0.90);
}

TEST(TrainLstm, DeterministicGivenSeed) {
    const auto train = planted(200, 41);
    const auto valid = planted(60, 42);
    LstmConfig c;
    c.seed = 8;
    c.max_epochs = 2;
    const auto a = train_lstm(train, valid, c);
    const auto b = train_lstm(train, valid, c);
    EXPECT_EQ(lstm_blob(a.model), lstm_blob(b.model));
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
        EXPECT_EQ(a.history[i].valid_loss, b.history[i].valid_loss);
    }
}

TEST(TrainLstm, EarlyStoppingRestoresBestEpoch) {
    const auto train = planted(64, 51);
    auto valid = planted(64, 52);
    for (auto& y : valid.labels) {
        y = 1.0 - y;  // adversarial validation set: loss rises as training succeeds
    }
    LstmConfig c;
    c.seed = 2;
    c.max_epochs = 60;
    c.early_stop_epochs = 5;
    const auto res = train_lstm(train, valid, c);
    EXPECT_LT(static_cast<int>(res.history.size()), 60);
    EXPECT_EQ(static_cast<int>(res.history.size()), res.best_epoch + 5);
    EXPECT_DOUBLE_EQ(evaluate_lstm(res.model, valid).first, res.history[static_cast<std::size_t>(res.best_epoch - 1)].valid_loss);
}

TEST(LstmSerialization, RoundTripIsBitExact) {
    const auto m = init_lstm(tiny(77));
    const auto dir = std::filesystem::temp_directory_path() / "mxg_lstm_roundtrip";
    std::filesystem::create_directories(dir);
    const auto blob = (dir / "m.bin").string();
    const auto man = (dir / "m.json").string();
    save_lstm(m, blob, man);
    const auto back = load_lstm(blob, man);
    EXPECT_EQ(lstm_blob(back), lstm_blob(m));
    const auto b = random_batch(5, 20, 78);
    EXPECT_EQ(forward(back, b), forward(m, b));
    std::filesystem::resize_file(blob, 8);
    EXPECT_THROW(load_lstm(blob, man), DataError);
    std::filesystem::remove_all(dir);
}

TEST(CompositeS, Examples) {
    EXPECT_DOUBLE_EQ(composite_s(1.0, 0.0, 0.0), 1.0);
    EXPECT_NEAR(composite_s(1.2512, 0.02, 0.5), 1.7712, 1e-12);
    EXPECT_EQ(composite_s(1.3, 0.2, 0.7), composite_s(1.3, 0.7, 0.2));
}
