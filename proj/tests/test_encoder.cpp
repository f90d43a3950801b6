#include <gtest/gtest.h>

#include <cmath>

#include "bioner/embeddings.hpp"
#include "bioner/encoder.hpp"
#include "bioner/optim.hpp"
#include "test_util.hpp"

using namespace bioner;
using bioner::testing::gradcheck;
using bioner::testing::random_tensor;

namespace {

Architecture tiny_arch() {
    Architecture a;
    a.char_dim = 3;
    a.word_dim = 4;
    a.hidden = 3;
    a.max_filter_width = 3;
    a.filters_per_width = 1;
    a.max_filters = 2;
    a.char_vocab = 8;
    a.word_vocab = 10;
    return a;
}

// Params with every tensor redrawn from U(-scale, scale) so activations are far from zero.
EncoderParams random_params(const Architecture& arch, Rng& rng, double scale = 0.5) {
    EncoderParams p = EncoderParams::init(arch, random_tensor({arch.word_vocab, arch.word_dim}, rng), rng);
    NamedParams named;
    p.collect(named);
    for (auto& [name, t] : named) {
        for (auto& v : t.data()) v = rng.uniform(-scale, scale);
    }
    for (std::size_t c = 0; c < arch.char_dim; ++c) p.char_emb[CharVocab::kPad * arch.char_dim + c] = 0.0;
    return p;
}

Sentence make_sentence(std::vector<int> words, std::vector<std::vector<int>> chars) {
    Sentence s;
    for (std::size_t i = 0; i < words.size(); ++i) s.tokens.push_back("t" + std::to_string(i));
    s.word_ids = std::move(words);
    s.char_ids = std::move(chars);
    return s;
}

// Straight-line evaluation of one LSTM step from raw arrays.
std::pair<std::vector<double>, std::vector<double>> lstm_oracle(const std::vector<double>& x, const std::vector<double>& h,
                                                                const std::vector<double>& c, const LstmParams& p) {
    const std::size_t H = h.size();
    std::vector<double> hx = h;
    hx.insert(hx.end(), x.begin(), x.end());
    auto gate = [&](const Tensor& W, const Tensor& b, std::size_t r) {
        double s = b[r];
        for (std::size_t k = 0; k < hx.size(); ++k) s += W[r * hx.size() + k] * hx[k];
        return s;
    };
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> h2(H), c2(H);
    for (std::size_t r = 0; r < H; ++r) {
        const double i = sig(gate(p.W_i, p.b_i, r));
        const double f = sig(gate(p.W_f, p.b_f, r));
        const double o = sig(gate(p.W_o, p.b_o, r));
        const double g = std::tanh(gate(p.W_g, p.b_g, r));
        c2[r] = f * c[r] + i * g;
        h2[r] = o * std::tanh(c2[r]);
    }
    return {h2, c2};
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Architecture, DefaultDimensions) {
    Architecture a;
    std::vector<std::size_t> counts;
    for (std::size_t w = 1; w <= 7; ++w) counts.push_back(a.filters(w));
    EXPECT_EQ(counts, (std::vector<std::size_t>{50, 100, 150, 200, 200, 200, 200}));
    EXPECT_EQ(a.char_feature_dim(), 1100u);
    EXPECT_EQ(a.lstm_input_dim(), 1400u);
    EXPECT_EQ(Architecture::from_json(a.to_json()), a);
}

TEST(CharCnn, ZeroEmbeddingsGiveZeros) {
    Architecture a;
    a.char_vocab = 5;
    a.word_vocab = 6;
    a.word_dim = 2;
    a.hidden = 2;
    Rng rng(1);
    auto p = EncoderParams::init(a, Tensor::zeros({6, 2}), rng);
    for (auto& v : p.char_emb.data()) v = 0.0;
    std::vector<int> row{2, 3, 4};
    Tensor out = char_cnn(p, a, row);
    ASSERT_EQ(out.size(), 1100u);
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(CharCnn, OneHotWidthOneFilter) {
    Architecture a;
    a.char_dim = 3;
    a.max_filter_width = 1;
    a.filters_per_width = 1;
    a.max_filters = 1;
    a.char_vocab = 6;
    a.word_vocab = 3;
    a.word_dim = 2;
    a.hidden = 2;
    Rng rng(2);
    auto p = EncoderParams::init(a, Tensor::zeros({3, 2}), rng);
    for (std::size_t j = 0; j < 3; ++j) {
        for (auto& v : p.cnn.weights[0].data()) v = 0.0;
        p.cnn.weights[0][j] = 1.0;
        std::vector<int> row{3, 5, 2, 4};
        double expected = 0.0;
        for (int c : row) expected = std::max(expected, std::max(0.0, p.char_emb.at(c, j)));
        EXPECT_DOUBLE_EQ(char_cnn(p, a, row)[0], expected);
    }
}

TEST(CharCnn, InvariantToExtraPadding) {
    auto a = tiny_arch();
    Rng rng(3);
    auto p = random_params(a, rng);
    for (auto& b : p.cnn.biases) {
        for (auto& v : b.data()) v = -0.3;  // negative bias so pad windows matter
    }
    std::vector<int> short_word{4, 5};
    std::vector<int> floor_row{4, 5, 0};
    std::vector<int> long_row{4, 5, 0, 0, 0, 0, 0, 0};
    EXPECT_EQ(values(char_cnn(p, a, short_word)), values(char_cnn(p, a, floor_row)));
    EXPECT_EQ(values(char_cnn(p, a, floor_row)), values(char_cnn(p, a, long_row)));
}

TEST(CharCnn, SentenceBatchMatchesPerWord) {
    auto a = tiny_arch();
    Rng rng(4);
    auto p = random_params(a, rng);
    auto s = make_sentence({5, 6, 7}, {{2, 3, 4, 5}, {6}, {7, 2}});
    Tensor all = char_features(p, a, s);
    for (std::size_t w = 0; w < 3; ++w) {
        Tensor one = char_cnn(p, a, s.char_ids[w]);
        for (std::size_t k = 0; k < one.size(); ++k) EXPECT_DOUBLE_EQ(all.at(w, k), one[k]);
    }
}

TEST(LstmStep, ZeroParams) {
    Rng rng(5);
    LstmParams p = LstmParams::init(1, 2, rng);
    NamedParams named;
    p.collect(named, "l");
    for (auto& [n, t] : named) {
        for (auto& v : t.data()) v = 0.0;
    }
    Tensor x({2}, {0.7, -3.0});
    auto zero = lstm_step(x, Tensor({1}, {0.0}), Tensor({1}, {0.0}), p);
    EXPECT_EQ(zero.h[0], 0.0);
    EXPECT_EQ(zero.c[0], 0.0);
    auto half = lstm_step(x, Tensor({1}, {0.0}), Tensor({1}, {1.0}), p);
    EXPECT_DOUBLE_EQ(half.c[0], 0.5);
    EXPECT_DOUBLE_EQ(half.h[0], 0.5 * std::tanh(0.5));
}

TEST(LstmStep, MatchesStraightLineOracle) {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        LstmParams p = LstmParams::init(4, 3, rng);
        NamedParams named;
        p.collect(named, "l");
        for (auto& [n, t] : named) {
            for (auto& v : t.data()) v = rng.uniform(-1, 1);
        }
        Tensor x = random_tensor({3}, rng), h = random_tensor({4}, rng), c = random_tensor({4}, rng);
        auto got = lstm_step(x, h, c, p);
        auto [h2, c2] = lstm_oracle(values(x), values(h), values(c), p);
        for (std::size_t r = 0; r < 4; ++r) {
            EXPECT_NEAR(got.h[r], h2[r], 1e-12);
            EXPECT_NEAR(got.c[r], c2[r], 1e-12);
        }
    }
}

TEST(LstmStep, GradientCheck) {
    Rng rng(7);
    LstmParams p = LstmParams::init(2, 3, rng);
    NamedParams named;
    p.collect(named, "l");
    std::vector<Tensor> params;
    for (auto& [n, t] : named) {
        for (auto& v : t.data()) v = rng.uniform(-1, 1);
        params.push_back(t);
    }
    Tensor x = random_tensor({3}, rng), h = random_tensor({2}, rng), c = random_tensor({2}, rng);
    params.push_back(x);
    params.push_back(h);
    params.push_back(c);
    Tensor w = random_tensor({2}, rng, 1.0, false);
    auto loss = [&] {
        auto s = lstm_step(x, h, c, p);
        return sum(add(mul(s.h, w), mul(s.c, s.c)));
    };
    EXPECT_LT(gradcheck(loss, params), 1e-4);
}

TEST(Encode, ShapesAndSingleToken) {
    auto a = tiny_arch();
    Rng rng(8);
    auto p = random_params(a, rng);
    auto one = encode(p, a, make_sentence({3}, {{2, 3}}));
    EXPECT_EQ(one.joint.shape(), (Shape{1, 2 * a.hidden}));
    auto three = encode(p, a, make_sentence({3, 4, 5}, {{2}, {3}, {4}}));
    EXPECT_EQ(three.joint.shape(), (Shape{3, 2 * a.hidden}));
    EXPECT_EQ(three.forward.shape(), (Shape{3, a.hidden}));
}

TEST(Encode, MatchesStepwiseLstm) {
    auto a = tiny_arch();
    Rng rng(9);
    auto p = random_params(a, rng);
    auto s = make_sentence({3, 4, 5, 6}, {{2}, {3, 4}, {4, 5, 6, 7}, {2, 2}});
    auto enc = encode(p, a, s);
    const Tensor x = concat({gather_rows(p.word_emb, s.word_ids), char_features(p, a, s)}, 1);
    const std::size_t n = 4, H = a.hidden;
    Tensor h = Tensor::zeros({H}), c = Tensor::zeros({H});
    for (std::size_t t = 0; t < n; ++t) {
        auto st = lstm_step(reshape(slice(x, 0, t, 1), {x.dim(1)}), h, c, p.forward);
        h = st.h;
        c = st.c;
        for (std::size_t r = 0; r < H; ++r) EXPECT_NEAR(enc.forward.at(t, r), h[r], 1e-12);
    }
    h = Tensor::zeros({H});
    c = Tensor::zeros({H});
    for (std::size_t t = n; t-- > 0;) {
        auto st = lstm_step(reshape(slice(x, 0, t, 1), {x.dim(1)}), h, c, p.backward);
        h = st.h;
        c = st.c;
        for (std::size_t r = 0; r < H; ++r) EXPECT_NEAR(enc.backward.at(t, r), h[r], 1e-12);
    }
}

TEST(Encode, PalindromeWithTiedDirections) {
    auto a = tiny_arch();
    Rng rng(10);
    auto p = random_params(a, rng);
    NamedParams f, b;
    p.forward.collect(f, "f");
    p.backward.collect(b, "b");
    for (std::size_t i = 0; i < f.size(); ++i) {
        std::copy(f[i].second.data().begin(), f[i].second.data().end(), b[i].second.data().begin());
    }
    auto s = make_sentence({3, 7, 4, 7, 3}, {{2}, {5, 6}, {3}, {5, 6}, {2}});
    auto enc = encode(p, a, s);
    const std::size_t n = 5;
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t r = 0; r < a.hidden; ++r) EXPECT_DOUBLE_EQ(enc.forward.at(t, r), enc.backward.at(n - 1 - t, r));
    }
}

TEST(Encode, ReversalSwapsDirections) {
    auto a = tiny_arch();
    Rng rng(11);
    auto p = random_params(a, rng);
    auto s = make_sentence({3, 4, 5}, {{2, 3}, {4}, {5, 6, 7}});
    auto r = make_sentence({5, 4, 3}, {{5, 6, 7}, {4}, {2, 3}});
    EncoderParams swapped = p;
    std::swap(swapped.forward, swapped.backward);
    auto e1 = encode(p, a, s);
    auto e2 = encode(swapped, a, r);
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t k = 0; k < a.hidden; ++k) {
            EXPECT_DOUBLE_EQ(e2.forward.at(t, k), e1.backward.at(2 - t, k));
            EXPECT_DOUBLE_EQ(e2.backward.at(t, k), e1.forward.at(2 - t, k));
        }
    }
}

TEST(Encode, DeterministicWithoutDropout) {
    auto a = tiny_arch();
    Rng rng(12);
    auto p = random_params(a, rng);
    auto s = make_sentence({3, 4}, {{2}, {3}});
    EXPECT_EQ(values(encode(p, a, s).joint), values(encode(p, a, s).joint));
}

TEST(Encode, GradientCheckThroughCharCnnAndBiLstm) {
    auto a = tiny_arch();
    Rng rng(13);
    auto p = random_params(a, rng);
    // Every word fills the widest window, so no PAD character enters a pooled window.
    auto s = make_sentence({3, 4, 5}, {{2, 3, 4}, {5, 6, 7}, {6, 7, 2, 3}});
    NamedParams named;
    p.collect(named);
    std::vector<Tensor> params;
    for (auto& [n, t] : named) params.push_back(t);
    Tensor w = random_tensor({3, 2 * a.hidden}, rng, 1.0, false);
    auto loss = [&] { return sum(mul(encode(p, a, s).joint, w)); };
    EXPECT_LT(gradcheck(loss, params), 1e-4);
}

TEST(Encode, PadCharacterRowNeverChanges) {
    auto a = tiny_arch();
    Rng rng(14);
    auto p = random_params(a, rng);
    auto s = make_sentence({3, 4}, {{2}, {3, 4, 5, 6}});
    NamedParams named;
    p.collect(named);
    std::vector<Tensor> params;
    for (auto& [n, t] : named) params.push_back(t);
    AdamState adam(AdamConfig{0.1});
    for (int step = 0; step < 3; ++step) {
        zero_grads(params);
        backward(sum(encode(p, a, s).joint));
        for (auto& t : params) t.grad();
        adam_step(params, adam);
    }
    for (std::size_t c = 0; c < a.char_dim; ++c) EXPECT_EQ(p.char_emb.at(CharVocab::kPad, c), 0.0);
}
