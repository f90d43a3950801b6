#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bioner/errors.hpp"
#include "bioner/eval.hpp"
#include "bioner/pipeline.hpp"
#include "test_util.hpp"

using namespace bioner;
using Tags = std::vector<std::string>;

namespace {

// Independent BIO chunker: a chunk starts at B-X, or at I-X that does not
// continue an open X chunk, and runs while I-X follows.
std::vector<Chunk> bio_oracle(const Tags& tags) {
    std::vector<Chunk> out;
    bool open = false;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const std::string& t = tags[i];
        if (t == "O") {
            open = false;
            continue;
        }
        const char prefix = t[0];
        const std::string type = t.substr(2);
        if (prefix == 'I' && open && out.back().type == type) {
            out.back().end = i;
        } else {
            out.push_back({i, i, type});
            open = true;
        }
    }
    return out;
}

Tags random_bio(Rng& rng, std::size_t n) {
    static const Tags pool{"O", "O", "B-Disease", "I-Disease", "B-Chemical", "I-Chemical"};
    Tags t(n);
    for (auto& x : t) x = pool[rng.index(pool.size())];
    return t;
}

}  // namespace

TEST(Chunks, WellFormedExample) {
    const Tags t{"S-D", "O", "B-C", "E-C"};
    EXPECT_EQ(extract_chunks(t), (std::vector<Chunk>{{0, 0, "D"}, {2, 3, "C"}}));
}

TEST(Chunks, OrphanContinuationStartsChunk) {
    const Tags t{"I-D", "E-D"};
    std::vector<std::size_t> repaired;
    EXPECT_EQ(extract_chunks(t, &repaired), (std::vector<Chunk>{{0, 1, "D"}}));
    EXPECT_EQ(repaired, (std::vector<std::size_t>{0}));
}

TEST(Chunks, UnterminatedChunkIsClosed) {
    const Tags t{"B-D", "I-D", "O", "B-C"};
    std::vector<std::size_t> repaired;
    EXPECT_EQ(extract_chunks(t, &repaired), (std::vector<Chunk>{{0, 1, "D"}, {3, 3, "C"}}));
    EXPECT_FALSE(repaired.empty());
}

TEST(Chunks, TypeSwitchSplits) {
    const Tags t{"B-D", "E-C"};
    EXPECT_EQ(extract_chunks(t), (std::vector<Chunk>{{0, 0, "D"}, {1, 1, "C"}}));
}

TEST(Chunks, AnySchemeReadsBio) {
    const Tags bio{"B-D", "I-D", "O", "I-C"};
    EXPECT_EQ(chunks_any_scheme(bio), (std::vector<Chunk>{{0, 1, "D"}, {3, 3, "C"}}));
}

TEST(Chunks, BioRoundTripMatchesOracle) {
    Rng rng(77);
    for (int k = 0; k < 1500; ++k) {
        const Tags bio = random_bio(rng, 1 + rng.index(12));
        const auto iobes = bio_to_iobes(bio, BioMode::Lenient).tags;
        ASSERT_EQ(extract_chunks(iobes), bio_oracle(bio)) << "instance " << k;
    }
}

TEST(Prf, IdentityScoresOne) {
    std::vector<std::vector<Chunk>> g{{{0, 0, "D"}, {2, 3, "C"}}, {{1, 1, "D"}, {3, 4, "D"}, {6, 6, "C"}}};
    auto r = exact_match_prf(g, g);
    EXPECT_DOUBLE_EQ(r.precision(), 1.0);
    EXPECT_DOUBLE_EQ(r.recall(), 1.0);
    EXPECT_DOUBLE_EQ(r.f1(), 1.0);
}

TEST(Prf, HalfPrecisionQuarterRecall) {
    std::vector<std::vector<Chunk>> g{{{0, 0, "D"}, {2, 3, "C"}, {5, 5, "D"}, {7, 8, "C"}}};
    std::vector<std::vector<Chunk>> p{{{0, 0, "D"}, {2, 2, "C"}}};
    auto r = exact_match_prf(g, p);
    EXPECT_DOUBLE_EQ(r.precision(), 0.5);
    EXPECT_DOUBLE_EQ(r.recall(), 0.25);
    EXPECT_NEAR(r.f1(), 1.0 / 3.0, 1e-12);
}

TEST(Prf, EmptyPredictionScoresZero) {
    std::vector<std::vector<Chunk>> g{{{0, 0, "D"}}};
    std::vector<std::vector<Chunk>> p{{}};
    auto r = exact_match_prf(g, p);
    EXPECT_EQ(r.precision(), 0.0);
    EXPECT_EQ(r.recall(), 0.0);
    EXPECT_EQ(r.f1(), 0.0);
}

TEST(Prf, BoundaryOrTypeErrorsAreMisses) {
    std::vector<std::vector<Chunk>> g{{{0, 1, "D"}, {3, 3, "C"}}};
    std::vector<std::vector<Chunk>> p{{{0, 0, "D"}, {3, 3, "D"}}};
    EXPECT_EQ(exact_match_prf(g, p).overall.correct, 0u);
}

TEST(Prf, SwappingSidesSwapsPrecisionAndRecall) {
    Rng rng(5);
    for (int k = 0; k < 200; ++k) {
        std::vector<Tags> a, b;
        for (int s = 0; s < 3; ++s) {
            const std::size_t n = 1 + rng.index(8);
            a.push_back(bio_to_iobes(random_bio(rng, n), BioMode::Lenient).tags);
            b.push_back(bio_to_iobes(random_bio(rng, n), BioMode::Lenient).tags);
        }
        auto ab = exact_match_prf(a, b), ba = exact_match_prf(b, a);
        EXPECT_DOUBLE_EQ(ab.precision(), ba.recall());
        EXPECT_DOUBLE_EQ(ab.recall(), ba.precision());
        EXPECT_DOUBLE_EQ(ab.f1(), ba.f1());
    }
}

TEST(Prf, MicroAverageAggregatesCounts) {
    std::vector<std::vector<Chunk>> g{{{0, 0, "D"}, {1, 1, "D"}, {2, 2, "D"}, {4, 4, "C"}}};
    std::vector<std::vector<Chunk>> p{{{0, 0, "D"}, {4, 4, "C"}, {5, 5, "C"}, {6, 6, "C"}}};
    auto r = exact_match_prf(g, p);
    EXPECT_EQ(r.per_type.at("D").correct, 1u);
    EXPECT_EQ(r.per_type.at("C").predicted, 3u);
    std::size_t gold = 0, pred = 0, corr = 0;
    for (const auto& [t, c] : r.per_type) {
        gold += c.gold;
        pred += c.predicted;
        corr += c.correct;
    }
    EXPECT_EQ(r.overall.gold, gold);
    EXPECT_EQ(r.overall.predicted, pred);
    EXPECT_EQ(r.overall.correct, corr);
    EXPECT_DOUBLE_EQ(r.precision(), 0.5);
    EXPECT_DOUBLE_EQ(r.recall(), 0.5);
}

TEST(Prf, MismatchedInputsRejected) {
    std::vector<Tags> g{{"O", "S-D"}, {"O"}};
    std::vector<Tags> short_p{{"O", "S-D"}};
    std::vector<Tags> ragged{{"O", "S-D"}, {"O", "O"}};
    EXPECT_THROW(exact_match_prf(g, short_p), DataError);
    try {
        exact_match_prf(g, ragged);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("sentence 1"), std::string::npos) << e.what();
    }
}

TEST(Report, JsonAndTable) {
    std::vector<Tags> g{{"S-D", "O", "B-C", "E-C"}};
    auto r = exact_match_prf(g, g);
    auto j = r.to_json();
    EXPECT_DOUBLE_EQ(j["f1"].get<double>(), 1.0);
    EXPECT_TRUE(j["per_type"].contains("C"));
    EXPECT_NE(r.to_table().find("D"), std::string::npos);
}

TEST(Subsample, FractionOneIsIdentity) {
    auto idx = subsample(17, 1.0, 3);
    std::vector<std::size_t> all(17);
    std::iota(all.begin(), all.end(), 0);
    EXPECT_EQ(idx, all);
}

TEST(Subsample, SeededSortedAndSized) {
    auto a = subsample(100, 0.25, 9), b = subsample(100, 0.25, 9), c = subsample(100, 0.25, 10);
    EXPECT_EQ(a.size(), 25u);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(subsample(10, 0.01, 1).size(), 1u);
}

TEST(Subsample, FractionOutsideRangeRejected) {
    EXPECT_THROW(subsample(10, 0.0, 1), ConfigError);
    EXPECT_THROW(subsample(10, 1.5, 1), ConfigError);
}

TEST(LearningCurve, PassesSubsetsAndFullRunReproduces) {
    std::vector<Sentence> train(40);
    for (std::size_t i = 0; i < train.size(); ++i) train[i].tokens = {std::to_string(i)};
    Pipeline p = [](std::span<const Sentence> data, std::uint64_t seed) {
        double h = static_cast<double>(seed % 7);
        for (const auto& s : data) h += std::stod(s.tokens[0]);
        return h / 1000.0;
    };
    const std::vector<double> fractions{0.25, 0.5, 1.0};
    auto curve = learning_curve(p, train, fractions, 4);
    ASSERT_EQ(curve.size(), 3u);
    EXPECT_EQ(curve[0].sentences, 10u);
    EXPECT_EQ(curve[1].sentences, 20u);
    EXPECT_EQ(curve[2].sentences, 40u);
    EXPECT_DOUBLE_EQ(curve[2].f1, p(train, 4));
    const std::vector<double> bad{0.0};
    EXPECT_THROW(learning_curve(p, train, bad, 4), ConfigError);
}

TEST(Unseen, CountsSeenAndUnseen) {
    std::vector<RawSentence> train{{{"kalomitis", "and", "ribanol", "x", "tupomycin"},
                                    {"B-Disease", "O", "B-Chemical", "O", "B-Chemical"}}};
    std::vector<RawSentence> gold{
        {{"kalomitis", "ribanol", "tupomycin", "zeta", "acute", "fosoma"},
         {"B-Disease", "B-Chemical", "B-Chemical", "B-Chemical", "B-Disease", "I-Disease"}}};
    std::vector<Tags> pred{{"S-Disease", "S-Chemical", "O", "S-Chemical", "S-Disease", "O"}};
    auto r = unseen_entity_report(train, gold, pred);
    EXPECT_EQ(r.seen_entities, 3u);
    EXPECT_EQ(r.unseen_entities, 2u);
    EXPECT_EQ(r.seen_mentions, 3u);
    EXPECT_EQ(r.unseen_mentions, 2u);
    EXPECT_EQ(r.seen_correct, 2u);
    EXPECT_EQ(r.unseen_correct, 1u);
}

TEST(Unseen, DisjointVocabularyIsAllUnseen) {
    std::vector<RawSentence> train{{{"alpha"}, {"B-Disease"}}};
    std::vector<RawSentence> gold{{{"beta", "gamma"}, {"B-Disease", "B-Chemical"}}};
    std::vector<Tags> pred{{"O", "O"}};
    auto r = unseen_entity_report(train, gold, pred);
    EXPECT_EQ(r.seen_entities, 0u);
    EXPECT_EQ(r.unseen_entities, 2u);
}

namespace {

struct TinyTagger {
    std::vector<RawSentence> raw;
    Lexicon lexicon;
    TagDict tags;
    std::vector<Sentence> data;
    NerModel model;
};

TinyTagger tiny_tagger(HeadKind head) {
    std::vector<RawSentence> raw{{{"the", "kalomitis", "was", "treated"}, {"O", "B-Disease", "O", "O"}},
                                {{"ribanol", "and", "temura", "syndrome"}, {"B-Chemical", "O", "B-Disease", "I-Disease"}},
                                {{"no", "acute", "fosoma"}, {"O", "B-Disease", "I-Disease"}}};
    to_iobes(raw);
    Lexicon lex = Lexicon::build(raw);
    TagDict tags = TagDict::from_tags(raw);
    Architecture a;
    a.char_dim = 3;
    a.word_dim = 4;
    a.hidden = 3;
    a.max_filter_width = 2;
    a.filters_per_width = 2;
    a.max_filters = 2;
    Rng rng(21);
    Tensor words = bioner::testing::random_tensor({lex.words.size(), 4}, rng, 0.5);
    NerModel m = NerModel::init(NerSpec{a, tags, head, true}, lex, words, rng);
    // Larger emission weights make the random tagger emit some chunks.
    for (auto& v : m.decoder.W_d.data()) v *= 40.0;
    auto data = lex.encode(raw, &tags);
    return {raw, lex, tags, data, m};
}

}  // namespace

TEST(PrCurve, EndpointsAndMonotoneEnvelope) {
    auto t = tiny_tagger(HeadKind::Crf);
    std::vector<double> th;
    for (int i = 0; i <= 20; ++i) th.push_back(i / 20.0);
    th.push_back(1.0 + 1e-9);
    auto curve = pr_curve(t.model, t.data, th);
    ASSERT_EQ(curve.size(), th.size());
    auto full = evaluate(t.model, t.data);
    EXPECT_DOUBLE_EQ(curve.front().precision, full.precision());
    EXPECT_DOUBLE_EQ(curve.front().recall, full.recall());
    EXPECT_EQ(curve.back().recall, 0.0);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        EXPECT_LE(curve[i].recall, curve[i - 1].recall + 1e-12);
        EXPECT_GE(curve[i].interpolated_precision, curve[i - 1].interpolated_precision - 1e-12);
        EXPECT_GE(curve[i].interpolated_precision, curve[i].precision - 1e-12);
    }
}

TEST(PrCurve, ConfidencesAreProbabilities) {
    auto t = tiny_tagger(HeadKind::Crf);
    for (const auto& s : t.data) {
        for (const auto& sc : scored_chunks(t.model, s)) {
            EXPECT_GT(sc.confidence, 0.0);
            EXPECT_LE(sc.confidence, 1.0 + 1e-12);
        }
    }
}

TEST(PrCurve, SoftmaxHeadRejected) {
    auto t = tiny_tagger(HeadKind::Softmax);
    const std::vector<double> th{0.5};
    EXPECT_ANY_THROW(pr_curve(t.model, t.data, th));
}
