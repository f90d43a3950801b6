// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails. Pass criterion names as arguments to run a
// subset, e.g. `acceptance crf_oracle gradients`.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "bioner/bilm.hpp"
#include "bioner/eval.hpp"
#include "bioner/pipeline.hpp"
#include "bioner/synthetic.hpp"
#include "bioner/trainer.hpp"
#include "crf_oracle.hpp"
#include "test_util.hpp"

using namespace bioner;
using bioner::testing::gradcheck;
using bioner::testing::random_tensor;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Tensor> tensors(const NamedParams& named) {
    std::vector<Tensor> out;
    for (const auto& [n, t] : named) out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------

Outcome crf_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    double worst_ll = 0.0, worst_marg = 0.0;
    std::size_t viterbi_mismatch = 0;
    const std::size_t instances = 200;
    for (std::size_t k = 0; k < instances; ++k) {
        const std::size_t N = 1 + rng.index(5), T = 1 + rng.index(4);
        const bool boundary = k % 2 == 0;
        auto crf = testing::random_crf(T, boundary, rng);
        Tensor e = random_tensor({N, T}, rng, 2.0);
        // Every fourth instance uses small integers so that tied paths occur.
        if (k % 4 == 3) {
            std::vector<Tensor> parts{crf.transitions, e};
            if (boundary) parts.insert(parts.end(), {crf.start, crf.stop});
            for (auto& t : parts) {
                for (auto& v : t.data()) v = static_cast<double>(rng.index(3)) - 1.0;
            }
        }
        const auto bf = testing::enumerate(e, crf);
        std::vector<int> gold(N);
        for (auto& g : gold) g = static_cast<int>(rng.index(T));
        const double ll = crf_log_likelihood(e, gold, crf).item();
        worst_ll = std::max(worst_ll, std::abs(ll - (testing::oracle_score(e, gold, crf) - bf.log_z)));
        const Tensor m = crf_marginals(e, crf);
        for (std::size_t i = 0; i < N * T; ++i) worst_marg = std::max(worst_marg, std::abs(m[i] - bf.marginals[i]));
        if (viterbi(e, crf).tags != bf.best) ++viterbi_mismatch;
    }
    const double secs = seconds_since(t0);
    return {worst_ll <= 1e-6 && worst_marg <= 1e-6 && viterbi_mismatch == 0 && secs < 10.0,
            fmt::format("{} instances, max |dlogL| {:.2e}, max |dmarginal| {:.2e}, viterbi mismatches {}, {:.2f} s",
                        instances, worst_ll, worst_marg, viterbi_mismatch, secs)};
}

// ---------------------------------------------------------------------------

Architecture toy_arch() {
    Architecture a;
    a.char_dim = 3;
    a.word_dim = 4;
    a.hidden = 3;
    a.max_filter_width = 3;
    a.filters_per_width = 1;
    a.max_filters = 2;
    return a;
}

void randomise(const NamedParams& named, Rng& rng, double scale) {
    for (const auto& [name, t] : named) {
        Tensor h = t;
        for (auto& v : h.data()) v = rng.uniform(-scale, scale);
    }
}

Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, double>> results;

    // Toy tagger over three words long enough to fill the widest filter.
    std::vector<RawSentence> raw{{{"abcd", "efg", "hijk"}, {"S-Disease", "O", "S-Chemical"}}};
    Lexicon lex = Lexicon::build(raw);
    TagDict tags = TagDict::from_tags(raw);
    Rng rng(31);
    NerModel model = NerModel::init(NerSpec{toy_arch(), tags, HeadKind::Crf, true}, lex,
                                    random_tensor({lex.words.size(), 4}, rng), rng);
    randomise(model.parameters(), rng, 0.5);
    for (std::size_t c = 0; c < 3; ++c) model.encoder.char_emb[CharVocab::kPad * 3 + c] = 0.0;
    const Sentence sentence = lex.encode(raw[0], &tags);
    const Architecture& arch = model.arch();

    {
        NamedParams cnn;
        cnn.emplace_back("char_emb", model.encoder.char_emb);
        for (std::size_t w = 0; w < model.encoder.cnn.widest(); ++w) {
            cnn.emplace_back("w", model.encoder.cnn.weights[w]);
            cnn.emplace_back("b", model.encoder.cnn.biases[w]);
        }
        Tensor w = random_tensor({arch.char_feature_dim()}, rng, 1.0, false);
        const auto& row = sentence.char_ids[0];
        results.emplace_back("char-CNN", gradcheck([&] { return sum(mul(char_cnn(model.encoder, arch, row), w)); },
                                                   tensors(cnn)));
    }
    {
        LstmParams p = LstmParams::init(3, 4, rng);
        NamedParams named;
        p.collect(named, "l");
        randomise(named, rng, 1.0);
        auto params = tensors(named);
        Tensor x = random_tensor({4}, rng), h = random_tensor({3}, rng), c = random_tensor({3}, rng);
        params.insert(params.end(), {x, h, c});
        Tensor w = random_tensor({3}, rng, 1.0, false);
        results.emplace_back("LSTM step", gradcheck([&] {
                                 auto s = lstm_step(x, h, c, p);
                                 return sum(add(mul(s.h, w), mul(s.c, s.c)));
                             },
                                                    params));
    }
    {
        NamedParams enc;
        model.encoder.collect(enc);
        Tensor w = random_tensor({3, 2 * arch.hidden}, rng, 1.0, false);
        results.emplace_back("BiLSTM encode",
                             gradcheck([&] { return sum(mul(encode(model.encoder, arch, sentence).joint, w)); },
                                       tensors(enc)));
    }
    {
        auto dec = NerDecoderParams::init(5, 4, rng);
        Tensor h = random_tensor({4, 4}, rng);
        std::vector<int> gold{0, 4, 2, 2};
        results.emplace_back("softmax CE",
                             gradcheck([&] { return word_nll(logits(h, dec), gold); }, {dec.W_d, dec.b, h}));
    }
    {
        auto crf = testing::random_crf(4, true, rng);
        Tensor e = random_tensor({5, 4}, rng, 2.0);
        std::vector<int> gold{1, 3, 3, 0, 2};
        NamedParams named;
        crf.collect(named);
        auto params = tensors(named);
        params.push_back(e);
        results.emplace_back("CRF NLL (emissions, transitions)",
                             gradcheck([&] { return scale(crf_log_likelihood(e, gold, crf), -1.0); }, params));
    }
    results.emplace_back("CRF NLL (all parameters, 3-token toy)",
                         gradcheck([&] { return model.loss(sentence); }, tensors(model.parameters())));

    const double secs = seconds_since(t0);
    double worst = 0.0;
    std::string detail;
    for (const auto& [name, err] : results) {
        worst = std::max(worst, err);
        detail += fmt::format("{} {:.1e}; ", name, err);
    }
    return {worst < 1e-4 && secs < 60.0, detail + fmt::format("{:.2f} s", secs)};
}

// ---------------------------------------------------------------------------

Outcome tagging_round_trip() {
    Rng rng(99);
    const std::vector<std::string> types{"Disease", "Chemical", "Gene"};
    const std::size_t sequences = 2000;
    std::size_t failures = 0, chunks_seen = 0;
    for (std::size_t k = 0; k < sequences; ++k) {
        const std::size_t n = 1 + rng.index(15);
        std::vector<std::string> bio;
        std::vector<Chunk> truth;
        while (bio.size() < n) {
            if (rng.uniform() < 0.4) {
                bio.push_back("O");
                continue;
            }
            const std::string& type = types[rng.index(types.size())];
            const std::size_t len = std::min(n - bio.size(), 1 + rng.index(4));
            truth.push_back({bio.size(), bio.size() + len - 1, type});
            for (std::size_t i = 0; i < len; ++i) bio.push_back((i == 0 ? "B-" : "I-") + type);
        }
        chunks_seen += truth.size();
        const auto iobes = bio_to_iobes(bio, BioMode::Strict);
        std::vector<std::size_t> repaired;
        if (extract_chunks(iobes.tags, &repaired) != truth || !repaired.empty() || !iobes.repaired.empty() ||
            chunks_any_scheme(bio) != truth) {
            ++failures;
        }
    }
    return {failures == 0, fmt::format("{} sequences, {} chunks, {} failures", sequences, chunks_seen, failures)};
}

// ---------------------------------------------------------------------------

Outcome architecture_conformance() {
    const Architecture a;
    std::vector<std::size_t> counts;
    for (std::size_t w = 1; w <= a.max_filter_width; ++w) counts.push_back(a.filters(w));
    const std::vector<std::size_t> expected{50, 100, 150, 200, 200, 200, 200};

    std::vector<RawSentence> raw{{{"ribanol", "treats", "kalomitis"}, {"S-Chemical", "O", "S-Disease"}}};
    Lexicon lex = Lexicon::build(raw);
    TagDict tags = TagDict::from_tags(raw);
    Rng rng(1);
    NerModel ner = NerModel::init(NerSpec{a, tags}, lex, random_tensor({lex.words.size(), a.word_dim}, rng), rng);
    BiLm lm = BiLm::init(a, lex, random_tensor({lex.words.size(), a.word_dim}, rng), rng);
    const Shape ner_shape = ner.decoder.W_d.shape(), lm_shape = lm.decoder.W.shape();
    const Sentence s = lex.encode(raw[0]);
    const Shape joint = encode(ner.encoder, ner.arch(), s).joint.shape();

    const bool ok = counts == expected && a.char_feature_dim() == 1100 &&
                    ner_shape == Shape{tags.size(), 512} && lm_shape == Shape{lex.words.size(), 256} &&
                    joint == Shape{3, 512};
    return {ok, fmt::format("filters {}, char features {}, NER decoder {}, LM decoder {}, encoder output {}",
                            fmt::join(counts, ","), a.char_feature_dim(), shape_str(ner_shape), shape_str(lm_shape),
                            shape_str(joint))};
}

// ---------------------------------------------------------------------------
// Synthetic desk-scale data shared by the remaining criteria.

struct Desk {
    RunConfig config = desk_config();
    std::vector<RawSentence> train_raw, dev_raw, test_raw;
    Lexicon lexicon;
    TagDict tags;
    std::vector<Sentence> unlabeled, train, dev, test;
    std::size_t corpus_vocabulary = 0;  // distinct tokens over all three splits
};

const Desk& desk() {
    static const Desk d = [] {
        Desk d;
        const SyntheticCorpus corpus = generate_synthetic();
        d.train_raw = corpus.train;
        d.dev_raw = corpus.dev;
        d.test_raw = corpus.test;
        to_iobes(d.train_raw);
        to_iobes(d.dev_raw);
        to_iobes(d.test_raw);
        std::vector<RawSentence> text = d.train_raw;
        text.insert(text.end(), d.dev_raw.begin(), d.dev_raw.end());
        d.tags = TagDict::from_tags(text);
        for (auto& s : text) s.tags.clear();
        d.lexicon = Lexicon::build(text);
        d.unlabeled = d.lexicon.encode(text);
        d.train = d.lexicon.encode(d.train_raw, &d.tags);
        d.dev = d.lexicon.encode(d.dev_raw, &d.tags);
        d.test = d.lexicon.encode(d.test_raw, &d.tags);
        std::set<std::string> types;
        for (const auto* split : {&d.train_raw, &d.dev_raw, &d.test_raw}) {
            for (const auto& s : *split) types.insert(s.tokens.begin(), s.tokens.end());
        }
        d.corpus_vocabulary = types.size();
        return d;
    }();
    return d;
}

Tensor desk_words(std::uint64_t seed) {
    const Desk& d = desk();
    return initial_word_table(d.lexicon, d.config.arch.word_dim, std::nullopt, d.config.random_embedding_range, seed);
}

Checkpoint pretrain(std::uint64_t seed, std::size_t epochs) {
    const Desk& d = desk();
    BiLm lm = build_bilm(d.config.arch, d.lexicon, desk_words(seed), seed);
    BiLmConfig c = d.config.lm;
    c.seed = seed;
    c.epochs = epochs;
    return train_bilm(lm, d.unlabeled, c).best;
}

NerModel desk_model(PretrainMode mode, const Checkpoint* lm, std::uint64_t seed) {
    const Desk& d = desk();
    return build_ner_model(NerSpec{d.config.arch, d.tags}, d.lexicon, desk_words(seed), lm, mode, seed);
}

Outcome transfer_fidelity() {
    const Desk& d = desk();
    Checkpoint ck = pretrain(1, 1);
    NerModel ner = desk_model(PretrainMode::BiLM, &ck, 1);
    const BiLm lm = BiLm::from_checkpoint(ck);
    std::size_t differing = 0, compared = 0;
    for (std::size_t i = 0; i < 32; ++i) {
        const Tensor a = encode(ner.encoder, ner.arch(), d.dev[i]).joint;
        const Tensor b = encode(lm.encoder, lm.arch, d.dev[i]).joint;
        compared += a.size();
        if (a.shape() != b.shape() || std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) != 0) {
            ++differing;
        }
    }

    std::size_t lm_names = 0;
    for (const auto& [name, t] : ner.parameters()) lm_names += name.find("lm_decoder") != std::string::npos;
    lm_names += ner.to_checkpoint().names_with_prefix("lm_decoder").size();

    // Poisoning the language-model decoder must leave the transferred model unchanged.
    Checkpoint poisoned = ck;
    const auto& w = ck.entry("lm_decoder.weight");
    poisoned.put("lm_decoder.weight", Tensor(w.shape, std::vector<double>(w.values.size(), std::nan(""))));
    NerModel clean = desk_model(PretrainMode::BiLM, &ck, 1);
    NerModel from_poisoned = desk_model(PretrainMode::BiLM, &poisoned, 1);
    bool same = true;
    const auto pa = clean.parameters(), pb = from_poisoned.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const auto va = pa[i].second.data(), vb = pb[i].second.data();
        same = same && std::equal(va.begin(), va.end(), vb.begin(), vb.end());
    }

    return {differing == 0 && lm_names == 0 && same,
            fmt::format("32 sentences, {} activations, {} sentences differ; lm_decoder names in model {}; "
                        "poisoned lm_decoder leaves model {}",
                        compared, differing, lm_names, same ? "unchanged" : "CHANGED")};
}

// ---------------------------------------------------------------------------

Outcome lm_sanity() {
    const Desk& d = desk();
    BiLm uniform = build_bilm(d.config.arch, d.lexicon, desk_words(1), 1);
    for (auto& v : uniform.decoder.W.data()) v = 0.0;
    for (auto& v : uniform.decoder.b.data()) v = 0.0;
    const double V = static_cast<double>(d.lexicon.words.size());
    const Perplexity pu = perplexity(uniform, d.unlabeled);
    const bool uniform_ok = std::abs(pu.forward - V) <= 1e-3 * V && std::abs(pu.backward - V) <= 1e-3 * V;

    // Memorisation: ten training sentences, scored on themselves.
    std::vector<RawSentence> ten(d.train_raw.begin(), d.train_raw.begin() + 10);
    for (auto& s : ten) s.tags.clear();
    const Lexicon lex = Lexicon::build(ten);
    const auto corpus = lex.encode(ten);
    BiLm lm = build_bilm(d.config.arch, lex,
                         initial_word_table(lex, d.config.arch.word_dim, std::nullopt, d.config.random_embedding_range, 7),
                         7);
    BiLmConfig c = d.config.lm;
    c.epochs = 20;
    c.word_budget = 20;
    c.adam.lr = 0.03;
    c.dropout = 0.0;
    c.seed = 7;
    const auto result = train_bilm(lm, corpus, c);
    std::optional<std::size_t> reached;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : result.history) {
        const double worst_direction = std::max(r.heldout.forward, r.heldout.backward);
        best = std::min(best, worst_direction);
        if (!reached && worst_direction < 1.5) reached = r.epoch;
    }
    return {uniform_ok && reached.has_value() && result.heldout_sentences == 0,
            fmt::format("uniform ppl fwd {:.4f} bwd {:.4f} (V = {}); memorisation: {} tokens, best max(fwd, bwd) ppl "
                        "{:.3f}, below 1.5 at epoch {}",
                        pu.forward, pu.backward, V, [&] {
                            std::size_t n = 0;
                            for (const auto& s : corpus) n += s.size();
                            return n;
                        }(),
                        best, reached ? std::to_string(*reached) : "never")};
}

// ---------------------------------------------------------------------------
// Desk convergence and learning curves share their per-seed runs.

constexpr double kThreshold = 0.90;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};
const std::vector<double> kFractions{0.25, 0.5, 1.0};

struct NerRun {
    std::vector<NerEpochRecord> history;
    double test_f1 = 0.0;
};

const Checkpoint& pretrained(std::uint64_t seed) {
    static std::map<std::uint64_t, Checkpoint> cache;
    auto it = cache.find(seed);
    if (it == cache.end()) {
        const auto t0 = std::chrono::steady_clock::now();
        it = cache.emplace(seed, pretrain(seed, desk().config.lm.epochs)).first;
        std::cerr << fmt::format("  pretrained BiLM seed {} in {:.1f} s\n", seed, seconds_since(t0));
    }
    return it->second;
}

NerRun train_desk(PretrainMode mode, std::uint64_t seed, std::span<const Sentence> train) {
    const Desk& d = desk();
    const Checkpoint* lm = mode == PretrainMode::None ? nullptr : &pretrained(seed);
    const auto t0 = std::chrono::steady_clock::now();
    NerModel model = desk_model(mode, lm, seed);
    TrainConfig c = d.config.train;
    c.seed = seed;
    const auto result = train_ner(model, train, d.dev, c);
    NerRun run{result.history, evaluate(NerModel::from_checkpoint(result.best), d.test).f1()};
    std::cerr << fmt::format("  {:<4} seed {} on {:>3} sentences: {:>2} epochs, best dev F1 {:.4f}, test F1 {:.4f}, "
                             "{:.1f} s\n",
                             to_string(mode), seed, train.size(), run.history.size(), result.best_f1, run.test_f1,
                             seconds_since(t0));
    return run;
}

const NerRun& desk_run(PretrainMode mode, std::uint64_t seed, double fraction) {
    static std::map<std::tuple<PretrainMode, std::uint64_t, double>, NerRun> cache;
    const auto key = std::make_tuple(mode, seed, fraction);
    auto it = cache.find(key);
    if (it == cache.end()) {
        const Desk& d = desk();
        std::vector<Sentence> subset;
        for (auto i : subsample(d.train.size(), fraction, seed)) subset.push_back(d.train[i]);
        it = cache.emplace(key, train_desk(mode, seed, subset)).first;
    }
    return it->second;
}

Outcome desk_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    const Desk& d = desk();
    double epochs_bilm = 0.0, epochs_none = 0.0, f1_bilm = 0.0, f1_none = 0.0;
    std::size_t missed = 0;
    const double n = static_cast<double>(kSeeds.size());
    for (auto seed : kSeeds) {
        for (auto mode : {PretrainMode::BiLM, PretrainMode::None}) {
            const NerRun& r = desk_run(mode, seed, 1.0);
            const auto reached = epochs_to_reach(r.history, kThreshold);
            // A run that never reaches the threshold counts one epoch past its budget.
            const double epochs = reached ? static_cast<double>(*reached) : (++missed, d.config.train.epochs + 1.0);
            (mode == PretrainMode::BiLM ? epochs_bilm : epochs_none) += epochs / n;
            (mode == PretrainMode::BiLM ? f1_bilm : f1_none) += r.test_f1 / n;
        }
    }
    const double secs = seconds_since(t0);
    return {epochs_bilm < epochs_none && f1_bilm >= f1_none,
            fmt::format("corpus {} / {} / {} sentences, {} distinct tokens ({} in the model vocabulary); mean epochs to dev F1 {:.2f}: bilm {:.2f}, "
                        "none {:.2f} ({} runs missed); mean test F1 bilm {:.4f}, none {:.4f}; {:.0f} s",
                        d.train.size(), d.dev.size(), d.test.size(), d.corpus_vocabulary, d.lexicon.words.size(), kThreshold, epochs_bilm,
                        epochs_none, missed, f1_bilm, f1_none, secs)};
}

Outcome learning_curve_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    std::map<PretrainMode, std::vector<double>> mean;
    for (auto mode : {PretrainMode::BiLM, PretrainMode::None}) {
        for (double f : kFractions) {
            double total = 0.0;
            for (auto seed : kSeeds) total += desk_run(mode, seed, f).test_f1;
            mean[mode].push_back(total / static_cast<double>(kSeeds.size()));
        }
    }
    bool ok = true;
    std::string detail;
    for (auto mode : {PretrainMode::BiLM, PretrainMode::None}) {
        const auto& m = mean[mode];
        for (std::size_t i = 1; i < m.size(); ++i) ok = ok && m[i] >= m[i - 1] - 0.02;
        detail += fmt::format("{} F1 {:.4f}; ", to_string(mode), fmt::join(m, " / "));
    }
    for (std::size_t i = 0; i < kFractions.size(); ++i) ok = ok && mean[PretrainMode::BiLM][i] >= mean[PretrainMode::None][i];
    return {ok, fmt::format("fractions {}: {}{:.0f} s", fmt::join(kFractions, " / "), detail, seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"crf_oracle", crf_oracle},
        {"gradients", gradients},
        {"tagging_round_trip", tagging_round_trip},
        {"architecture_conformance", architecture_conformance},
        {"transfer_fidelity", transfer_fidelity},
        {"lm_sanity", lm_sanity},
        {"desk_convergence", desk_convergence},
        {"learning_curve", learning_curve_trend},
    };
    std::vector<std::string> wanted(argv + 1, argv + argc);
    std::size_t failed = 0, ran = 0;
    for (const auto& [name, check] : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
        ++ran;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed", ran - failed, ran) << std::endl;
    return failed == 0 ? 0 : 1;
}
