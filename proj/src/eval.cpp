#include "bioner/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "bioner/errors.hpp"

namespace bioner {

std::vector<Chunk> extract_chunks(std::span<const std::string> iobes, std::vector<std::size_t>* repaired) {
    std::vector<Chunk> out;
    bool open = false;
    Chunk cur;
    auto note = [&](std::size_t i) {
        if (repaired) repaired->push_back(i);
    };
    auto close_open = [&](std::size_t last) {
        if (!open) return;
        cur.end = last;
        out.push_back(cur);
        open = false;
    };
    for (std::size_t i = 0; i < iobes.size(); ++i) {
        const auto parsed = split_tag(iobes[i]);
        if (!parsed) {
            if (iobes[i] != "O") note(i);
            if (open) {
                note(i);
                close_open(i - 1);
            }
            continue;
        }
        const auto& [prefix, type] = *parsed;
        const bool continues = open && cur.type == type && (prefix == 'I' || prefix == 'E');
        if (!continues) {
            if (open) {
                note(i);
                close_open(i - 1);
            }
            if (prefix == 'I' || prefix == 'E') note(i);
            cur = Chunk{i, i, type};
            open = true;
        }
        if (prefix == 'E' || prefix == 'S') close_open(i);
    }
    if (open) {
        note(iobes.size() - 1);
        close_open(iobes.size() - 1);
    }
    return out;
}

std::vector<Chunk> chunks_any_scheme(std::span<const std::string> tags) {
    const bool iobes = std::any_of(tags.begin(), tags.end(), [](const std::string& t) {
        return t.size() > 1 && (t[0] == 'E' || t[0] == 'S') && t[1] == '-';
    });
    if (iobes) return extract_chunks(tags);
    return extract_chunks(bio_to_iobes(tags, BioMode::Lenient).tags);
}

double PrfCounts::precision() const {
    return predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
}

double PrfCounts::recall() const { return gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0; }

double PrfCounts::f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

nlohmann::json EvalReport::to_json() const {
    auto counts = [](const PrfCounts& c) {
        return nlohmann::json{{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()},
                              {"gold", c.gold},             {"predicted", c.predicted}, {"correct", c.correct}};
    };
    nlohmann::json j = counts(overall);
    j["per_type"] = nlohmann::json::object();
    for (const auto& [type, c] : per_type) j["per_type"][type] = counts(c);
    return j;
}

std::string EvalReport::to_table() const {
    std::string out = fmt::format("{:<16} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7}\n", "type", "precision", "recall", "f1",
                                  "gold", "pred", "correct");
    auto row = [&](const std::string& name, const PrfCounts& c) {
        out += fmt::format("{:<16} {:>9.4f} {:>9.4f} {:>9.4f} {:>7} {:>7} {:>7}\n", name, c.precision(), c.recall(),
                           c.f1(), c.gold, c.predicted, c.correct);
    };
    for (const auto& [type, c] : per_type) row(type, c);
    row("overall", overall);
    return out;
}

EvalReport exact_match_prf(std::span<const std::vector<Chunk>> gold, std::span<const std::vector<Chunk>> pred) {
    if (gold.size() != pred.size()) {
        throw DataError(fmt::format("gold has {} sentences but prediction has {}", gold.size(), pred.size()));
    }
    EvalReport r;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        const std::set<Chunk> g(gold[s].begin(), gold[s].end());
        const std::set<Chunk> p(pred[s].begin(), pred[s].end());
        for (const auto& c : g) {
            ++r.overall.gold;
            ++r.per_type[c.type].gold;
        }
        for (const auto& c : p) {
            ++r.overall.predicted;
            ++r.per_type[c.type].predicted;
            if (g.count(c)) {
                ++r.overall.correct;
                ++r.per_type[c.type].correct;
            }
        }
    }
    return r;
}

EvalReport exact_match_prf(std::span<const std::vector<std::string>> gold_tags,
                           std::span<const std::vector<std::string>> pred_tags) {
    if (gold_tags.size() != pred_tags.size()) {
        throw DataError(fmt::format("gold has {} sentences but prediction has {}", gold_tags.size(), pred_tags.size()));
    }
    std::vector<std::vector<Chunk>> g, p;
    for (std::size_t s = 0; s < gold_tags.size(); ++s) {
        if (gold_tags[s].size() != pred_tags[s].size()) {
            throw DataError(fmt::format("sentence {}: gold has {} tokens but prediction has {}", s, gold_tags[s].size(),
                                        pred_tags[s].size()));
        }
        g.push_back(chunks_any_scheme(gold_tags[s]));
        p.push_back(chunks_any_scheme(pred_tags[s]));
    }
    return exact_match_prf(g, p);
}

namespace {

std::vector<Chunk> gold_chunks(const TagDict& tags, const Sentence& s) {
    std::vector<std::string> names;
    for (int id : s.tag_ids) names.push_back(tags.tag(id));
    return extract_chunks(names);
}

}  // namespace

EvalReport evaluate(const NerModel& model, std::span<const Sentence> data) {
    std::vector<std::vector<Chunk>> gold, pred;
    for (const auto& s : data) {
        gold.push_back(gold_chunks(model.tags(), s));
        pred.push_back(extract_chunks(model.predict_tags(s)));
    }
    return exact_match_prf(gold, pred);
}

std::vector<ScoredChunk> scored_chunks(const NerModel& model, const Sentence& sentence) {
    if (model.spec.head != HeadKind::Crf) throw ContractViolation("chunk confidences need a CRF head");
    const Tensor e = model.emissions(sentence);
    const auto path = viterbi(e, model.crf).tags;
    const Tensor marg = crf_marginals(e, model.crf);
    std::vector<std::string> names;
    for (int id : path) names.push_back(model.tags().tag(id));
    std::vector<ScoredChunk> out;
    for (const auto& c : extract_chunks(names)) {
        double log_sum = 0.0;
        for (std::size_t t = c.start; t <= c.end; ++t) log_sum += std::log(marg.at(t, static_cast<std::size_t>(path[t])));
        out.push_back({c, std::exp(log_sum / static_cast<double>(c.end - c.start + 1))});
    }
    return out;
}

std::vector<PrPoint> pr_curve(const NerModel& model, std::span<const Sentence> data, std::span<const double> thresholds) {
    std::vector<std::vector<Chunk>> gold;
    std::vector<std::vector<ScoredChunk>> scored;
    for (const auto& s : data) {
        gold.push_back(gold_chunks(model.tags(), s));
        scored.push_back(scored_chunks(model, s));
    }
    std::vector<PrPoint> points;
    for (double th : thresholds) {
        std::vector<std::vector<Chunk>> kept;
        for (const auto& sent : scored) {
            auto& k = kept.emplace_back();
            for (const auto& sc : sent) {
                if (sc.confidence >= th) k.push_back(sc.chunk);
            }
        }
        const auto r = exact_match_prf(gold, kept);
        points.push_back({th, r.precision(), r.recall(), 0.0});
    }
    for (auto& p : points) {
        p.interpolated_precision = 0.0;
        for (const auto& q : points) {
            if (q.recall >= p.recall) p.interpolated_precision = std::max(p.interpolated_precision, q.precision);
        }
    }
    return points;
}

std::vector<std::size_t> subsample(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError(fmt::format("fraction must lie in (0, 1], got {}", fraction));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (fraction == 1.0) return idx;
    Rng rng(seed);
    rng.shuffle(idx);
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    idx.resize(std::min(k, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<CurvePoint> learning_curve(const Pipeline& train_and_score, std::span<const Sentence> train,
                                       std::span<const double> fractions, std::uint64_t seed) {
    for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError(fmt::format("fraction must lie in (0, 1], got {}", f));
    }
    std::vector<CurvePoint> out;
    for (double f : fractions) {
        std::vector<Sentence> subset;
        for (auto i : subsample(train.size(), f, seed)) subset.push_back(train[i]);
        out.push_back({f, subset.size(), train_and_score(subset, seed)});
    }
    return out;
}

nlohmann::json UnseenReport::to_json() const {
    return {{"seen_entities", seen_entities},   {"unseen_entities", unseen_entities}, {"seen_mentions", seen_mentions},
            {"unseen_mentions", unseen_mentions}, {"seen_correct", seen_correct},       {"unseen_correct", unseen_correct}};
}

namespace {

std::string surface(const RawSentence& s, const Chunk& c) {
    std::string out;
    for (std::size_t t = c.start; t <= c.end; ++t) {
        if (t > c.start) out += ' ';
        out += s.tokens[t];
    }
    return out;
}

}  // namespace

UnseenReport unseen_entity_report(std::span<const RawSentence> train, std::span<const RawSentence> test_gold,
                                  std::span<const std::vector<std::string>> test_pred) {
    if (test_gold.size() != test_pred.size()) throw DataError("unseen_entity_report: prediction count mismatch");
    std::set<std::string> known;
    for (const auto& s : train) {
        for (const auto& c : chunks_any_scheme(s.tags)) known.insert(surface(s, c));
    }
    UnseenReport r;
    std::set<std::string> seen_strings, unseen_strings;
    for (std::size_t i = 0; i < test_gold.size(); ++i) {
        const auto& s = test_gold[i];
        const auto pred = chunks_any_scheme(test_pred[i]);
        const std::set<Chunk> predicted(pred.begin(), pred.end());
        for (const auto& c : chunks_any_scheme(s.tags)) {
            const std::string text = surface(s, c);
            const bool seen = known.count(text) != 0;
            const bool hit = predicted.count(c) != 0;
            (seen ? seen_strings : unseen_strings).insert(text);
            (seen ? r.seen_mentions : r.unseen_mentions) += 1;
            if (hit) (seen ? r.seen_correct : r.unseen_correct) += 1;
        }
    }
    r.seen_entities = seen_strings.size();
    r.unseen_entities = unseen_strings.size();
    return r;
}

}  // namespace bioner
