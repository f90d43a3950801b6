#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "bioner/corpus.hpp"
#include "bioner/ner_model.hpp"

namespace bioner {

struct Chunk {
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive
    std::string type;

    auto operator<=>(const Chunk&) const = default;
};

// Chunks of an IOBES sequence. Malformed input is repaired rather than
// rejected: an I- or E- tag that does not continue an open chunk of the same
// type starts a new chunk, and a chunk left open by B-/I- is closed at its last
// token. Positions that needed a repair are appended to `repaired`.
std::vector<Chunk> extract_chunks(std::span<const std::string> iobes, std::vector<std::size_t>* repaired = nullptr);

// Accepts BIO or IOBES: sequences without any E-/S- tag are read as BIO.
std::vector<Chunk> chunks_any_scheme(std::span<const std::string> tags);

struct PrfCounts {
    std::size_t gold = 0;
    std::size_t predicted = 0;
    std::size_t correct = 0;

    double precision() const;  // 0 when nothing was predicted
    double recall() const;     // 0 when there is nothing to find
    double f1() const;
};

struct EvalReport {
    PrfCounts overall;
    std::map<std::string, PrfCounts> per_type;

    double precision() const { return overall.precision(); }
    double recall() const { return overall.recall(); }
    double f1() const { return overall.f1(); }

    nlohmann::json to_json() const;
    std::string to_table() const;
};

// Micro-averaged exact-match scores over (start, end, type) chunks. Both sides
// must hold the same number of sentences; the tag overload also requires equal
// sentence lengths. Mismatches raise DataError naming the sentence index.
EvalReport exact_match_prf(std::span<const std::vector<Chunk>> gold, std::span<const std::vector<Chunk>> pred);
EvalReport exact_match_prf(std::span<const std::vector<std::string>> gold_tags,
                           std::span<const std::vector<std::string>> pred_tags);

// Scores a model on labeled sentences.
EvalReport evaluate(const NerModel& model, std::span<const Sentence> data);

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double interpolated_precision = 0.0;  // max precision over points with recall >= this recall
};

// Each Viterbi chunk is scored by the geometric mean of the posterior
// marginals of its tags; chunks below a threshold are dropped before scoring.
// Requires a CRF-head model.
std::vector<PrPoint> pr_curve(const NerModel& model, std::span<const Sentence> data, std::span<const double> thresholds);

struct ScoredChunk {
    Chunk chunk;
    double confidence = 0.0;
};
std::vector<ScoredChunk> scored_chunks(const NerModel& model, const Sentence& sentence);

struct CurvePoint {
    double fraction = 0.0;
    std::size_t sentences = 0;
    double f1 = 0.0;
};

// Seeded subsample of round(fraction * n) sentences (at least one), kept in
// corpus order; fraction 1 returns every index in order.
std::vector<std::size_t> subsample(std::size_t n, double fraction, std::uint64_t seed);

// Runs `train_and_score` on a subsample per fraction; fractions must lie in (0, 1].
using Pipeline = std::function<double(std::span<const Sentence> train, std::uint64_t seed)>;
std::vector<CurvePoint> learning_curve(const Pipeline& train_and_score, std::span<const Sentence> train,
                                       std::span<const double> fractions, std::uint64_t seed);

struct UnseenReport {
    std::size_t seen_entities = 0;    // unique gold test surface strings found among training mentions
    std::size_t unseen_entities = 0;
    std::size_t seen_mentions = 0;
    std::size_t unseen_mentions = 0;
    std::size_t seen_correct = 0;     // gold mentions predicted exactly
    std::size_t unseen_correct = 0;

    nlohmann::json to_json() const;
};

// Surface strings are the chunk's tokens joined by single spaces. Tags may be
// BIO or IOBES.
UnseenReport unseen_entity_report(std::span<const RawSentence> train, std::span<const RawSentence> test_gold,
                                  std::span<const std::vector<std::string>> test_pred);

}  // namespace bioner
