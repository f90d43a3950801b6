#pragma once

/**
 * Template-based toy corpus for desk-scale experiments.
 *
 * Sentences come from a fixed set of clinical-sounding templates whose slots
 * are filled with invented words. Two entity types are produced:
 *   Disease   e.g. "kalomitis", "temura syndrome", "acute fosoma"
 *   Chemical  e.g. "ribanol", "5-nekazole", "tupomycin"
 * Slot fillers follow a Zipf distribution, so rare names in the test split are
 * often unseen in training. A handful of ordinary nouns share entity suffixes
 * (a noun like "delamine" is not a chemical), which only context resolves.
 *
 * Everything is a deterministic function of SyntheticOptions; the default
 * seed is the published protocol used by the acceptance suite.
 */

#include <cstdint>
#include <vector>

#include "bioner/corpus.hpp"

namespace bioner {

struct SyntheticOptions {
    std::size_t sentences = 800;
    double train_fraction = 0.6;
    double dev_fraction = 0.2;  // the rest is test
    std::size_t diseases = 300;
    std::size_t chemicals = 300;
    std::size_t nouns = 500;
    std::size_t verbs = 200;
    std::size_t adjectives = 200;
    double zipf_exponent = 0.8;
    std::uint64_t seed = 20240917;
};

struct SyntheticCorpus {
    std::vector<RawSentence> train;  // BIO tags
    std::vector<RawSentence> dev;
    std::vector<RawSentence> test;
};

SyntheticCorpus generate_synthetic(const SyntheticOptions& options = {});

}  // namespace bioner
