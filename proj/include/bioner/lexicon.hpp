#pragma once

#include <span>
#include <vector>

#include "json.hpp"

#include "bioner/corpus.hpp"

namespace bioner {

// Word and character vocabularies plus the text options used to build them.
// Travels with every checkpoint so that a model reads text exactly the way it
// was trained on.
struct Lexicon {
    Vocab words;
    CharVocab chars;
    TextOptions text;

    static Lexicon build(std::span<const RawSentence> raw, const TextOptions& text = {});

    Sentence encode(const RawSentence& raw, const TagDict* tags = nullptr) const;
    std::vector<Sentence> encode(std::span<const RawSentence> raw, const TagDict* tags = nullptr) const;

    nlohmann::json to_json() const;
    static Lexicon from_json(const nlohmann::json& j);
};

nlohmann::json tags_to_json(const TagDict& tags);
TagDict tags_from_json(const nlohmann::json& j);

}  // namespace bioner
