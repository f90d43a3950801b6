#include "bioner/lexicon.hpp"

#include "bioner/errors.hpp"

namespace bioner {

Lexicon Lexicon::build(std::span<const RawSentence> raw, const TextOptions& text) {
    Lexicon lex;
    lex.text = text;
    extend_vocabs(raw, lex.words, lex.chars, text);
    return lex;
}

Sentence Lexicon::encode(const RawSentence& raw, const TagDict* tags) const {
    return encode_sentence(raw, words, chars, tags, text);
}

std::vector<Sentence> Lexicon::encode(std::span<const RawSentence> raw, const TagDict* tags) const {
    return encode_corpus(raw, words, chars, tags, text);
}

nlohmann::json Lexicon::to_json() const {
    return {{"words", words.words()},
            {"chars", chars.chars()},
            {"num_to_chars", text.num_to_chars},
            {"number_pattern", text.number_pattern}};
}

Lexicon Lexicon::from_json(const nlohmann::json& j) {
    try {
        Lexicon lex;
        std::string joined;
        for (const auto& w : j.at("words")) joined += w.get<std::string>() + "\n";
        if (!joined.empty()) joined.pop_back();
        lex.words = Vocab::from_text(joined);
        lex.chars = CharVocab::from_list(j.at("chars").get<std::vector<std::string>>());
        lex.text.num_to_chars = j.at("num_to_chars").get<bool>();
        lex.text.number_pattern = j.at("number_pattern").get<std::string>();
        return lex;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed lexicon metadata: ") + e.what());
    }
}

nlohmann::json tags_to_json(const TagDict& tags) { return tags.entity_types(); }

TagDict tags_from_json(const nlohmann::json& j) {
    try {
        return TagDict(j.get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed tag metadata: ") + e.what());
    }
}

}  // namespace bioner
