#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bioner/rng.hpp"

namespace bioner {

// A sentence as read from disk: surface tokens plus (for labeled data) raw tag strings.
struct RawSentence {
    std::vector<std::string> tokens;
    std::vector<std::string> tags;  // empty for unlabeled text
};

enum class ParseMode { Labeled, Unlabeled };

// Parses `token<TAB or space>tag` lines with blank-line sentence breaks.
// Lines starting with '#' or "-DOCSTART-" are skipped. In labeled mode a line
// without a tag is a ParseError carrying the 1-based line number. Extra middle
// columns are ignored: the first field is the token and the last is the tag.
std::vector<RawSentence> parse_conll(std::string_view text, ParseMode mode = ParseMode::Labeled);
std::vector<RawSentence> read_conll(const std::filesystem::path& path, ParseMode mode = ParseMode::Labeled);
std::string format_conll(std::span<const RawSentence> sentences);

// ---------------------------------------------------------------------------
// Token normalisation

inline constexpr std::string_view kNumToken = "<NUM>";

class NumberMatcher {
public:
    static constexpr std::string_view kDefaultPattern = "[0-9]([0-9.,+\\-]*[0-9])?";

    explicit NumberMatcher(std::string pattern = std::string(kDefaultPattern));
    bool matches(std::string_view token) const;
    const std::string& pattern() const { return pattern_; }

private:
    std::string pattern_;
    std::regex re_;
};

// Digit-only tokens (optionally with internal . , - +) become kNumToken;
// everything else is returned unchanged, case included.
std::string normalize_token(std::string_view token);
std::string normalize_token(std::string_view token, const NumberMatcher& matcher);

// Splits a UTF-8 string into code points (each returned as its byte sequence).
std::vector<std::string> utf8_chars(std::string_view s);

// ---------------------------------------------------------------------------
// Tagging schemes

enum class BioMode { Strict, Lenient };

struct IobesConversion {
    std::vector<std::string> tags;
    std::vector<std::size_t> repaired;  // positions where an orphan I- was read as B-
};

IobesConversion bio_to_iobes(std::span<const std::string> tags, BioMode mode = BioMode::Strict);

// Splits "B-Disease" into ('B', "Disease"). Returns nullopt for "O" or anything unparseable.
std::optional<std::pair<char, std::string>> split_tag(std::string_view tag);

// ---------------------------------------------------------------------------
// Vocabularies

class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kNum = 2;
    static constexpr int kBos = 3;
    static constexpr int kEos = 4;
    static const std::vector<std::string>& reserved();

    Vocab();

    int add(const std::string& word);
    int id(const std::string& word) const;  // kUnk when absent
    bool contains(const std::string& word) const { return index_.count(word) != 0; }
    const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }

    // One token per line, reserved sentinels first.
    std::string to_text() const;
    static Vocab from_text(std::string_view text);

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
};

class CharVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    CharVocab();
    int add(const std::string& ch);
    int id(const std::string& ch) const;
    std::size_t size() const { return chars_.size(); }
    const std::vector<std::string>& chars() const { return chars_; }
    static CharVocab from_list(const std::vector<std::string>& chars);

private:
    std::vector<std::string> chars_;
    std::unordered_map<std::string, int> index_;
};

// Tag ids over IOBES labels. "O" is always id 0; each entity type contributes
// B-, I-, E-, S- in that order; types are sorted by name.
class TagDict {
public:
    TagDict() = default;
    explicit TagDict(std::vector<std::string> entity_types);

    // Collects entity types from IOBES (or BIO) tag strings.
    static TagDict from_tags(std::span<const RawSentence> sentences);

    int id(const std::string& tag) const;  // throws DataError on unknown tags
    const std::string& tag(int id) const { return tags_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return tags_.size(); }
    const std::vector<std::string>& tags() const { return tags_; }
    const std::vector<std::string>& entity_types() const { return types_; }
    bool operator==(const TagDict& other) const { return tags_ == other.tags_; }

private:
    std::vector<std::string> types_;
    std::vector<std::string> tags_;
    std::map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Encoded sentences and batching

struct TextOptions {
    // Also feed the NUM sentinel to the character CNN instead of the original characters.
    bool num_to_chars = false;
    std::string number_pattern = std::string(NumberMatcher::kDefaultPattern);
};

struct Sentence {
    std::vector<std::string> tokens;
    std::vector<int> word_ids;
    std::vector<std::vector<int>> char_ids;
    std::vector<int> tag_ids;  // empty for unlabeled text

    std::size_t size() const { return tokens.size(); }
    bool labeled() const { return !tag_ids.empty(); }
};

// Growing the vocabularies as needed (for corpus construction).
void extend_vocabs(std::span<const RawSentence> raw, Vocab& vocab, CharVocab& chars, const TextOptions& options = {});

// Maps a raw sentence to ids. Tags are looked up when `tags` is non-null and
// the sentence is labeled. Unknown words and characters map to UNK.
Sentence encode_sentence(const RawSentence& raw, const Vocab& vocab, const CharVocab& chars, const TagDict* tags,
                         const TextOptions& options = {});
std::vector<Sentence> encode_corpus(std::span<const RawSentence> raw, const Vocab& vocab, const CharVocab& chars,
                                    const TagDict* tags, const TextOptions& options = {});

// Shuffles sentence indices and fills batches greedily: a batch closes when the
// next sentence would push its word count past `budget_words`.
std::vector<std::vector<std::size_t>> batch_by_word_budget(std::span<const Sentence> sentences,
                                                           std::size_t budget_words, Rng& rng);

struct PaddedChars {
    std::size_t width = 0;
    std::vector<std::vector<int>> rows;  // one per word, each exactly `width` long
};

// Right-pads every word to max(longest word, widest filter) with CharVocab::kPad.
PaddedChars pad_chars(std::span<const std::vector<int>> words, std::size_t widest_filter);
PaddedChars pad_chars(std::span<const Sentence* const> batch, std::size_t widest_filter);

}  // namespace bioner
