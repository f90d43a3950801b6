#include "bioner/corpus.hpp"

#include <algorithm>
#include <memory>
#include <set>
#include <sstream>

#include "bioner/errors.hpp"
#include "bioner/fileio.hpp"

namespace bioner {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

std::vector<RawSentence> parse_conll(std::string_view text, ParseMode mode) {
    std::vector<RawSentence> out;
    RawSentence cur;
    auto flush = [&] {
        if (!cur.tokens.empty()) out.push_back(std::move(cur));
        cur = RawSentence{};
    };
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (is_blank(line)) {
            flush();
            continue;
        }
        if (line.front() == '#' || line.substr(0, 10) == "-DOCSTART-") continue;
        auto fields = split_fields(line);
        if (mode == ParseMode::Labeled) {
            if (fields.size() < 2) throw ParseError("token '" + std::string(fields[0]) + "' has no tag", line_no);
            cur.tokens.emplace_back(fields.front());
            cur.tags.emplace_back(fields.back());
        } else {
            cur.tokens.emplace_back(fields.front());
        }
    }
    flush();
    return out;
}

std::vector<RawSentence> read_conll(const std::filesystem::path& path, ParseMode mode) {
    try {
        return parse_conll(read_file(path), mode);
    } catch (const ParseError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string format_conll(std::span<const RawSentence> sentences) {
    std::string out;
    for (const auto& s : sentences) {
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            out += s.tokens[i];
            if (!s.tags.empty()) {
                out += '\t';
                out += s.tags[i];
            }
            out += '\n';
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

NumberMatcher::NumberMatcher(std::string pattern) : pattern_(std::move(pattern)), re_(pattern_) {}

bool NumberMatcher::matches(std::string_view token) const {
    return std::regex_match(token.begin(), token.end(), re_);
}

std::string normalize_token(std::string_view token) {
    static const NumberMatcher matcher;
    return normalize_token(token, matcher);
}

std::string normalize_token(std::string_view token, const NumberMatcher& matcher) {
    if (matcher.matches(token)) return std::string(kNumToken);
    return std::string(token);
}

std::vector<std::string> utf8_chars(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto lead = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        if (lead >= 0xF0) len = 4;
        else if (lead >= 0xE0) len = 3;
        else if (lead >= 0xC0) len = 2;
        len = std::min(len, s.size() - i);
        out.emplace_back(s.substr(i, len));
        i += len;
    }
    return out;
}

// ---------------------------------------------------------------------------

std::optional<std::pair<char, std::string>> split_tag(std::string_view tag) {
    if (tag.size() < 3 || tag[1] != '-') return std::nullopt;
    const char p = tag[0];
    if (p != 'B' && p != 'I' && p != 'E' && p != 'S') return std::nullopt;
    return std::make_pair(p, std::string(tag.substr(2)));
}

IobesConversion bio_to_iobes(std::span<const std::string> tags, BioMode mode) {
    IobesConversion out;
    const std::size_t n = tags.size();
    // First pass: validate and normalise orphan I- tags to B-.
    std::vector<std::pair<char, std::string>> parsed(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (tags[i] == "O") {
            parsed[i] = {'O', ""};
            continue;
        }
        auto t = split_tag(tags[i]);
        if (!t || (t->first != 'B' && t->first != 'I')) {
            throw DataError("invalid BIO tag '" + tags[i] + "' at position " + std::to_string(i));
        }
        if (t->first == 'I') {
            const bool continues = i > 0 && parsed[i - 1].first != 'O' && parsed[i - 1].second == t->second;
            if (!continues) {
                if (mode == BioMode::Strict) {
                    throw DataError("invalid BIO transition to '" + tags[i] + "' at position " + std::to_string(i));
                }
                t->first = 'B';
                out.repaired.push_back(i);
            }
        }
        parsed[i] = *t;
    }
    out.tags.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [p, type] = parsed[i];
        if (p == 'O') {
            out.tags.emplace_back("O");
            continue;
        }
        const bool next_inside = i + 1 < n && parsed[i + 1].first == 'I' && parsed[i + 1].second == type;
        char q = p == 'B' ? (next_inside ? 'B' : 'S') : (next_inside ? 'I' : 'E');
        out.tags.push_back(std::string(1, q) + "-" + type);
    }
    return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& Vocab::reserved() {
    static const std::vector<std::string> r{"<PAD>", "<UNK>", std::string(kNumToken), "<BOS>", "<EOS>"};
    return r;
}

Vocab::Vocab() {
    for (const auto& w : reserved()) add(w);
}

int Vocab::add(const std::string& word) {
    auto it = index_.find(word);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(words_.size());
    words_.push_back(word);
    index_.emplace(word, id);
    return id;
}

int Vocab::id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

std::string Vocab::to_text() const {
    std::string out;
    for (const auto& w : words_) {
        out += w;
        out += '\n';
    }
    return out;
}

Vocab Vocab::from_text(std::string_view text) {
    Vocab v;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string word(text.substr(pos, end - pos));
        pos = end + 1;
        if (line_no < reserved().size()) {
            if (word != reserved()[line_no]) {
                throw ParseError("vocabulary must start with reserved token " + reserved()[line_no], line_no + 1);
            }
        } else {
            if (word.empty()) throw ParseError("empty vocabulary entry", line_no + 1);
            if (v.contains(word)) throw ParseError("duplicate vocabulary entry '" + word + "'", line_no + 1);
            v.add(word);
        }
        ++line_no;
    }
    return v;
}

CharVocab::CharVocab() {
    add("<PAD>");
    add("<UNK>");
}

int CharVocab::add(const std::string& ch) {
    auto it = index_.find(ch);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(chars_.size());
    chars_.push_back(ch);
    index_.emplace(ch, id);
    return id;
}

int CharVocab::id(const std::string& ch) const {
    auto it = index_.find(ch);
    return it == index_.end() ? kUnk : it->second;
}

CharVocab CharVocab::from_list(const std::vector<std::string>& chars) {
    if (chars.size() < 2 || chars[0] != "<PAD>" || chars[1] != "<UNK>") {
        throw DataError("character vocabulary must start with <PAD>, <UNK>");
    }
    CharVocab v;
    for (std::size_t i = 2; i < chars.size(); ++i) v.add(chars[i]);
    return v;
}

TagDict::TagDict(std::vector<std::string> entity_types) : types_(std::move(entity_types)) {
    std::sort(types_.begin(), types_.end());
    types_.erase(std::unique(types_.begin(), types_.end()), types_.end());
    tags_.push_back("O");
    for (const auto& t : types_) {
        for (char p : {'B', 'I', 'E', 'S'}) tags_.push_back(std::string(1, p) + "-" + t);
    }
    for (std::size_t i = 0; i < tags_.size(); ++i) index_[tags_[i]] = static_cast<int>(i);
}

TagDict TagDict::from_tags(std::span<const RawSentence> sentences) {
    std::set<std::string> types;
    for (const auto& s : sentences) {
        for (const auto& tag : s.tags) {
            if (tag == "O") continue;
            auto t = split_tag(tag);
            if (!t) throw DataError("unparseable tag '" + tag + "'");
            types.insert(t->second);
        }
    }
    return TagDict(std::vector<std::string>(types.begin(), types.end()));
}

int TagDict::id(const std::string& tag) const {
    auto it = index_.find(tag);
    if (it == index_.end()) throw DataError("tag '" + tag + "' is not in the tag dictionary");
    return it->second;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> char_source(const std::string& token, const std::string& normalized,
                                     const TextOptions& options) {
    return utf8_chars(options.num_to_chars ? normalized : token);
}

}  // namespace

void extend_vocabs(std::span<const RawSentence> raw, Vocab& vocab, CharVocab& chars, const TextOptions& options) {
    const NumberMatcher matcher(options.number_pattern);
    for (const auto& s : raw) {
        for (const auto& tok : s.tokens) {
            auto norm = normalize_token(tok, matcher);
            vocab.add(norm);
            for (const auto& c : char_source(tok, norm, options)) chars.add(c);
        }
    }
}

Sentence encode_sentence(const RawSentence& raw, const Vocab& vocab, const CharVocab& chars, const TagDict* tags,
                         const TextOptions& options) {
    if (raw.tokens.empty()) throw DataError("empty sentence");
    if (!raw.tags.empty() && raw.tags.size() != raw.tokens.size()) throw DataError("token/tag count mismatch");
    static thread_local std::unique_ptr<NumberMatcher> cached;
    if (!cached || cached->pattern() != options.number_pattern) {
        cached = std::make_unique<NumberMatcher>(options.number_pattern);
    }
    Sentence s;
    s.tokens = raw.tokens;
    for (const auto& tok : raw.tokens) {
        auto norm = normalize_token(tok, *cached);
        s.word_ids.push_back(vocab.id(norm));
        std::vector<int> ids;
        for (const auto& c : char_source(tok, norm, options)) ids.push_back(chars.id(c));
        s.char_ids.push_back(std::move(ids));
    }
    if (tags && !raw.tags.empty()) {
        for (const auto& t : raw.tags) s.tag_ids.push_back(tags->id(t));
    }
    return s;
}

std::vector<Sentence> encode_corpus(std::span<const RawSentence> raw, const Vocab& vocab, const CharVocab& chars,
                                    const TagDict* tags, const TextOptions& options) {
    std::vector<Sentence> out;
    out.reserve(raw.size());
    for (const auto& r : raw) out.push_back(encode_sentence(r, vocab, chars, tags, options));
    return out;
}

std::vector<std::vector<std::size_t>> batch_by_word_budget(std::span<const Sentence> sentences,
                                                           std::size_t budget_words, Rng& rng) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (sentences[i].size() > budget_words) {
            throw DataError("sentence " + std::to_string(i) + " has " + std::to_string(sentences[i].size()) +
                            " words, more than the batch budget of " + std::to_string(budget_words));
        }
    }
    std::vector<std::size_t> order(sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> batches;
    std::vector<std::size_t> cur;
    std::size_t words = 0;
    for (auto idx : order) {
        const std::size_t len = sentences[idx].size();
        if (!cur.empty() && words + len > budget_words) {
            batches.push_back(std::move(cur));
            cur.clear();
            words = 0;
        }
        cur.push_back(idx);
        words += len;
    }
    if (!cur.empty()) batches.push_back(std::move(cur));
    return batches;
}

PaddedChars pad_chars(std::span<const std::vector<int>> words, std::size_t widest_filter) {
    PaddedChars out;
    out.width = widest_filter;
    for (const auto& w : words) out.width = std::max(out.width, w.size());
    out.rows.reserve(words.size());
    for (const auto& w : words) {
        auto row = w;
        row.resize(out.width, CharVocab::kPad);
        out.rows.push_back(std::move(row));
    }
    return out;
}

PaddedChars pad_chars(std::span<const Sentence* const> batch, std::size_t widest_filter) {
    std::vector<std::vector<int>> words;
    for (const auto* s : batch) words.insert(words.end(), s->char_ids.begin(), s->char_ids.end());
    return pad_chars(words, widest_filter);
}

}  // namespace bioner
