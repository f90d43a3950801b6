#include "bioner/embeddings.hpp"

#include <charconv>
#include <unordered_map>

#include "bioner/errors.hpp"
#include "bioner/fileio.hpp"

namespace bioner {

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

bool parse_size(std::string_view s, std::size_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

double parse_float(std::string_view s, std::size_t line_no) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ParseError("malformed float '" + std::string(s) + "'", line_no);
    }
    return v;
}

}  // namespace

EmbeddingLoadResult parse_word2vec_text(std::string_view text, const Vocab& vocab, std::optional<std::size_t> expected_dim,
                                        Rng& rng, double oov_range) {
    std::unordered_map<std::string, std::vector<double>> found;
    std::optional<std::size_t> dim = expected_dim;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto fields = split_spaces(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (fields.empty()) continue;

        std::size_t count = 0, header_dim = 0;
        if (line_no == 1 && fields.size() == 2 && parse_size(fields[0], count) && parse_size(fields[1], header_dim)) {
            if (dim && *dim != header_dim) {
                throw DataError("embedding dimension " + std::to_string(header_dim) + " in header does not match configured " +
                                std::to_string(*dim));
            }
            dim = header_dim;
            continue;
        }
        const std::size_t line_dim = fields.size() - 1;
        if (!dim) dim = line_dim;
        if (line_dim != *dim) {
            throw ParseError("expected " + std::to_string(*dim) + " values, found " + std::to_string(line_dim), line_no);
        }
        std::vector<double> v(*dim);
        for (std::size_t i = 0; i < *dim; ++i) v[i] = parse_float(fields[i + 1], line_no);
        std::string word(fields[0]);
        if (!vocab.contains(word) || found.count(word)) continue;
        found.emplace(std::move(word), std::move(v));
    }
    if (!dim) throw DataError("embedding file contains no vectors");

    EmbeddingLoadResult out;
    const std::size_t d = *dim;
    std::vector<double> matrix(vocab.size() * d);
    for (std::size_t r = 0; r < vocab.size(); ++r) {
        auto it = found.find(vocab.word(static_cast<int>(r)));
        for (std::size_t c = 0; c < d; ++c) {
            // OOV rows draw from the stream even for found words so that row r
            // does not depend on which other words the file happens to contain.
            const double random = rng.uniform(-oov_range, oov_range);
            matrix[r * d + c] = it != found.end() ? it->second[c] : random;
        }
    }
    out.found = found.size();
    out.coverage = vocab.size() ? static_cast<double>(found.size()) / static_cast<double>(vocab.size()) : 0.0;
    out.table.matrix = Tensor({vocab.size(), d}, std::move(matrix), true);
    return out;
}

EmbeddingLoadResult load_word2vec_text(const std::filesystem::path& path, const Vocab& vocab,
                                       std::optional<std::size_t> expected_dim, Rng& rng, double oov_range) {
    return parse_word2vec_text(read_file(path), vocab, expected_dim, rng, oov_range);
}

EmbeddingTable random_word_table(std::size_t vocab_size, std::size_t dim, Rng& rng, double range) {
    return EmbeddingTable{init_uniform({vocab_size, dim}, -range, range, rng), true};
}

EmbeddingTable random_char_table(std::size_t vocab_size, std::size_t dim, Rng& rng) {
    EmbeddingTable t{init_xavier({vocab_size, dim}, rng), true};
    for (std::size_t c = 0; c < dim; ++c) t.matrix[CharVocab::kPad * dim + c] = 0.0;
    return t;
}

}  // namespace bioner
