#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "bioner/corpus.hpp"
#include "bioner/rng.hpp"
#include "bioner/tensor.hpp"

namespace bioner {

inline constexpr double kOovInitRange = 0.005;

struct EmbeddingTable {
    Tensor matrix;  // [V x D]
    bool trainable = true;

    std::size_t rows() const { return matrix.dim(0); }
    std::size_t dim() const { return matrix.dim(1); }
};

struct EmbeddingLoadResult {
    EmbeddingTable table;
    std::size_t found = 0;  // vocabulary entries present in the file
    double coverage = 0.0;  // found / |vocab|
};

// Reads word2vec text vectors (`word v1 ... vD` per line, optional "count dim"
// header). Vocabulary rows found in the file are copied; all other rows are
// drawn uniformly from (-oov_range, oov_range). When `expected_dim` is set, a
// file with a different dimensionality is rejected.
EmbeddingLoadResult parse_word2vec_text(std::string_view text, const Vocab& vocab, std::optional<std::size_t> expected_dim,
                                        Rng& rng, double oov_range = kOovInitRange);
EmbeddingLoadResult load_word2vec_text(const std::filesystem::path& path, const Vocab& vocab,
                                       std::optional<std::size_t> expected_dim, Rng& rng,
                                       double oov_range = kOovInitRange);

// Uniformly initialised table, used when no pretrained vectors are supplied.
EmbeddingTable random_word_table(std::size_t vocab_size, std::size_t dim, Rng& rng, double range = kOovInitRange);

// Character table with Xavier rows and the PAD row pinned at zero.
EmbeddingTable random_char_table(std::size_t vocab_size, std::size_t dim, Rng& rng);

}  // namespace bioner
