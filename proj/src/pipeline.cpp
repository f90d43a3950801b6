#include "bioner/pipeline.hpp"

#include "bioner/embeddings.hpp"
#include "bioner/errors.hpp"

namespace bioner {

namespace {

constexpr std::uint64_t kEmbeddingStream = 0x5EED0001;
constexpr std::uint64_t kBiLmStream = 0x5EED0002;
constexpr std::uint64_t kNerStream = 0x5EED0003;

}  // namespace

RunConfig desk_config() {
    RunConfig c;
    c.arch.char_dim = 16;
    c.arch.word_dim = 32;
    c.arch.hidden = 32;
    c.arch.max_filter_width = 3;
    c.arch.filters_per_width = 10;
    c.arch.max_filters = 20;
    c.lm.word_budget = 100;
    c.lm.adam.lr = 0.01;
    c.train.word_budget = 100;
    c.train.adam.lr = 0.01;
    c.random_embedding_range = 0.1;
    return c;
}

std::size_t to_iobes(std::vector<RawSentence>& sentences) {
    std::size_t repaired = 0;
    for (auto& s : sentences) {
        auto conv = bio_to_iobes(s.tags, BioMode::Lenient);
        repaired += conv.repaired.size();
        s.tags = std::move(conv.tags);
    }
    return repaired;
}

Tensor initial_word_table(const Lexicon& lexicon, std::size_t word_dim,
                          const std::optional<std::filesystem::path>& embeddings, double random_range,
                          std::uint64_t seed) {
    Rng rng(seed ^ kEmbeddingStream);
    if (embeddings) return load_word2vec_text(*embeddings, lexicon.words, word_dim, rng).table.matrix;
    return random_word_table(lexicon.words.size(), word_dim, rng, random_range).matrix;
}

BiLm build_bilm(const Architecture& arch, const Lexicon& lexicon, Tensor word_emb, std::uint64_t seed) {
    Rng rng(seed ^ kBiLmStream);
    return BiLm::init(arch, lexicon, std::move(word_emb), rng);
}

NerModel build_ner_model(const NerSpec& spec, const Lexicon& lexicon, Tensor word_emb, const Checkpoint* lm,
                         PretrainMode mode, std::uint64_t seed) {
    if (mode != PretrainMode::None && !lm) {
        throw ConfigError("pretraining mode '" + to_string(mode) + "' needs a language-model checkpoint");
    }
    Rng rng(seed ^ kNerStream);
    NerModel model = NerModel::init(spec, lexicon, std::move(word_emb), rng);
    if (lm) transfer_weights(*lm, mode, model);
    return model;
}

}  // namespace bioner
