#pragma once

// Glue shared by the command-line tool and the experiment harnesses.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bioner/bilm.hpp"
#include "bioner/checkpoint.hpp"
#include "bioner/config.hpp"
#include "bioner/lexicon.hpp"
#include "bioner/ner_model.hpp"

namespace bioner {

// Settings for the synthetic corpus on a desktop CPU: a narrower network than
// the defaults, 100-word batches and a higher learning rate. No paths are set.
RunConfig desk_config();

// Converts BIO (or already IOBES) tags to IOBES, repairing orphan I- tags.
// Returns the number of repaired positions.
std::size_t to_iobes(std::vector<RawSentence>& sentences);

// Word table for a lexicon: rows from `embeddings` when given (others uniform
// in +-kOovInitRange), otherwise every row uniform in +-random_range. The
// draw depends only on the arguments, so the BiLM and a no-pretrain NER model
// built with the same seed start from the same table.
Tensor initial_word_table(const Lexicon& lexicon, std::size_t word_dim,
                          const std::optional<std::filesystem::path>& embeddings, double random_range,
                          std::uint64_t seed);

BiLm build_bilm(const Architecture& arch, const Lexicon& lexicon, Tensor word_emb, std::uint64_t seed);

// Fresh NER model seeded by `seed`, then weights from `lm` copied per `mode`.
// `lm` may be null only for PretrainMode::None.
NerModel build_ner_model(const NerSpec& spec, const Lexicon& lexicon, Tensor word_emb, const Checkpoint* lm,
                         PretrainMode mode, std::uint64_t seed);

}  // namespace bioner
