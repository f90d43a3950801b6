#pragma once

#include <string>
#include <vector>

#include "bioner/checkpoint.hpp"
#include "bioner/encoder.hpp"
#include "bioner/lexicon.hpp"
#include "bioner/ner_head.hpp"

namespace bioner {

enum class PretrainMode { None, ForwardOnly, BackwardOnly, BiLM };

std::string to_string(PretrainMode mode);
// Accepts "none", "fwd", "bwd", "bilm".
PretrainMode parse_mode(const std::string& s);

struct NerSpec {
    Architecture arch;
    TagDict tags;
    HeadKind head = HeadKind::Crf;
    bool crf_boundary = true;
};

struct NerModel {
    NerSpec spec;
    Lexicon lexicon;
    EncoderParams encoder;
    NerDecoderParams decoder;  // [T x 2H]
    CrfParams crf;             // unused by the softmax head

    // Fresh model: everything randomly initialised except `word_emb`.
    static NerModel init(const NerSpec& spec, Lexicon lexicon, Tensor word_emb, Rng& rng);

    const Architecture& arch() const { return spec.arch; }
    const TagDict& tags() const { return spec.tags; }

    // Encoder, "ner.decoder" and, for the CRF head, "crf" entries.
    NamedParams parameters() const;
    Checkpoint to_checkpoint() const;
    static NerModel from_checkpoint(const Checkpoint& ckpt);

    Tensor emissions(const Sentence& sentence, const EncodeOptions& options = {}) const;
    // Summed over tokens: -log p(gold) for the CRF head, token cross-entropy for softmax.
    Tensor loss(const Sentence& sentence, const EncodeOptions& options = {}) const;
    std::vector<int> predict(const Sentence& sentence) const;
    std::vector<std::string> predict_tags(const Sentence& sentence) const;
};

// Copies pretrained weights into a freshly initialised model.
//   BiLM:         char embeddings, CNN, word embeddings, both LSTMs
//   ForwardOnly:  the same without the backward LSTM
//   BackwardOnly: the same without the forward LSTM
//   None:         nothing
// The NER decoder and CRF always keep their fresh values and lm_decoder.*
// entries are never read. Throws ConfigError listing every architecture
// mismatch, and DataError when the vocabularies differ.
void transfer_weights(const Checkpoint& bilm, PretrainMode mode, NerModel& model);

}  // namespace bioner
