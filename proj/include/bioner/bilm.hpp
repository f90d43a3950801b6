#pragma once

/**
 * Bidirectional language model over the shared encoder.
 *
 * The forward direction reads w_1..w_n and predicts w_2..w_n followed by EOS;
 * the backward direction reads w_n..w_1 and predicts w_{n-1}..w_1 followed by
 * BOS. Both directions share one decoder W^lm [V x H], b^lm [V] applied to
 * the H-dimensional state of the respective LSTM.
 */

#include <functional>
#include <span>
#include <vector>

#include "bioner/checkpoint.hpp"
#include "bioner/encoder.hpp"
#include "bioner/lexicon.hpp"
#include "bioner/optim.hpp"

namespace bioner {

struct LmDecoderParams {
    Tensor W;  // [V x H]
    Tensor b;  // [V]

    static LmDecoderParams init(std::size_t vocab, std::size_t hidden, Rng& rng);
    void collect(NamedParams& out, const std::string& prefix = "lm_decoder") const;
};

struct BiLm {
    Architecture arch;
    Lexicon lexicon;
    EncoderParams encoder;
    LmDecoderParams decoder;

    // `word_emb` must be [|lexicon.words| x arch.word_dim].
    static BiLm init(const Architecture& arch, Lexicon lexicon, Tensor word_emb, Rng& rng);

    NamedParams parameters() const;
    Checkpoint to_checkpoint() const;
    static BiLm from_checkpoint(const Checkpoint& ckpt);
};

// Summed (not averaged) cross-entropy of each direction over one sentence.
struct LmLosses {
    Tensor forward;
    Tensor backward;
    std::size_t predictions = 0;  // per direction, equal to the sentence length
};

LmLosses lm_sentence_losses(const BiLm& model, const Sentence& sentence, const EncodeOptions& options = {});

// Mean per-token cross-entropy of one direction.
Tensor lm_forward_loss(const BiLm& model, const Sentence& sentence, const EncodeOptions& options = {});
Tensor lm_backward_loss(const BiLm& model, const Sentence& sentence, const EncodeOptions& options = {});

struct BiLmConfig {
    std::size_t epochs = 20;
    std::size_t word_budget = 500;
    double lambda_lm = 0.5;
    double clip_norm = 1.0;
    double dropout = 0.5;
    AdamConfig adam{};
    double lr_decay = 0.5;
    std::size_t patience = 3;
    double holdout_fraction = 0.05;
    std::uint64_t seed = 1;
};

struct LmStepResult {
    double loss = 0.0;
    double forward = 0.0;   // mean per-token cross-entropy
    double backward = 0.0;
    double grad_norm = 0.0;  // before clipping
};

// loss = lambda_lm * (forward mean + backward mean) over the batch, followed by
// one backward pass, one global-norm clip and one Adam update.
LmStepResult bilm_joint_step(BiLm& model, std::span<const Sentence* const> batch, AdamState& adam,
                             const BiLmConfig& config, Rng& rng);

struct Perplexity {
    double forward = 0.0;
    double backward = 0.0;
    double mean() const { return 0.5 * (forward + backward); }
};

// exp of the mean per-token cross-entropy over the whole corpus, dropout off.
Perplexity perplexity(const BiLm& model, std::span<const Sentence> corpus);

struct LmEpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double forward_loss = 0.0;
    double backward_loss = 0.0;
    Perplexity heldout;
    bool improved = false;
    double seconds = 0.0;

    nlohmann::json to_json() const;
};

struct BiLmResult {
    Checkpoint best;
    std::vector<LmEpochRecord> history;
    std::size_t best_epoch = 0;
    std::size_t heldout_sentences = 0;  // 0 means the training corpus was used
};

// Trains on `corpus` with a seeded 5% hold-out for perplexity. When the
// hold-out would be empty the training corpus itself is scored instead.
// The model is left at its final state; the result holds the best checkpoint.
BiLmResult train_bilm(BiLm& model, std::span<const Sentence> corpus, const BiLmConfig& config,
                      const std::function<void(const LmEpochRecord&)>& on_epoch = {});

}  // namespace bioner
