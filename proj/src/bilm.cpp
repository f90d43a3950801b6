#include "bioner/bilm.hpp"

#include <chrono>
#include <cmath>

#include "bioner/errors.hpp"

namespace bioner {

LmDecoderParams LmDecoderParams::init(std::size_t vocab, std::size_t hidden, Rng& rng) {
    return {init_xavier({vocab, hidden}, rng), Tensor::zeros({vocab}, true)};
}

void LmDecoderParams::collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", W);
    out.emplace_back(prefix + ".bias", b);
}

BiLm BiLm::init(const Architecture& arch, Lexicon lexicon, Tensor word_emb, Rng& rng) {
    BiLm m;
    m.arch = arch;
    m.arch.word_vocab = lexicon.words.size();
    m.arch.char_vocab = lexicon.chars.size();
    if (word_emb.shape() != Shape{m.arch.word_vocab, m.arch.word_dim}) {
        throw ContractViolation("BiLm::init: word embedding table does not match vocabulary and word_dim");
    }
    m.lexicon = std::move(lexicon);
    m.encoder = EncoderParams::init(m.arch, std::move(word_emb), rng);
    m.decoder = LmDecoderParams::init(m.arch.word_vocab, m.arch.hidden, rng);
    return m;
}

NamedParams BiLm::parameters() const {
    NamedParams out;
    encoder.collect(out);
    decoder.collect(out);
    return out;
}

Checkpoint BiLm::to_checkpoint() const {
    Checkpoint ck;
    ck.metadata["kind"] = "bilm";
    ck.metadata["architecture"] = arch.to_json();
    ck.metadata["lexicon"] = lexicon.to_json();
    ck.put_all(parameters());
    return ck;
}

BiLm BiLm::from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.metadata.contains("architecture") || !ckpt.metadata.contains("lexicon")) {
        throw DataError("checkpoint lacks architecture or lexicon metadata");
    }
    const Architecture arch = Architecture::from_json(ckpt.metadata["architecture"]);
    Rng rng(0);
    BiLm m = init(arch, Lexicon::from_json(ckpt.metadata["lexicon"]),
                  Tensor::zeros({arch.word_vocab, arch.word_dim}, true), rng);
    ckpt.load_into(m.parameters());
    return m;
}

namespace {

Tensor lm_logits(const Tensor& states, const LmDecoderParams& dec) { return add(matmul(states, dec.W, true), dec.b); }

std::vector<int> forward_targets(const Sentence& s) {
    std::vector<int> t(s.word_ids.begin() + 1, s.word_ids.end());
    t.push_back(Vocab::kEos);
    return t;
}

std::vector<int> backward_targets(const Sentence& s) {
    std::vector<int> t{Vocab::kBos};
    t.insert(t.end(), s.word_ids.begin(), s.word_ids.end() - 1);
    return t;
}

}  // namespace

LmLosses lm_sentence_losses(const BiLm& model, const Sentence& sentence, const EncodeOptions& options) {
    const Encoded enc = encode(model.encoder, model.arch, sentence, options);
    LmLosses out;
    out.forward = softmax_cross_entropy(lm_logits(enc.forward, model.decoder), forward_targets(sentence), Reduction::Sum);
    out.backward =
        softmax_cross_entropy(lm_logits(enc.backward, model.decoder), backward_targets(sentence), Reduction::Sum);
    out.predictions = sentence.size();
    return out;
}

Tensor lm_forward_loss(const BiLm& model, const Sentence& sentence, const EncodeOptions& options) {
    const Encoded enc = encode(model.encoder, model.arch, sentence, options);
    return softmax_cross_entropy(lm_logits(enc.forward, model.decoder), forward_targets(sentence), Reduction::Mean);
}

Tensor lm_backward_loss(const BiLm& model, const Sentence& sentence, const EncodeOptions& options) {
    const Encoded enc = encode(model.encoder, model.arch, sentence, options);
    return softmax_cross_entropy(lm_logits(enc.backward, model.decoder), backward_targets(sentence), Reduction::Mean);
}

LmStepResult bilm_joint_step(BiLm& model, std::span<const Sentence* const> batch, AdamState& adam,
                             const BiLmConfig& config, Rng& rng) {
    if (batch.empty()) throw ContractViolation("bilm_joint_step: empty batch");
    NamedParams named = model.parameters();
    std::vector<Tensor> params;
    for (auto& [name, t] : named) params.push_back(t);
    zero_grads(params);

    EncodeOptions opts{true, config.dropout, &rng};
    std::vector<Tensor> fwd, bwd;
    std::size_t tokens = 0;
    for (const Sentence* s : batch) {
        LmLosses l = lm_sentence_losses(model, *s, opts);
        fwd.push_back(reshape(l.forward, {1}));
        bwd.push_back(reshape(l.backward, {1}));
        tokens += l.predictions;
    }
    const double inv = 1.0 / static_cast<double>(tokens);
    const Tensor f = scale(sum(concat(fwd)), inv);
    const Tensor b = scale(sum(concat(bwd)), inv);
    const Tensor loss = scale(add(f, b), config.lambda_lm);
    backward(loss);

    LmStepResult r;
    r.loss = loss.item();
    r.forward = f.item();
    r.backward = b.item();
    r.grad_norm = clip_global_norm(params, config.clip_norm);
    for (auto& p : params) p.grad();
    adam_step(params, adam);
    return r;
}

Perplexity perplexity(const BiLm& model, std::span<const Sentence> corpus) {
    double fwd = 0.0, bwd = 0.0;
    std::size_t tokens = 0;
    for (const auto& s : corpus) {
        LmLosses l = lm_sentence_losses(model, s);
        fwd += l.forward.item();
        bwd += l.backward.item();
        tokens += l.predictions;
    }
    if (tokens == 0) throw ContractViolation("perplexity: empty corpus");
    const double n = static_cast<double>(tokens);
    return {std::exp(fwd / n), std::exp(bwd / n)};
}

nlohmann::json LmEpochRecord::to_json() const {
    return {{"epoch", epoch},
            {"lr", lr},
            {"fwd_loss", forward_loss},
            {"bwd_loss", backward_loss},
            {"ppl_fwd", heldout.forward},
            {"ppl_bwd", heldout.backward},
            {"ppl", heldout.mean()},
            {"improved", improved},
            {"seconds", seconds}};
}

BiLmResult train_bilm(BiLm& model, std::span<const Sentence> corpus, const BiLmConfig& config,
                      const std::function<void(const LmEpochRecord&)>& on_epoch) {
    if (corpus.empty()) throw DataError("train_bilm: empty corpus");
    Rng rng(config.seed);

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const auto n_hold = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(corpus.size())));
    std::vector<Sentence> train, heldout;
    for (std::size_t k = 0; k < order.size(); ++k) (k < n_hold ? heldout : train).push_back(corpus[order[k]]);
    if (train.empty()) throw DataError("train_bilm: hold-out leaves no training sentences");
    const std::span<const Sentence> scored = heldout.empty() ? std::span<const Sentence>(train) : heldout;

    BiLmResult result;
    result.heldout_sentences = heldout.size();
    AdamState adam(config.adam);
    PlateauTracker plateau(false, config.patience);
    const auto start = std::chrono::steady_clock::now();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        LmEpochRecord rec;
        rec.epoch = epoch;
        rec.lr = adam.config.lr;
        auto batches = batch_by_word_budget(train, config.word_budget, rng);
        std::size_t batch_no = 0;
        for (const auto& idx : batches) {
            ++batch_no;
            std::vector<const Sentence*> batch;
            for (auto i : idx) batch.push_back(&train[i]);
            try {
                auto step = bilm_joint_step(model, batch, adam, config, rng);
                rec.forward_loss += step.forward / static_cast<double>(batches.size());
                rec.backward_loss += step.backward / static_cast<double>(batches.size());
            } catch (const NumericError& e) {
                throw NumericError(e.op(), "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no) +
                                               ", lr " + std::to_string(adam.config.lr) + ": " + e.what());
            }
        }
        rec.heldout = perplexity(model, scored);
        rec.improved = plateau.update(rec.heldout.mean());
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (rec.improved) {
            result.best = model.to_checkpoint();
            result.best_epoch = epoch;
        } else {
            adam.config.lr *= config.lr_decay;
        }
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (plateau.exhausted()) break;
    }
    return result;
}

}  // namespace bioner
