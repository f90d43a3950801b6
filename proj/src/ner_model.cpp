#include "bioner/ner_model.hpp"

#include "bioner/errors.hpp"

namespace bioner {

std::string to_string(PretrainMode mode) {
    switch (mode) {
        case PretrainMode::None: return "none";
        case PretrainMode::ForwardOnly: return "fwd";
        case PretrainMode::BackwardOnly: return "bwd";
        case PretrainMode::BiLM: return "bilm";
    }
    return "none";
}

PretrainMode parse_mode(const std::string& s) {
    if (s == "none") return PretrainMode::None;
    if (s == "fwd") return PretrainMode::ForwardOnly;
    if (s == "bwd") return PretrainMode::BackwardOnly;
    if (s == "bilm") return PretrainMode::BiLM;
    throw ConfigError("mode must be one of none, fwd, bwd, bilm; got '" + s + "'");
}

NerModel NerModel::init(const NerSpec& spec, Lexicon lexicon, Tensor word_emb, Rng& rng) {
    NerModel m;
    m.spec = spec;
    m.spec.arch.word_vocab = lexicon.words.size();
    m.spec.arch.char_vocab = lexicon.chars.size();
    if (word_emb.shape() != Shape{m.arch().word_vocab, m.arch().word_dim}) {
        throw ContractViolation("NerModel::init: word embedding table does not match vocabulary and word_dim");
    }
    if (spec.tags.size() == 0) throw ContractViolation("NerModel::init: empty tag dictionary");
    m.lexicon = std::move(lexicon);
    m.encoder = EncoderParams::init(m.arch(), std::move(word_emb), rng);
    m.decoder = NerDecoderParams::init(spec.tags.size(), 2 * m.arch().hidden, rng);
    m.crf = CrfParams::init(spec.tags.size(), spec.crf_boundary, rng);
    return m;
}

NamedParams NerModel::parameters() const {
    NamedParams out;
    encoder.collect(out);
    decoder.collect(out);
    if (spec.head == HeadKind::Crf) crf.collect(out);
    return out;
}

Checkpoint NerModel::to_checkpoint() const {
    Checkpoint ck;
    ck.metadata["kind"] = "ner";
    ck.metadata["architecture"] = arch().to_json();
    ck.metadata["lexicon"] = lexicon.to_json();
    ck.metadata["tags"] = tags_to_json(tags());
    ck.metadata["head"] = to_string(spec.head);
    ck.metadata["crf_boundary"] = spec.crf_boundary;
    ck.put_all(parameters());
    return ck;
}

NerModel NerModel::from_checkpoint(const Checkpoint& ckpt) {
    const auto& meta = ckpt.metadata;
    if (meta.value("kind", "") != "ner") throw DataError("checkpoint does not hold a NER model");
    NerSpec spec;
    try {
        spec.arch = Architecture::from_json(meta.at("architecture"));
        spec.tags = tags_from_json(meta.at("tags"));
        spec.head = parse_head(meta.at("head").get<std::string>());
        spec.crf_boundary = meta.at("crf_boundary").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed NER checkpoint metadata: ") + e.what());
    }
    Rng rng(0);
    NerModel m = init(spec, Lexicon::from_json(meta.at("lexicon")),
                      Tensor::zeros({spec.arch.word_vocab, spec.arch.word_dim}, true), rng);
    ckpt.load_into(m.parameters());
    return m;
}

Tensor NerModel::emissions(const Sentence& sentence, const EncodeOptions& options) const {
    return logits(encode(encoder, arch(), sentence, options).joint, decoder);
}

Tensor NerModel::loss(const Sentence& sentence, const EncodeOptions& options) const {
    if (sentence.tag_ids.size() != sentence.size()) throw DataError("NER loss needs a fully labeled sentence");
    for (int t : sentence.tag_ids) {
        if (t < 0 || static_cast<std::size_t>(t) >= tags().size()) {
            throw DataError("tag id " + std::to_string(t) + " is outside the model's tag dictionary");
        }
    }
    const Tensor e = emissions(sentence, options);
    if (spec.head == HeadKind::Crf) return scale(crf_log_likelihood(e, sentence.tag_ids, crf), -1.0);
    return softmax_cross_entropy(e, sentence.tag_ids, Reduction::Sum);
}

std::vector<int> NerModel::predict(const Sentence& sentence) const {
    const Tensor e = emissions(sentence);
    return spec.head == HeadKind::Crf ? viterbi(e, crf).tags : argmax_tags(e);
}

std::vector<std::string> NerModel::predict_tags(const Sentence& sentence) const {
    std::vector<std::string> out;
    for (int id : predict(sentence)) out.push_back(tags().tag(id));
    return out;
}

void transfer_weights(const Checkpoint& bilm, PretrainMode mode, NerModel& model) {
    if (mode == PretrainMode::None) return;
    if (!bilm.metadata.contains("architecture") || !bilm.metadata.contains("lexicon")) {
        throw DataError("language-model checkpoint lacks architecture or lexicon metadata");
    }
    const Architecture source = Architecture::from_json(bilm.metadata["architecture"]);
    const auto mismatches = architecture_mismatches(model.arch(), source);
    if (!mismatches.empty()) {
        std::string msg = "checkpoint architecture does not match the NER model:";
        for (const auto& m : mismatches) msg += "\n  " + m;
        throw ConfigError(msg);
    }
    if (Lexicon::from_json(bilm.metadata["lexicon"]).words.words() != model.lexicon.words.words()) {
        throw DataError("checkpoint vocabulary differs from the NER model's vocabulary");
    }

    NamedParams encoder;
    model.encoder.collect(encoder);
    NamedParams selected;
    for (const auto& entry : encoder) {
        const bool fwd = entry.first.starts_with("encoder.lstm_fwd.");
        const bool bwd = entry.first.starts_with("encoder.lstm_bwd.");
        if (fwd && mode == PretrainMode::BackwardOnly) continue;
        if (bwd && mode == PretrainMode::ForwardOnly) continue;
        selected.push_back(entry);
    }
    bilm.load_into(selected);
}

}  // namespace bioner
