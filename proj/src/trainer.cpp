#include "bioner/trainer.hpp"

#include <chrono>

#include "bioner/errors.hpp"

namespace bioner {

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j{{"epochs", epochs},   {"word_budget", word_budget}, {"clip_norm", clip_norm},
                     {"dropout", dropout}, {"lr", adam.lr},              {"lr_decay", lr_decay},
                     {"patience", patience}, {"seed", seed}};
    if (stop_at_f1) j["stop_at_f1"] = *stop_at_f1;
    return j;
}

nlohmann::json NerEpochRecord::to_json() const {
    return {{"epoch", epoch},
            {"seconds", seconds},
            {"lr", lr},
            {"train_loss", train_loss},
            {"dev_precision", dev_precision},
            {"dev_recall", dev_recall},
            {"dev_f1", dev_f1},
            {"improved", improved}};
}

namespace {

std::vector<Tensor> tensors_of(const NamedParams& named) {
    std::vector<Tensor> out;
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

void check_labels(const NerModel& model, std::span<const Sentence> data, const char* split) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].tag_ids.size() != data[i].size()) {
            throw DataError(std::string(split) + " sentence " + std::to_string(i) + " is not labeled");
        }
        for (int t : data[i].tag_ids) {
            if (t < 0 || static_cast<std::size_t>(t) >= model.tags().size()) {
                throw DataError(std::string(split) + " sentence " + std::to_string(i) +
                                " uses a tag outside the model's tag dictionary");
            }
        }
    }
}

double run_epoch(NerModel& model, std::span<const Sentence> train, AdamState& adam, const TrainConfig& config,
                 Rng& rng, std::size_t epoch) {
    const auto batches = batch_by_word_budget(train, config.word_budget, rng);
    double total = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        std::vector<const Sentence*> batch;
        for (auto i : batches[b]) batch.push_back(&train[i]);
        try {
            total += ner_train_step(model, batch, adam, config, rng);
        } catch (const NumericError& e) {
            throw NumericError(e.op(), "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) +
                                           ", lr " + std::to_string(adam.config.lr) + ": " + e.what());
        }
    }
    return batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
}

}  // namespace

double ner_train_step(NerModel& model, std::span<const Sentence* const> batch, AdamState& adam,
                      const TrainConfig& config, Rng& rng) {
    if (batch.empty()) throw ContractViolation("ner_train_step: empty batch");
    std::vector<Tensor> params = tensors_of(model.parameters());
    zero_grads(params);
    const EncodeOptions opts{true, config.dropout, &rng};
    std::vector<Tensor> losses;
    std::size_t words = 0;
    for (const Sentence* s : batch) {
        losses.push_back(reshape(model.loss(*s, opts), {1}));
        words += s->size();
    }
    const Tensor loss = scale(sum(concat(losses)), 1.0 / static_cast<double>(words));
    backward(loss);
    clip_global_norm(params, config.clip_norm);
    for (auto& p : params) p.grad();
    adam_step(params, adam);
    return loss.item();
}

NerTrainResult train_ner(NerModel& model, std::span<const Sentence> train, std::span<const Sentence> dev,
                         const TrainConfig& config, const std::function<void(const NerEpochRecord&)>& on_epoch) {
    if (train.empty()) throw DataError("train_ner: no training sentences");
    if (dev.empty()) throw DataError("train_ner: no development sentences");
    check_labels(model, train, "training");
    check_labels(model, dev, "development");

    Rng rng(config.seed);
    AdamState adam(config.adam);
    PlateauTracker plateau(true, config.patience);
    NerTrainResult result;
    const auto start = std::chrono::steady_clock::now();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        NerEpochRecord rec;
        rec.epoch = epoch;
        rec.lr = adam.config.lr;
        rec.train_loss = run_epoch(model, train, adam, config, rng, epoch);
        const EvalReport dev_report = evaluate(model, dev);
        rec.dev_precision = dev_report.precision();
        rec.dev_recall = dev_report.recall();
        rec.dev_f1 = dev_report.f1();
        rec.improved = plateau.update(rec.dev_f1);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (rec.improved) {
            result.best = model.to_checkpoint();
            result.best_epoch = epoch;
            result.best_f1 = rec.dev_f1;
        } else {
            adam.config.lr *= config.lr_decay;
        }
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (plateau.exhausted()) break;
        if (config.stop_at_f1 && rec.dev_f1 >= *config.stop_at_f1) break;
    }
    return result;
}

Checkpoint retrain_on_train_dev(NerModel& model, std::span<const Sentence> train, std::span<const Sentence> dev,
                                const NerTrainResult& history, const TrainConfig& config) {
    std::vector<Sentence> all(train.begin(), train.end());
    all.insert(all.end(), dev.begin(), dev.end());
    check_labels(model, all, "training");
    Rng rng(config.seed);
    AdamState adam(config.adam);
    for (std::size_t epoch = 1; epoch <= history.best_epoch; ++epoch) {
        adam.config.lr = history.history.at(epoch - 1).lr;
        run_epoch(model, all, adam, config, rng, epoch);
    }
    return model.to_checkpoint();
}

std::optional<std::size_t> epochs_to_reach(const std::vector<NerEpochRecord>& history, double threshold) {
    for (const auto& r : history) {
        if (r.dev_f1 >= threshold) return r.epoch;
    }
    return std::nullopt;
}

}  // namespace bioner
