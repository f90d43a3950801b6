#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "bioner/checkpoint.hpp"
#include "bioner/eval.hpp"
#include "bioner/ner_model.hpp"
#include "bioner/optim.hpp"

namespace bioner {

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t word_budget = 1000;
    double clip_norm = 1.0;
    double dropout = 0.5;
    AdamConfig adam{};
    double lr_decay = 0.5;
    std::size_t patience = 3;
    std::uint64_t seed = 1;
    // Stop as soon as dev F1 reaches this value (used by convergence runs).
    std::optional<double> stop_at_f1;

    nlohmann::json to_json() const;
};

struct NerEpochRecord {
    std::size_t epoch = 0;
    double seconds = 0.0;
    double lr = 0.0;
    double train_loss = 0.0;  // mean per-word loss over the epoch's batches
    double dev_precision = 0.0;
    double dev_recall = 0.0;
    double dev_f1 = 0.0;
    bool improved = false;

    nlohmann::json to_json() const;
};

struct NerTrainResult {
    Checkpoint best;
    std::vector<NerEpochRecord> history;
    std::size_t best_epoch = 0;
    double best_f1 = 0.0;
};

// One optimisation step on a batch; returns the mean per-word loss.
double ner_train_step(NerModel& model, std::span<const Sentence* const> batch, AdamState& adam,
                      const TrainConfig& config, Rng& rng);

// Fine-tunes `model` with dev exact-match F1 driving learning-rate decay and
// early stopping. The model ends at its last state; the result keeps the
// checkpoint of the best dev epoch.
NerTrainResult train_ner(NerModel& model, std::span<const Sentence> train, std::span<const Sentence> dev,
                         const TrainConfig& config, const std::function<void(const NerEpochRecord&)>& on_epoch = {});

// Retrains `model` (expected to hold the same initial weights as the original
// run) on train + dev for `history`'s best epoch count, replaying the learning
// rate recorded for each epoch. No model selection happens.
Checkpoint retrain_on_train_dev(NerModel& model, std::span<const Sentence> train, std::span<const Sentence> dev,
                                const NerTrainResult& history, const TrainConfig& config);

// Epoch at which dev F1 first reached `threshold`, if ever.
std::optional<std::size_t> epochs_to_reach(const std::vector<NerEpochRecord>& history, double threshold);

}  // namespace bioner
