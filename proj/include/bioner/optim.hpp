#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bioner/tensor.hpp"

namespace bioner {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moments, aligned by position with the parameter list given to
// adam_step. Moments are allocated lazily on the first step.
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}
};

// One bias-corrected Adam update. Every parameter must carry a gradient;
// gradients are left in place for the caller to clear.
void adam_step(std::span<Tensor> params, AdamState& state);

// Scales all gradients so their joint L2 norm is at most max_norm and returns
// the norm measured before scaling. Parameters without a gradient count as zero.
double clip_global_norm(std::span<Tensor> params, double max_norm);

void zero_grads(std::span<Tensor> params);

// Validation-metric bookkeeping for learning-rate decay and early stopping.
// An epoch counts as an improvement only when it strictly beats the best value
// seen so far; every other epoch is a plateau epoch.
class PlateauTracker {
public:
    PlateauTracker(bool higher_is_better, std::size_t patience);

    // Records one epoch's metric and returns true when it improved.
    bool update(double metric);
    bool exhausted() const { return stale_ >= patience_; }
    double best() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }
    std::size_t epochs() const { return epochs_; }

private:
    bool higher_;
    std::size_t patience_;
    double best_;
    std::size_t best_epoch_ = 0;
    std::size_t epochs_ = 0;
    std::size_t stale_ = 0;
};

}  // namespace bioner
