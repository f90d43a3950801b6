#include "bioner/optim.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "bioner/errors.hpp"

namespace bioner {

void adam_step(std::span<Tensor> params, AdamState& state) {
    if (state.first_moment.empty()) {
        for (auto& p : params) {
            state.first_moment.emplace_back(p.size(), 0.0);
            state.second_moment.emplace_back(p.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw ContractViolation("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) throw ContractViolation("adam_step: parameter " + std::to_string(i) + " has no gradient");
        if (state.first_moment[i].size() != params[i].size()) {
            throw ContractViolation("adam_step: moment shape mismatch for parameter " + std::to_string(i));
        }
    }

    ++state.step;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto value = params[i].data();
        auto grad = std::as_const(params[i]).grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double g = grad[j];
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            value[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
}

double clip_global_norm(std::span<Tensor> params, double max_norm) {
    if (!(max_norm > 0.0)) throw ContractViolation("clip_global_norm: max_norm must be positive");
    double sq = 0.0;
    for (const auto& p : params) {
        for (double g : p.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double factor = max_norm / norm;
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            for (auto& g : p.grad()) g *= factor;
        }
    }
    return norm;
}

void zero_grads(std::span<Tensor> params) {
    for (auto& p : params) p.zero_grad();
}

PlateauTracker::PlateauTracker(bool higher_is_better, std::size_t patience)
    : higher_(higher_is_better),
      patience_(patience),
      best_(higher_is_better ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity()) {}

bool PlateauTracker::update(double metric) {
    ++epochs_;
    const bool improved = higher_ ? metric > best_ : metric < best_;
    if (improved) {
        best_ = metric;
        best_epoch_ = epochs_;
        stale_ = 0;
    } else {
        ++stale_;
    }
    return improved;
}

}  // namespace bioner
