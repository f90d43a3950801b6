#include "bioner/ner_head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bioner/errors.hpp"

namespace bioner {

std::string to_string(HeadKind head) { return head == HeadKind::Crf ? "crf" : "softmax"; }

HeadKind parse_head(const std::string& s) {
    if (s == "crf") return HeadKind::Crf;
    if (s == "softmax") return HeadKind::Softmax;
    throw ConfigError("head must be 'softmax' or 'crf', got '" + s + "'");
}

NerDecoderParams NerDecoderParams::init(std::size_t tags, std::size_t input, Rng& rng) {
    return {init_xavier({tags, input}, rng), Tensor::zeros({tags}, true)};
}

void NerDecoderParams::collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".W_d", W_d);
    out.emplace_back(prefix + ".b", b);
}

CrfParams CrfParams::init(std::size_t tags, bool use_boundary, Rng& rng) {
    CrfParams p;
    p.transitions = init_xavier({tags, tags}, rng);
    p.use_boundary = use_boundary;
    if (use_boundary) {
        p.start = Tensor::zeros({tags}, true);
        p.stop = Tensor::zeros({tags}, true);
    }
    return p;
}

void CrfParams::collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".transitions", transitions);
    if (use_boundary) {
        out.emplace_back(prefix + ".start", start);
        out.emplace_back(prefix + ".stop", stop);
    }
}

Tensor logits(const Tensor& hidden, const NerDecoderParams& decoder) {
    return add(matmul(hidden, decoder.W_d, true), decoder.b);
}

Tensor word_nll(const Tensor& emissions, std::span<const int> gold) {
    return softmax_cross_entropy(emissions, gold, Reduction::Mean);
}

namespace {

double lse(const double* v, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
    return mx + std::log(s);
}

void check_shapes(const Tensor& emissions, const CrfParams& crf) {
    if (emissions.rank() != 2) throw ContractViolation("CRF emissions must be [N x T]");
    const std::size_t t = emissions.dim(1);
    if (crf.transitions.rank() != 2 || crf.transitions.dim(0) != t || crf.transitions.dim(1) != t) {
        throw ContractViolation("CRF transitions must be [" + std::to_string(t) + " x " + std::to_string(t) + "], got " +
                                shape_str(crf.transitions.shape()));
    }
    if (crf.use_boundary && (crf.start.size() != t || crf.stop.size() != t)) {
        throw ContractViolation("CRF start/stop vectors must have " + std::to_string(t) + " entries");
    }
}

double start_score(const CrfParams& crf, std::size_t j) { return crf.use_boundary ? crf.start[j] : 0.0; }
double stop_score(const CrfParams& crf, std::size_t j) { return crf.use_boundary ? crf.stop[j] : 0.0; }

// Log-space forward and backward tables for one sentence.
struct Lattice {
    std::size_t n = 0, t = 0;
    std::vector<double> alpha;  // alpha[s*t + j]: log total of prefixes ending in j at s (emission included)
    std::vector<double> beta;   // beta[s*t + j]: log total of suffixes after position s given tag j
    double log_z = 0.0;

    Lattice(const Tensor& d, const CrfParams& crf) : n(d.dim(0)), t(d.dim(1)), alpha(n * t), beta(n * t) {
        const double* e = d.data().data();
        const double* w = crf.transitions.data().data();
        std::vector<double> buf(t);
        for (std::size_t j = 0; j < t; ++j) alpha[j] = start_score(crf, j) + e[j];
        for (std::size_t s = 1; s < n; ++s) {
            for (std::size_t j = 0; j < t; ++j) {
                for (std::size_t i = 0; i < t; ++i) buf[i] = alpha[(s - 1) * t + i] + w[i * t + j];
                alpha[s * t + j] = lse(buf.data(), t) + e[s * t + j];
            }
        }
        for (std::size_t j = 0; j < t; ++j) beta[(n - 1) * t + j] = stop_score(crf, j);
        for (std::size_t s = n - 1; s-- > 0;) {
            for (std::size_t i = 0; i < t; ++i) {
                for (std::size_t j = 0; j < t; ++j) buf[j] = w[i * t + j] + e[(s + 1) * t + j] + beta[(s + 1) * t + j];
                beta[s * t + i] = lse(buf.data(), t);
            }
        }
        for (std::size_t j = 0; j < t; ++j) buf[j] = alpha[(n - 1) * t + j] + stop_score(crf, j);
        log_z = lse(buf.data(), t);
    }

    double unary(std::size_t s, std::size_t j) const { return std::exp(alpha[s * t + j] + beta[s * t + j] - log_z); }
};

}  // namespace

double path_score(const Tensor& emissions, std::span<const int> tags, const CrfParams& crf) {
    check_shapes(emissions, crf);
    const std::size_t n = emissions.dim(0), t = emissions.dim(1);
    if (tags.size() != n) throw ContractViolation("path_score: tag count does not match emissions");
    double s = start_score(crf, tags[0]) + stop_score(crf, tags[n - 1]);
    for (std::size_t i = 0; i < n; ++i) {
        s += emissions[i * t + tags[i]];
        if (i + 1 < n) s += crf.transitions[tags[i] * t + tags[i + 1]];
    }
    return s;
}

double crf_log_partition(const Tensor& emissions, const CrfParams& crf) {
    check_shapes(emissions, crf);
    return Lattice(emissions, crf).log_z;
}

Tensor crf_log_likelihood(const Tensor& emissions, std::span<const int> gold, const CrfParams& crf) {
    check_shapes(emissions, crf);
    const std::size_t n = emissions.dim(0), t = emissions.dim(1);
    if (n == 0 || gold.size() != n) throw ContractViolation("crf_log_likelihood: gold length must equal N >= 1");
    for (int g : gold) {
        if (g < 0 || static_cast<std::size_t>(g) >= t) throw ContractViolation("crf_log_likelihood: gold tag out of range");
    }
    auto lattice = std::make_shared<Lattice>(emissions, crf);
    const double value = path_score(emissions, gold, crf) - lattice->log_z;

    std::vector<Tensor> parents{emissions, crf.transitions};
    if (crf.use_boundary) {
        parents.push_back(crf.start);
        parents.push_back(crf.stop);
    }
    std::vector<int> tags(gold.begin(), gold.end());
    const bool boundary = crf.use_boundary;
    return detail::make_result("crf_log_likelihood", {1}, {value}, parents,
                               [lattice, tags = std::move(tags), n, t, boundary](Node& self) {
                                   const double up = self.grad[0];
                                   const Lattice& L = *lattice;
                                   Node& em = *self.parents[0];
                                   Node& tr = *self.parents[1];
                                   if (em.requires_grad) {
                                       auto& g = em.grad_buffer();
                                       for (std::size_t s = 0; s < n; ++s) {
                                           for (std::size_t j = 0; j < t; ++j) g[s * t + j] -= up * L.unary(s, j);
                                           g[s * t + tags[s]] += up;
                                       }
                                   }
                                   if (tr.requires_grad) {
                                       auto& g = tr.grad_buffer();
                                       const auto& e = em.value;
                                       const auto& w = tr.value;
                                       for (std::size_t s = 0; s + 1 < n; ++s) {
                                           for (std::size_t i = 0; i < t; ++i) {
                                               const double a = L.alpha[s * t + i];
                                               for (std::size_t j = 0; j < t; ++j) {
                                                   const double pair = std::exp(a + w[i * t + j] + e[(s + 1) * t + j] +
                                                                                L.beta[(s + 1) * t + j] - L.log_z);
                                                   g[i * t + j] -= up * pair;
                                               }
                                           }
                                           g[tags[s] * t + tags[s + 1]] += up;
                                       }
                                   }
                                   if (boundary) {
                                       Node& st = *self.parents[2];
                                       Node& sp = *self.parents[3];
                                       if (st.requires_grad) {
                                           auto& g = st.grad_buffer();
                                           for (std::size_t j = 0; j < t; ++j) g[j] -= up * L.unary(0, j);
                                           g[tags[0]] += up;
                                       }
                                       if (sp.requires_grad) {
                                           auto& g = sp.grad_buffer();
                                           for (std::size_t j = 0; j < t; ++j) g[j] -= up * L.unary(n - 1, j);
                                           g[tags[n - 1]] += up;
                                       }
                                   }
                               });
}

ViterbiResult viterbi(const Tensor& emissions, const CrfParams& crf) {
    check_shapes(emissions, crf);
    const std::size_t n = emissions.dim(0), t = emissions.dim(1);
    if (n == 0) throw ContractViolation("viterbi: empty sequence");
    const double* e = emissions.data().data();
    const double* w = crf.transitions.data().data();
    // suffix[s * t + j]: best score of positions s..n-1 given tag j at s, stop included.
    std::vector<double> suffix(n * t);
    for (std::size_t j = 0; j < t; ++j) suffix[(n - 1) * t + j] = e[(n - 1) * t + j] + stop_score(crf, j);
    for (std::size_t s = n - 1; s > 0; --s) {
        for (std::size_t i = 0; i < t; ++i) {
            double best = w[i * t] + suffix[s * t];
            for (std::size_t j = 1; j < t; ++j) best = std::max(best, w[i * t + j] + suffix[s * t + j]);
            suffix[(s - 1) * t + i] = e[(s - 1) * t + i] + best;
        }
    }
    // Decoding left to right and keeping the first maximiser at every step
    // yields the lexicographically smallest of the optimal paths.
    auto pick = [t](auto&& value) {
        int arg = 0;
        double best = value(0);
        for (std::size_t j = 1; j < t; ++j) {
            const double v = value(j);
            if (v > best) {
                best = v;
                arg = static_cast<int>(j);
            }
        }
        return std::pair{arg, best};
    };
    ViterbiResult out;
    out.tags.assign(n, 0);
    const auto [first, total] = pick([&](std::size_t j) { return start_score(crf, j) + suffix[j]; });
    out.tags[0] = first;
    out.score = total;
    for (std::size_t s = 1; s < n; ++s) {
        const std::size_t prev = static_cast<std::size_t>(out.tags[s - 1]);
        out.tags[s] = pick([&](std::size_t j) { return w[prev * t + j] + suffix[s * t + j]; }).first;
    }
    return out;
}

Tensor crf_marginals(const Tensor& emissions, const CrfParams& crf) {
    check_shapes(emissions, crf);
    const std::size_t n = emissions.dim(0), t = emissions.dim(1);
    Lattice L(emissions, crf);
    std::vector<double> out(n * t);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < t; ++j) out[s * t + j] = L.unary(s, j);
    }
    return Tensor({n, t}, std::move(out));
}

std::vector<int> argmax_tags(const Tensor& emissions) {
    const std::size_t n = emissions.dim(0), t = emissions.dim(1);
    std::vector<int> out(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double* row = emissions.data().data() + s * t;
        out[s] = static_cast<int>(std::max_element(row, row + t) - row);
    }
    return out;
}

}  // namespace bioner
