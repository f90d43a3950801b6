#pragma once

#include <span>
#include <string>
#include <vector>

#include "bioner/encoder.hpp"
#include "bioner/tensor.hpp"

namespace bioner {

enum class HeadKind { Softmax, Crf };

std::string to_string(HeadKind head);
HeadKind parse_head(const std::string& s);

struct NerDecoderParams {
    Tensor W_d;  // [T x 2H]
    Tensor b;    // [T]

    static NerDecoderParams init(std::size_t tags, std::size_t input, Rng& rng);
    void collect(NamedParams& out, const std::string& prefix = "ner.decoder") const;
};

// transitions[i][j] scores tag j following tag i. start/stop score the first
// and last tag; with use_boundary = false they are absent and the sentence
// score is exactly sum of transitions plus sum of emissions.
struct CrfParams {
    Tensor transitions;  // [T x T]
    Tensor start;        // [T]
    Tensor stop;         // [T]
    bool use_boundary = true;

    static CrfParams init(std::size_t tags, bool use_boundary, Rng& rng);
    std::size_t num_tags() const { return transitions.dim(0); }
    void collect(NamedParams& out, const std::string& prefix = "crf") const;
};

// d_t = W_d h_t + b for every row of H[N x 2H].
Tensor logits(const Tensor& hidden, const NerDecoderParams& decoder);

// Mean over tokens of -log softmax(d_t)[y_t].
Tensor word_nll(const Tensor& emissions, std::span<const int> gold);

double path_score(const Tensor& emissions, std::span<const int> tags, const CrfParams& crf);

// log of the sum over all tag paths of exp(score), by the forward recursion.
double crf_log_partition(const Tensor& emissions, const CrfParams& crf);

// log p(gold | emissions) = score(gold) - log Z, differentiable with respect to
// the emissions and all CRF parameters. Gradients come from forward-backward
// marginals.
Tensor crf_log_likelihood(const Tensor& emissions, std::span<const int> gold, const CrfParams& crf);

struct ViterbiResult {
    std::vector<int> tags;
    double score = 0.0;
};

// Highest-scoring path. When several paths tie, the lexicographically
// smallest tag sequence is returned.
ViterbiResult viterbi(const Tensor& emissions, const CrfParams& crf);

// Posterior p(y_t = j | emissions) as an [N x T] tensor (no gradient).
Tensor crf_marginals(const Tensor& emissions, const CrfParams& crf);

// Per-token argmax of the emissions, lowest id on ties.
std::vector<int> argmax_tags(const Tensor& emissions);

}  // namespace bioner
