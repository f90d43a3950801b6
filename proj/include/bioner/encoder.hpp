#pragma once

/**
 * Shared representation stack used by both the language model and the tagger:
 * character embeddings -> multi-width character CNN with max pooling, word
 * embeddings, and a forward plus a backward LSTM over the concatenation.
 */

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bioner/checkpoint.hpp"
#include "bioner/corpus.hpp"
#include "bioner/rng.hpp"
#include "bioner/tensor.hpp"

namespace bioner {

enum class Activation { ReLU, Tanh };

struct Architecture {
    std::size_t char_dim = 50;
    std::size_t word_dim = 300;
    std::size_t hidden = 256;
    std::size_t max_filter_width = 7;
    std::size_t filters_per_width = 50;
    std::size_t max_filters = 200;
    Activation conv_activation = Activation::ReLU;
    std::size_t char_vocab = 0;
    std::size_t word_vocab = 0;

    // min(max_filters, filters_per_width * width)
    std::size_t filters(std::size_t width) const;
    std::size_t char_feature_dim() const;
    std::size_t lstm_input_dim() const { return word_dim + char_feature_dim(); }

    nlohmann::json to_json() const;
    static Architecture from_json(const nlohmann::json& j);
    bool operator==(const Architecture&) const = default;
};

// Differences between two architectures as "field: a != b" strings.
std::vector<std::string> architecture_mismatches(const Architecture& expected, const Architecture& actual);

struct LstmParams {
    // Each gate matrix is [H x (H + D_in)] and acts on [h_{t-1}, x_t].
    Tensor W_i, W_f, W_o, W_g;
    Tensor b_i, b_f, b_o, b_g;

    static LstmParams init(std::size_t hidden, std::size_t input, Rng& rng);
    void collect(NamedParams& out, const std::string& prefix) const;
    std::size_t hidden() const { return b_i.size(); }
};

struct CnnFilterBank {
    std::vector<Tensor> weights;  // width w at index w-1: [n_w x D_c x w]
    std::vector<Tensor> biases;   // [n_w]

    std::size_t widest() const { return weights.size(); }
};

struct EncoderParams {
    Tensor char_emb;  // [V_c x D_c], PAD row fixed at zero
    CnnFilterBank cnn;
    Tensor word_emb;  // [V x D]
    LstmParams forward;
    LstmParams backward;

    // Character table Xavier-initialised, filters Xavier with zero bias, LSTMs
    // uniform in (-0.005, 0.005). `word_emb` is taken as given.
    static EncoderParams init(const Architecture& arch, Tensor word_emb, Rng& rng);

    void collect(NamedParams& out, const std::string& prefix = "encoder") const;
};

struct LstmState {
    Tensor h;
    Tensor c;
};

// One LSTM cell update, written out gate by gate:
//   i = sigma(W_i [h, x] + b_i), f = sigma(W_f [h, x] + b_f), o = sigma(W_o [h, x] + b_o)
//   g = tanh(W_g [h, x] + b_g), c' = f * c + i * g, h' = o * tanh(c')
// All vectors are rank 1.
LstmState lstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const LstmParams& params);

// Character features of one word given its padded id row. Windows run over the
// word right-padded to max(length, widest filter); PAD ids past that floor are
// ignored, so the result does not depend on how much batch padding the row carries.
Tensor char_cnn(const EncoderParams& params, const Architecture& arch, std::span<const int> padded_row);

struct EncodeOptions {
    bool training = false;
    double dropout = 0.5;
    Rng* rng = nullptr;  // required when training with dropout > 0
};

struct Encoded {
    Tensor forward;   // [N x H]
    Tensor backward;  // [N x H], row t has consumed tokens N-1 .. t
    Tensor joint;     // [N x 2H] = [forward, backward]
};

// Runs both LSTMs from zero initial states. Dropout, when training, hits the
// LSTM input x_t = [word embedding, char features] and each direction's output.
Encoded encode(const EncoderParams& params, const Architecture& arch, const Sentence& sentence,
               const EncodeOptions& options = {});

// Character features for every word of a sentence, [N x char_feature_dim].
Tensor char_features(const EncoderParams& params, const Architecture& arch, const Sentence& sentence);

}  // namespace bioner
