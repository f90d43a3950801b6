#include "bioner/encoder.hpp"

#include <algorithm>

#include "bioner/embeddings.hpp"
#include "bioner/errors.hpp"

namespace bioner {

std::size_t Architecture::filters(std::size_t width) const { return std::min(max_filters, filters_per_width * width); }

std::size_t Architecture::char_feature_dim() const {
    std::size_t total = 0;
    for (std::size_t w = 1; w <= max_filter_width; ++w) total += filters(w);
    return total;
}

nlohmann::json Architecture::to_json() const {
    return {{"char_dim", char_dim},
            {"word_dim", word_dim},
            {"hidden", hidden},
            {"max_filter_width", max_filter_width},
            {"filters_per_width", filters_per_width},
            {"max_filters", max_filters},
            {"conv_activation", conv_activation == Activation::ReLU ? "relu" : "tanh"},
            {"char_vocab", char_vocab},
            {"word_vocab", word_vocab}};
}

Architecture Architecture::from_json(const nlohmann::json& j) {
    Architecture a;
    a.char_dim = j.value("char_dim", a.char_dim);
    a.word_dim = j.value("word_dim", a.word_dim);
    a.hidden = j.value("hidden", a.hidden);
    a.max_filter_width = j.value("max_filter_width", a.max_filter_width);
    a.filters_per_width = j.value("filters_per_width", a.filters_per_width);
    a.max_filters = j.value("max_filters", a.max_filters);
    const std::string act = j.value("conv_activation", std::string("relu"));
    if (act == "relu") a.conv_activation = Activation::ReLU;
    else if (act == "tanh") a.conv_activation = Activation::Tanh;
    else throw ConfigError("architecture.conv_activation must be relu or tanh, got '" + act + "'");
    a.char_vocab = j.value("char_vocab", a.char_vocab);
    a.word_vocab = j.value("word_vocab", a.word_vocab);
    for (auto v : {a.char_dim, a.word_dim, a.hidden, a.max_filter_width, a.filters_per_width, a.max_filters}) {
        if (v == 0) throw ConfigError("architecture dimensions must be positive");
    }
    return a;
}

std::vector<std::string> architecture_mismatches(const Architecture& expected, const Architecture& actual) {
    std::vector<std::string> out;
    auto ej = expected.to_json();
    auto aj = actual.to_json();
    for (auto it = ej.begin(); it != ej.end(); ++it) {
        if (aj[it.key()] != it.value()) out.push_back(it.key() + ": " + it.value().dump() + " != " + aj[it.key()].dump());
    }
    return out;
}

LstmParams LstmParams::init(std::size_t hidden, std::size_t input, Rng& rng) {
    constexpr double r = 0.005;
    LstmParams p;
    for (Tensor* w : {&p.W_i, &p.W_f, &p.W_o, &p.W_g}) *w = init_uniform({hidden, hidden + input}, -r, r, rng);
    for (Tensor* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_g}) *b = init_uniform({hidden}, -r, r, rng);
    return p;
}

void LstmParams::collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".W_i", W_i);
    out.emplace_back(prefix + ".W_f", W_f);
    out.emplace_back(prefix + ".W_o", W_o);
    out.emplace_back(prefix + ".W_g", W_g);
    out.emplace_back(prefix + ".b_i", b_i);
    out.emplace_back(prefix + ".b_f", b_f);
    out.emplace_back(prefix + ".b_o", b_o);
    out.emplace_back(prefix + ".b_g", b_g);
}

EncoderParams EncoderParams::init(const Architecture& arch, Tensor word_emb, Rng& rng) {
    if (word_emb.rank() != 2 || word_emb.dim(1) != arch.word_dim) {
        throw ContractViolation("word embedding table must be [V x " + std::to_string(arch.word_dim) + "], got " +
                                shape_str(word_emb.shape()));
    }
    EncoderParams p;
    p.char_emb = random_char_table(arch.char_vocab, arch.char_dim, rng).matrix;
    for (std::size_t w = 1; w <= arch.max_filter_width; ++w) {
        p.cnn.weights.push_back(init_xavier({arch.filters(w), arch.char_dim, w}, rng));
        p.cnn.biases.push_back(Tensor::zeros({arch.filters(w)}, true));
    }
    p.word_emb = std::move(word_emb);
    p.word_emb.set_requires_grad(true);
    p.forward = LstmParams::init(arch.hidden, arch.lstm_input_dim(), rng);
    p.backward = LstmParams::init(arch.hidden, arch.lstm_input_dim(), rng);
    return p;
}

void EncoderParams::collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".char_emb", char_emb);
    for (std::size_t i = 0; i < cnn.weights.size(); ++i) {
        const std::string base = prefix + ".cnn.w" + std::to_string(i + 1);
        out.emplace_back(base + ".weight", cnn.weights[i]);
        out.emplace_back(base + ".bias", cnn.biases[i]);
    }
    out.emplace_back(prefix + ".word_emb", word_emb);
    forward.collect(out, prefix + ".lstm_fwd");
    backward.collect(out, prefix + ".lstm_bwd");
}

LstmState lstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const LstmParams& params) {
    const Tensor hx = concat({h, x});
    const Tensor i = sigmoid(add(matmul(hx, params.W_i, true), params.b_i));
    const Tensor f = sigmoid(add(matmul(hx, params.W_f, true), params.b_f));
    const Tensor o = sigmoid(add(matmul(hx, params.W_o, true), params.b_o));
    const Tensor g = tanh(add(matmul(hx, params.W_g, true), params.b_g));
    Tensor c_next = add(mul(f, c), mul(i, g));
    Tensor h_next = mul(o, tanh(c_next));
    return {std::move(h_next), std::move(c_next)};
}

namespace {

Tensor activate(const Tensor& x, Activation a) { return a == Activation::ReLU ? relu(x) : tanh(x); }

// Character ids of a word, cut at the first PAD and re-padded to the floor.
std::vector<int> floor_padded(std::span<const int> row, std::size_t widest) {
    auto end = std::find(row.begin(), row.end(), CharVocab::kPad);
    std::vector<int> ids(row.begin(), end);
    if (ids.empty()) throw ContractViolation("char_cnn: word has no characters");
    if (ids.size() < widest) ids.resize(widest, CharVocab::kPad);
    return ids;
}

Tensor cnn_over_words(const EncoderParams& params, const Architecture& arch,
                      const std::vector<std::vector<int>>& words) {
    const std::size_t widest = params.cnn.widest();
    std::vector<int> all_ids;
    std::vector<std::size_t> lengths;
    for (const auto& w : words) {
        auto ids = floor_padded(w, widest);
        lengths.push_back(ids.size());
        all_ids.insert(all_ids.end(), ids.begin(), ids.end());
    }
    const Tensor chars = gather_rows(params.char_emb, all_ids, CharVocab::kPad);

    std::vector<Tensor> per_word;
    per_word.reserve(words.size());
    std::size_t offset = 0;
    for (auto len : lengths) {
        per_word.push_back(slice(chars, 0, offset, len));
        offset += len;
    }

    std::vector<Tensor> pooled;
    for (std::size_t width = 1; width <= widest; ++width) {
        const Tensor& weight = params.cnn.weights[width - 1];
        const std::size_t n_filters = weight.dim(0);
        const Tensor flat = reshape(weight, {n_filters, arch.char_dim * width});
        std::vector<Tensor> windows;
        std::vector<std::size_t> counts;
        for (std::size_t k = 0; k < per_word.size(); ++k) {
            windows.push_back(unfold(per_word[k], width));
            counts.push_back(lengths[k] - width + 1);
        }
        const Tensor stacked = windows.size() == 1 ? windows[0] : concat(windows, 0);
        const Tensor z = activate(add(matmul(stacked, flat, true), params.cnn.biases[width - 1]), arch.conv_activation);
        pooled.push_back(segment_max_rows(z, counts));
    }
    return concat(pooled, 1);
}

Tensor run_lstm(const Tensor& inputs, const LstmParams& p, bool reverse) {
    const std::size_t n = inputs.dim(0), d = inputs.dim(1), h = p.hidden();
    const Tensor w_all = concat({p.W_i, p.W_f, p.W_o, p.W_g}, 0);
    const Tensor w_h = slice(w_all, 1, 0, h);
    const Tensor w_x = slice(w_all, 1, h, d);
    const Tensor b_all = concat({p.b_i, p.b_f, p.b_o, p.b_g});
    const Tensor projected = add(matmul(inputs, w_x, true), b_all);

    Tensor hid = Tensor::zeros({1, h});
    Tensor cell = Tensor::zeros({1, h});
    std::vector<Tensor> outputs(n);
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t t = reverse ? n - 1 - step : step;
        const Tensor pre = add(slice(projected, 0, t, 1), matmul(hid, w_h, true));
        const Tensor gates = sigmoid(slice(pre, 1, 0, 3 * h));
        const Tensor in_gate = slice(gates, 1, 0, h);
        const Tensor forget = slice(gates, 1, h, h);
        const Tensor out_gate = slice(gates, 1, 2 * h, h);
        const Tensor cand = tanh(slice(pre, 1, 3 * h, h));
        cell = add(mul(forget, cell), mul(in_gate, cand));
        hid = mul(out_gate, tanh(cell));
        outputs[t] = hid;
    }
    return n == 1 ? outputs[0] : concat(outputs, 0);
}

}  // namespace

Tensor char_cnn(const EncoderParams& params, const Architecture& arch, std::span<const int> padded_row) {
    std::vector<std::vector<int>> words{std::vector<int>(padded_row.begin(), padded_row.end())};
    return reshape(cnn_over_words(params, arch, words), {arch.char_feature_dim()});
}

Tensor char_features(const EncoderParams& params, const Architecture& arch, const Sentence& sentence) {
    return cnn_over_words(params, arch, sentence.char_ids);
}

Encoded encode(const EncoderParams& params, const Architecture& arch, const Sentence& sentence,
               const EncodeOptions& options) {
    if (sentence.size() == 0) throw ContractViolation("encode: empty sentence");
    const bool drop = options.training && options.dropout > 0.0;
    if (drop && !options.rng) throw ContractViolation("encode: dropout needs an rng");

    const Tensor words = gather_rows(params.word_emb, sentence.word_ids);
    Tensor x = concat({words, char_features(params, arch, sentence)}, 1);
    if (drop) x = dropout(x, options.dropout, true, *options.rng);

    Encoded out;
    out.forward = run_lstm(x, params.forward, false);
    out.backward = run_lstm(x, params.backward, true);
    if (drop) {
        out.forward = dropout(out.forward, options.dropout, true, *options.rng);
        out.backward = dropout(out.backward, options.dropout, true, *options.rng);
    }
    out.joint = concat({out.forward, out.backward}, 1);
    return out;
}

}  // namespace bioner
