#include "bioner/config.hpp"

#include <set>

#include "bioner/errors.hpp"
#include "bioner/fileio.hpp"

namespace bioner {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void reject_unknown(const json& block, const std::string& where, const std::set<std::string>& allowed) {
    if (!block.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = block.begin(); it != block.end(); ++it) {
        if (!allowed.count(it.key())) throw ConfigError(where + "." + it.key() + ": unknown key");
    }
}

template <class T>
void read(const json& block, const std::string& where, const std::string& key, T& out) {
    if (!block.contains(key)) return;
    try {
        out = block.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type (" + block.at(key).dump() + ")");
    }
}

template <class T>
void read_positive(const json& block, const std::string& where, const std::string& key, T& out) {
    read(block, where, key, out);
    if (!(out > 0)) throw ConfigError(where + "." + key + ": must be positive");
}

std::optional<fs::path> read_path(const json& block, const std::string& key, const fs::path& base) {
    if (!block.contains(key) || block.at(key).is_null()) return std::nullopt;
    if (!block.at(key).is_string()) throw ConfigError("paths." + key + ": expected a string");
    fs::path p = block.at(key).get<std::string>();
    return p.is_relative() && !base.empty() ? base / p : p;
}

void read_adam(const json& block, const std::string& where, AdamConfig& adam) {
    read_positive(block, where, "lr", adam.lr);
    read(block, where, "beta1", adam.beta1);
    read(block, where, "beta2", adam.beta2);
    read_positive(block, where, "eps", adam.eps);
}

void read_decay(const json& block, const std::string& where, double& decay) {
    read(block, where, "lr_decay", decay);
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError(where + ".lr_decay: must lie in (0, 1]");
}

void read_dropout(const json& block, const std::string& where, double& p) {
    read(block, where, "dropout", p);
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError(where + ".dropout: must lie in [0, 1)");
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
    seed = s;
    lm.seed = s;
    train.seed = s;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
    RunConfig c;
    reject_unknown(j, "config",
                   {"paths", "architecture", "text", "lm", "train", "mode", "head", "crf_boundary",
                    "retrain_on_train_dev", "random_embedding_range", "seed"});

    if (j.contains("paths")) {
        const json& p = j["paths"];
        reject_unknown(p, "paths", {"train", "dev", "test", "unlabeled", "embeddings", "lm_checkpoint", "model"});
        c.paths.train = read_path(p, "train", base);
        c.paths.dev = read_path(p, "dev", base);
        c.paths.test = read_path(p, "test", base);
        c.paths.embeddings = read_path(p, "embeddings", base);
        c.paths.lm_checkpoint = read_path(p, "lm_checkpoint", base);
        c.paths.model = read_path(p, "model", base);
        if (p.contains("unlabeled")) {
            if (!p["unlabeled"].is_array()) throw ConfigError("paths.unlabeled: expected a list of paths");
            for (const auto& u : p["unlabeled"]) {
                if (!u.is_string()) throw ConfigError("paths.unlabeled: expected a list of paths");
                fs::path up = u.get<std::string>();
                c.paths.unlabeled.push_back(up.is_relative() && !base.empty() ? base / up : up);
            }
        }
    }

    if (j.contains("architecture")) {
        const json& a = j["architecture"];
        reject_unknown(a, "architecture",
                       {"char_dim", "word_dim", "hidden", "max_filter_width", "filters_per_width", "max_filters",
                        "conv_activation"});
        for (const auto& key : {"char_dim", "word_dim", "hidden", "max_filter_width", "filters_per_width", "max_filters"}) {
            if (a.contains(key) && !(a[key].is_number_unsigned() && a[key].get<std::size_t>() > 0)) {
                throw ConfigError(std::string("architecture.") + key + ": must be a positive integer");
            }
        }
        c.arch = Architecture::from_json(a);
    }

    if (j.contains("text")) {
        const json& t = j["text"];
        reject_unknown(t, "text", {"num_to_chars", "number_pattern"});
        read(t, "text", "num_to_chars", c.text.num_to_chars);
        read(t, "text", "number_pattern", c.text.number_pattern);
    }

    if (j.contains("lm")) {
        const json& l = j["lm"];
        reject_unknown(l, "lm",
                       {"epochs", "word_budget", "lambda_lm", "clip_norm", "dropout", "lr", "beta1", "beta2", "eps",
                        "lr_decay", "patience", "holdout_fraction"});
        read_positive(l, "lm", "epochs", c.lm.epochs);
        read_positive(l, "lm", "word_budget", c.lm.word_budget);
        read_positive(l, "lm", "lambda_lm", c.lm.lambda_lm);
        read_positive(l, "lm", "clip_norm", c.lm.clip_norm);
        read_dropout(l, "lm", c.lm.dropout);
        read_adam(l, "lm", c.lm.adam);
        read_decay(l, "lm", c.lm.lr_decay);
        read_positive(l, "lm", "patience", c.lm.patience);
        read(l, "lm", "holdout_fraction", c.lm.holdout_fraction);
        if (!(c.lm.holdout_fraction >= 0.0 && c.lm.holdout_fraction < 1.0)) {
            throw ConfigError("lm.holdout_fraction: must lie in [0, 1)");
        }
    }

    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, "train",
                       {"epochs", "word_budget", "clip_norm", "dropout", "lr", "beta1", "beta2", "eps", "lr_decay",
                        "patience", "stop_at_f1"});
        read_positive(t, "train", "epochs", c.train.epochs);
        read_positive(t, "train", "word_budget", c.train.word_budget);
        read_positive(t, "train", "clip_norm", c.train.clip_norm);
        read_dropout(t, "train", c.train.dropout);
        read_adam(t, "train", c.train.adam);
        read_decay(t, "train", c.train.lr_decay);
        read_positive(t, "train", "patience", c.train.patience);
        if (t.contains("stop_at_f1")) {
            double f = 0.0;
            read(t, "train", "stop_at_f1", f);
            c.train.stop_at_f1 = f;
        }
    }

    if (j.contains("mode")) {
        if (!j["mode"].is_string()) throw ConfigError("mode: expected a string");
        c.mode = parse_mode(j["mode"].get<std::string>());
    }
    if (j.contains("head")) {
        if (!j["head"].is_string()) throw ConfigError("head: expected a string");
        c.head = parse_head(j["head"].get<std::string>());
    }
    read(j, "config", "crf_boundary", c.crf_boundary);
    read(j, "config", "retrain_on_train_dev", c.retrain_on_train_dev);
    read_positive(j, "config", "random_embedding_range", c.random_embedding_range);
    std::uint64_t seed = c.seed;
    read(j, "config", "seed", seed);
    c.set_seed(seed);
    return c;
}

RunConfig RunConfig::load(const fs::path& file) {
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": invalid JSON: " + e.what());
    } catch (const DataError& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    RunConfig c = from_json(j, file.parent_path());
    require_file(c.paths.train, "paths.train");
    require_file(c.paths.dev, "paths.dev");
    require_file(c.paths.test, "paths.test");
    require_file(c.paths.embeddings, "paths.embeddings");
    for (std::size_t i = 0; i < c.paths.unlabeled.size(); ++i) {
        require_file(c.paths.unlabeled[i], "paths.unlabeled[" + std::to_string(i) + "]");
    }
    return c;
}

json RunConfig::to_json() const {
    auto opt = [](const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); };
    json unl = json::array();
    for (const auto& u : paths.unlabeled) unl.push_back(u.string());
    json arch_j = arch.to_json();
    arch_j.erase("char_vocab");
    arch_j.erase("word_vocab");
    json train_j{{"epochs", train.epochs},       {"word_budget", train.word_budget}, {"clip_norm", train.clip_norm},
                 {"dropout", train.dropout},     {"lr", train.adam.lr},              {"beta1", train.adam.beta1},
                 {"beta2", train.adam.beta2},    {"eps", train.adam.eps},            {"lr_decay", train.lr_decay},
                 {"patience", train.patience}};
    if (train.stop_at_f1) train_j["stop_at_f1"] = *train.stop_at_f1;
    return {{"paths",
             {{"train", opt(paths.train)},
              {"dev", opt(paths.dev)},
              {"test", opt(paths.test)},
              {"unlabeled", unl},
              {"embeddings", opt(paths.embeddings)},
              {"lm_checkpoint", opt(paths.lm_checkpoint)},
              {"model", opt(paths.model)}}},
            {"architecture", arch_j},
            {"text", {{"num_to_chars", text.num_to_chars}, {"number_pattern", text.number_pattern}}},
            {"lm",
             {{"epochs", lm.epochs},
              {"word_budget", lm.word_budget},
              {"lambda_lm", lm.lambda_lm},
              {"clip_norm", lm.clip_norm},
              {"dropout", lm.dropout},
              {"lr", lm.adam.lr},
              {"beta1", lm.adam.beta1},
              {"beta2", lm.adam.beta2},
              {"eps", lm.adam.eps},
              {"lr_decay", lm.lr_decay},
              {"patience", lm.patience},
              {"holdout_fraction", lm.holdout_fraction}}},
            {"train", train_j},
            {"mode", to_string(mode)},
            {"head", to_string(head)},
            {"crf_boundary", crf_boundary},
            {"retrain_on_train_dev", retrain_on_train_dev},
            {"random_embedding_range", random_embedding_range},
            {"seed", seed}};
}

void require_file(const std::optional<fs::path>& path, const std::string& field) {
    if (path && !fs::is_regular_file(*path)) throw ConfigError(field + ": file not found: " + path->string());
}

}  // namespace bioner
