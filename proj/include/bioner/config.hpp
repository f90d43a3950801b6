#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "bioner/bilm.hpp"
#include "bioner/embeddings.hpp"
#include "bioner/encoder.hpp"
#include "bioner/ner_model.hpp"
#include "bioner/trainer.hpp"

namespace bioner {

struct RunPaths {
    std::optional<std::filesystem::path> train;
    std::optional<std::filesystem::path> dev;
    std::optional<std::filesystem::path> test;
    std::vector<std::filesystem::path> unlabeled;  // empty: train + dev text
    std::optional<std::filesystem::path> embeddings;
    std::optional<std::filesystem::path> lm_checkpoint;
    std::optional<std::filesystem::path> model;
};

/**
 * Everything a command needs, read from one JSON file:
 *
 *   {
 *     "paths": {"train": "...", "dev": "...", "test": "...", "unlabeled": ["..."],
 *               "embeddings": "...", "lm_checkpoint": "...", "model": "..."},
 *     "architecture": {"char_dim": 50, "word_dim": 300, "hidden": 256, ...},
 *     "text": {"num_to_chars": false},
 *     "lm": {"epochs": 20, "word_budget": 500, "lr": 0.001, ...},
 *     "train": {"epochs": 50, "word_budget": 1000, "lr": 0.001, ...},
 *     "mode": "bilm", "head": "crf", "seed": 1
 *   }
 *
 * Every block is optional and defaults to the published settings. Relative
 * paths are resolved against the config file's directory. Unknown keys are
 * rejected so that typos do not silently fall back to defaults.
 */
struct RunConfig {
    RunPaths paths;
    Architecture arch;
    TextOptions text;
    BiLmConfig lm;
    TrainConfig train;
    PretrainMode mode = PretrainMode::BiLM;
    HeadKind head = HeadKind::Crf;
    bool crf_boundary = true;
    bool retrain_on_train_dev = true;
    // Range of the uniform init used for every word row when no embedding file is given.
    double random_embedding_range = kOovInitRange;
    std::uint64_t seed = 1;

    void set_seed(std::uint64_t s);

    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& file);
    nlohmann::json to_json() const;
};

// ConfigError naming `field` when a configured path does not exist.
void require_file(const std::optional<std::filesystem::path>& path, const std::string& field);

}  // namespace bioner
