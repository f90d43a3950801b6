#pragma once

/**
 * Named-tensor container.
 *
 * On-disk layout (all integers little-endian):
 *
 *   "BNCK"                      magic
 *   u32 version                 currently 1
 *   u32 meta_len, meta bytes    architecture metadata as UTF-8 JSON
 *   u32 entry_count
 *   entry_count x {
 *     u32 name_len, name bytes  dotted path, e.g. "encoder.char_emb"
 *     u32 rank, u32 dims[rank]
 *     u64 offset                byte offset into the payload
 *   }
 *   payload                     little-endian IEEE-754 float32 values
 *
 * Values are rounded to float32 when they enter the container, so a tensor
 * rebuilt from a checkpoint is identical whether or not the file round trip
 * happened in between.
 */

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bioner/tensor.hpp"

namespace bioner {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

struct CheckpointEntry {
    Shape shape;
    std::vector<float> values;
};

class Checkpoint {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    nlohmann::json metadata = nlohmann::json::object();

    void put(const std::string& name, const Tensor& tensor);
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    const CheckpointEntry& entry(const std::string& name) const;
    Tensor tensor(const std::string& name, bool requires_grad = true) const;
    void erase(const std::string& name) { entries_.erase(name); }

    void put_all(const NamedParams& params);
    // Overwrites each tensor's values in place. DataError when an entry is
    // missing or its shape differs.
    void load_into(const NamedParams& params) const;

    // Sorted entry names.
    std::vector<std::string> names() const;
    std::vector<std::string> names_with_prefix(std::string_view prefix) const;
    std::size_t size() const { return entries_.size(); }

    std::string serialize() const;
    static Checkpoint deserialize(std::string_view bytes);

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

private:
    std::map<std::string, CheckpointEntry> entries_;
};

}  // namespace bioner
