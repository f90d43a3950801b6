#include "bioner/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "bioner/errors.hpp"
#include "bioner/fileio.hpp"

namespace bioner {

namespace {

constexpr char kMagic[4] = {'B', 'N', 'C', 'K'};

template <typename T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T le() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return v;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& tensor) {
    CheckpointEntry e;
    e.shape = tensor.shape();
    e.values.reserve(tensor.size());
    for (double v : tensor.data()) e.values.push_back(static_cast<float>(v));
    entries_[name] = std::move(e);
}

const CheckpointEntry& Checkpoint::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("checkpoint has no entry '" + name + "'");
    return it->second;
}

Tensor Checkpoint::tensor(const std::string& name, bool requires_grad) const {
    const auto& e = entry(name);
    return Tensor(e.shape, std::vector<double>(e.values.begin(), e.values.end()), requires_grad);
}

void Checkpoint::put_all(const NamedParams& params) {
    for (const auto& [name, t] : params) put(name, t);
}

void Checkpoint::load_into(const NamedParams& params) const {
    for (const auto& [name, t] : params) {
        const auto& e = entry(name);
        if (e.shape != t.shape()) throw DataError("checkpoint entry '" + name + "' has the wrong shape");
        Tensor handle = t;
        std::copy(e.values.begin(), e.values.end(), handle.data().begin());
    }
}

std::vector<std::string> Checkpoint::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::vector<std::string> Checkpoint::names_with_prefix(std::string_view prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) {
        if (std::string_view(k).substr(0, prefix.size()) == prefix) out.push_back(k);
    }
    return out;
}

std::string Checkpoint::serialize() const {
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, kFormatVersion);
    const std::string meta = metadata.dump();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    out += meta;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, e] : entries_) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        put_le<std::uint64_t>(out, offset);
        offset += e.values.size() * sizeof(float);
    }
    for (const auto& [name, e] : entries_) {
        for (float f : e.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(4) != std::string_view(kMagic, 4)) throw DataError("not a checkpoint file (bad magic)");
    auto version = r.le<std::uint32_t>();
    if (version != kFormatVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    auto meta_len = r.le<std::uint32_t>();
    auto meta = r.take(meta_len);
    try {
        ck.metadata = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }
    auto count = r.le<std::uint32_t>();
    struct Pending {
        std::string name;
        Shape shape;
        std::uint64_t offset;
    };
    std::vector<Pending> pending;
    for (std::uint32_t i = 0; i < count; ++i) {
        Pending p;
        p.name = std::string(r.take(r.le<std::uint32_t>()));
        auto rank = r.le<std::uint32_t>();
        for (std::uint32_t d = 0; d < rank; ++d) p.shape.push_back(r.le<std::uint32_t>());
        p.offset = r.le<std::uint64_t>();
        pending.push_back(std::move(p));
    }
    const std::size_t payload = r.pos();
    for (auto& p : pending) {
        const std::size_t n = shape_size(p.shape);
        if (payload + p.offset + n * 4 > bytes.size()) throw DataError("checkpoint entry '" + p.name + "' out of bounds");
        CheckpointEntry e;
        e.shape = p.shape;
        e.values.resize(n);
        Reader vr(bytes.substr(payload + p.offset, n * 4));
        for (auto& f : e.values) f = std::bit_cast<float>(vr.le<std::uint32_t>());
        ck.entries_[p.name] = std::move(e);
    }
    return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace bioner
