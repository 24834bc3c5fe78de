#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nvsm/errors.hpp"

namespace nvsm {

// Single-file container for named tensors, used for both models and
// persisted document stores.
//
//   magic "NVSM" | u32 version
//   metadata: u32 d_w | u32 d_d | u32 n | u64 vocab_size | u64 doc_count
//           | u64 iteration | u64 vocabulary_hash
//   u32 record_count
//   record: u32 name_len | name utf-8 | u8 element_type | u8 rank
//         | u64 dims[rank] | payload (row-major, little-endian)
//
// Element types: 1 = f32, 2 = i64, 3 = u8. Readers reject unknown versions
// and element types.

inline constexpr char kContainerMagic[4] = {'N', 'V', 'S', 'M'};
inline constexpr std::uint32_t kContainerVersion = 1;

enum class ElementType : std::uint8_t { F32 = 1, I64 = 2, U8 = 3 };

struct ContainerMetadata {
    std::uint32_t word_dim = 0;
    std::uint32_t doc_dim = 0;
    std::uint32_t ngram_width = 0;
    std::uint64_t vocab_size = 0;
    std::uint64_t doc_count = 0;
    std::uint64_t iteration = 0;
    std::uint64_t vocabulary_hash = 0;
};

struct TensorRecord {
    std::string name;
    ElementType type = ElementType::U8;
    std::vector<std::uint64_t> dims;
    std::vector<unsigned char> payload;

    std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

namespace detail {

inline void put_bytes(std::vector<unsigned char>& out, std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
    const unsigned char* p;
    const unsigned char* end;

    std::uint64_t take(int n) {
        if (end - p < n) throw DataError("container: truncated file");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += n;
        return v;
    }

    void take_raw(void* dst, std::size_t n) {
        if (static_cast<std::size_t>(end - p) < n) throw DataError("container: truncated file");
        std::memcpy(dst, p, n);
        p += n;
    }
};

}  // namespace detail

inline std::size_t element_size(ElementType t) {
    switch (t) {
        case ElementType::F32: return 4;
        case ElementType::I64: return 8;
        case ElementType::U8: return 1;
    }
    throw DataError("container: unknown element type");
}

inline TensorRecord make_f32_record(std::string name, std::vector<std::uint64_t> dims,
                                    const double* values, std::size_t count) {
    TensorRecord rec{std::move(name), ElementType::F32, std::move(dims), {}};
    rec.payload.reserve(count * 4);
    for (std::size_t i = 0; i < count; ++i) {
        const float f = static_cast<float>(values[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_bytes(rec.payload, bits, 4);
    }
    return rec;
}

inline TensorRecord make_i64_record(std::string name, std::vector<std::uint64_t> dims,
                                    const std::int64_t* values, std::size_t count) {
    TensorRecord rec{std::move(name), ElementType::I64, std::move(dims), {}};
    rec.payload.reserve(count * 8);
    for (std::size_t i = 0; i < count; ++i) {
        detail::put_bytes(rec.payload, static_cast<std::uint64_t>(values[i]), 8);
    }
    return rec;
}

inline TensorRecord make_u8_record(std::string name, const std::string& bytes) {
    TensorRecord rec{std::move(name), ElementType::U8, {bytes.size()}, {}};
    rec.payload.assign(bytes.begin(), bytes.end());
    return rec;
}

inline std::vector<double> f32_values(const TensorRecord& rec) {
    if (rec.type != ElementType::F32) throw DataError("container: record '" + rec.name + "' is not f32");
    const std::size_t n = rec.payload.size() / 4;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(rec.payload[i * 4 + b]) << (8 * b);
        float f;
        std::memcpy(&f, &bits, 4);
        out[i] = static_cast<double>(f);
    }
    return out;
}

inline std::vector<std::int64_t> i64_values(const TensorRecord& rec) {
    if (rec.type != ElementType::I64) throw DataError("container: record '" + rec.name + "' is not i64");
    const std::size_t n = rec.payload.size() / 8;
    std::vector<std::int64_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(rec.payload[i * 8 + b]) << (8 * b);
        out[i] = static_cast<std::int64_t>(bits);
    }
    return out;
}

inline std::string u8_string(const TensorRecord& rec) {
    if (rec.type != ElementType::U8) throw DataError("container: record '" + rec.name + "' is not u8");
    return std::string(rec.payload.begin(), rec.payload.end());
}

struct Container {
    ContainerMetadata metadata;
    std::vector<TensorRecord> records;

    const TensorRecord& require(const std::string& name) const {
        for (const auto& rec : records) {
            if (rec.name == name) return rec;
        }
        throw DataError("container: missing record '" + name + "'");
    }

    bool has(const std::string& name) const {
        for (const auto& rec : records) {
            if (rec.name == name) return true;
        }
        return false;
    }
};

inline void write_container(const std::filesystem::path& path, const Container& container) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kContainerMagic, kContainerMagic + 4);
    detail::put_bytes(buf, kContainerVersion, 4);
    const auto& md = container.metadata;
    detail::put_bytes(buf, md.word_dim, 4);
    detail::put_bytes(buf, md.doc_dim, 4);
    detail::put_bytes(buf, md.ngram_width, 4);
    detail::put_bytes(buf, md.vocab_size, 8);
    detail::put_bytes(buf, md.doc_count, 8);
    detail::put_bytes(buf, md.iteration, 8);
    detail::put_bytes(buf, md.vocabulary_hash, 8);
    detail::put_bytes(buf, container.records.size(), 4);
    for (const auto& rec : container.records) {
        detail::put_bytes(buf, rec.name.size(), 4);
        buf.insert(buf.end(), rec.name.begin(), rec.name.end());
        buf.push_back(static_cast<unsigned char>(rec.type));
        buf.push_back(static_cast<unsigned char>(rec.dims.size()));
        for (auto d : rec.dims) detail::put_bytes(buf, d, 8);
        if (rec.payload.size() != rec.element_count() * element_size(rec.type)) {
            throw DataError("container: record '" + rec.name + "' payload does not match dims");
        }
        buf.insert(buf.end(), rec.payload.begin(), rec.payload.end());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("failed writing: " + path.string());
}

inline Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open container: " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::ByteReader r{buf.data(), buf.data() + buf.size()};

    char magic[4];
    r.take_raw(magic, 4);
    if (std::memcmp(magic, kContainerMagic, 4) != 0) {
        throw DataError("not a model/store container: " + path.string());
    }
    const auto version = static_cast<std::uint32_t>(r.take(4));
    if (version != kContainerVersion) {
        throw DataError("unsupported container version " + std::to_string(version) + " in " +
                        path.string());
    }
    Container container;
    auto& md = container.metadata;
    md.word_dim = static_cast<std::uint32_t>(r.take(4));
    md.doc_dim = static_cast<std::uint32_t>(r.take(4));
    md.ngram_width = static_cast<std::uint32_t>(r.take(4));
    md.vocab_size = r.take(8);
    md.doc_count = r.take(8);
    md.iteration = r.take(8);
    md.vocabulary_hash = r.take(8);
    const auto record_count = static_cast<std::uint32_t>(r.take(4));
    container.records.reserve(record_count);
    for (std::uint32_t i = 0; i < record_count; ++i) {
        TensorRecord rec;
        const auto name_len = static_cast<std::uint32_t>(r.take(4));
        rec.name.resize(name_len);
        r.take_raw(rec.name.data(), name_len);
        const auto type = static_cast<std::uint8_t>(r.take(1));
        if (type < 1 || type > 3) {
            throw DataError("container: unknown element type in record '" + rec.name + "'");
        }
        rec.type = static_cast<ElementType>(type);
        const auto rank = static_cast<std::uint8_t>(r.take(1));
        rec.dims.resize(rank);
        for (auto& d : rec.dims) d = r.take(8);
        const std::uint64_t bytes = rec.element_count() * element_size(rec.type);
        rec.payload.resize(bytes);
        r.take_raw(rec.payload.data(), bytes);
        container.records.push_back(std::move(rec));
    }
    return container;
}

}  // namespace nvsm
