#ifndef GCPA_CORE_ARCHIVE_HPP
#define GCPA_CORE_ARCHIVE_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcpa/core/tensor.hpp"

namespace gcpa {

// Flat container of named tensors plus a free-form JSON metadata object.
// Used both for checkpoints and for pretrained backbone weights.
//
// On-disk layout:
//   "GCPA" magic | u32 version | u64 header length | JSON header | payload
// The header is {"meta": ..., "tensors": {name: {dtype, shape, offset,
// bytes, fnv1a}}} with offsets relative to the payload start. Payloads are
// raw native little-endian; per-entry FNV-1a checksums are verified on load.
class TensorArchive {
public:
    template <typename T>
    void put(const std::string& name, const Tensor<T>& t) {
        Entry e;
        e.dtype = dtype_name<T>();
        e.shape = t.shape();
        e.data.resize(static_cast<size_t>(t.numel()) * sizeof(T));
        std::memcpy(e.data.data(), t.data(), e.data.size());
        entries_[name] = std::move(e);
    }

    template <typename T>
    Tensor<T> get(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end())
            throw std::runtime_error("archive has no tensor named '" + name + "'");
        const Entry& e = it->second;
        if (e.dtype != dtype_name<T>())
            throw std::runtime_error("tensor '" + name + "' has dtype " + e.dtype +
                                     ", requested " + dtype_name<T>());
        Tensor<T> t(e.shape);
        std::memcpy(t.data(), e.data.data(), e.data.size());
        return t;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    void erase(const std::string& name) { entries_.erase(name); }
    size_t size() const { return entries_.size(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [k, v] : entries_) out.push_back(k);
        return out;
    }

    const std::vector<long>& shape(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end())
            throw std::runtime_error("archive has no tensor named '" + name + "'");
        return it->second.shape;
    }

    nlohmann::json& meta() { return meta_; }
    const nlohmann::json& meta() const { return meta_; }

    // Writes temp-then-rename so a crash never leaves a half-written file at
    // `path`. Entries are stored in name order, so equal content yields
    // byte-identical files.
    void save(const std::string& path) const {
        nlohmann::json tensors = nlohmann::json::object();
        std::uint64_t offset = 0;
        for (const auto& [name, e] : entries_) {
            tensors[name] = {{"dtype", e.dtype},
                             {"shape", e.shape},
                             {"offset", offset},
                             {"bytes", e.data.size()},
                             {"fnv1a", hex64(fnv1a64(e.data.data(), e.data.size()))}};
            offset += e.data.size();
        }
        std::string header = nlohmann::json{{"meta", meta_}, {"tensors", tensors}}.dump();

        std::string tmp = path + ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) throw std::runtime_error("cannot write archive " + tmp);
            f.write(kMagic, 4);
            write_u32(f, kVersion);
            write_u64(f, header.size());
            f.write(header.data(), static_cast<std::streamsize>(header.size()));
            for (const auto& [name, e] : entries_)
                f.write(e.data.data(), static_cast<std::streamsize>(e.data.size()));
            f.flush();
            if (!f) throw std::runtime_error("write failed for archive " + tmp);
        }
        std::filesystem::rename(tmp, path);
    }

    static TensorArchive load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open archive " + path);
        std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

        if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 4) != 0)
            throw std::runtime_error(path + " is not a tensor archive");
        std::uint32_t version;
        std::memcpy(&version, raw.data() + 4, 4);
        if (version != kVersion)
            throw std::runtime_error("unsupported archive version " + std::to_string(version));
        std::uint64_t hlen;
        std::memcpy(&hlen, raw.data() + 8, 8);
        if (16 + hlen > raw.size()) throw std::runtime_error("truncated archive " + path);

        nlohmann::json header;
        try {
            header = nlohmann::json::parse(raw.substr(16, hlen));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("corrupt archive header in " + path + ": " + e.what());
        }

        TensorArchive ar;
        ar.meta_ = header.value("meta", nlohmann::json::object());
        const char* payload = raw.data() + 16 + hlen;
        std::uint64_t payload_size = raw.size() - 16 - hlen;
        for (const auto& [name, j] : header.at("tensors").items()) {
            Entry e;
            e.dtype = j.at("dtype").get<std::string>();
            e.shape = j.at("shape").get<std::vector<long>>();
            std::uint64_t off = j.at("offset").get<std::uint64_t>();
            std::uint64_t bytes = j.at("bytes").get<std::uint64_t>();
            if (off + bytes > payload_size)
                throw std::runtime_error("truncated archive " + path + " at tensor '" + name + "'");
            long numel = 1;
            for (long d : e.shape) numel *= d;
            if (bytes != static_cast<std::uint64_t>(numel) * dtype_size(e.dtype))
                throw std::runtime_error("corrupt size for tensor '" + name + "' in " + path);
            if (hex64(fnv1a64(payload + off, bytes)) != j.at("fnv1a").get<std::string>())
                throw std::runtime_error("checksum mismatch for tensor '" + name + "' in " + path);
            e.data.assign(payload + off, payload + off + bytes);
            ar.entries_[name] = std::move(e);
        }
        return ar;
    }

private:
    struct Entry {
        std::string dtype;
        std::vector<long> shape;
        std::vector<char> data;
    };

    static constexpr const char* kMagic = "GCPA";
    static constexpr std::uint32_t kVersion = 1;

    template <typename T>
    static std::string dtype_name() {
        if constexpr (std::is_same_v<T, float>) return "f32";
        else if constexpr (std::is_same_v<T, double>) return "f64";
        else static_assert(!sizeof(T), "unsupported archive dtype");
    }

    static size_t dtype_size(const std::string& dtype) {
        if (dtype == "f32") return 4;
        if (dtype == "f64") return 8;
        throw std::runtime_error("unknown dtype '" + dtype + "' in archive");
    }

    static std::uint64_t fnv1a64(const char* p, size_t n) {
        std::uint64_t h = 1469598103934665603ull;
        for (size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(p[i]);
            h *= 1099511628211ull;
        }
        return h;
    }

    static std::string hex64(std::uint64_t v) {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
        return buf;
    }

    static void write_u32(std::ofstream& f, std::uint32_t v) {
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    static void write_u64(std::ofstream& f, std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    }

    std::map<std::string, Entry> entries_;
    nlohmann::json meta_ = nlohmann::json::object();
};

}  // namespace gcpa

#endif
