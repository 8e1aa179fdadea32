// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "stereolab/error.hpp"
#include "stereolab/version.hpp"

namespace stereolab {

namespace {
constexpr char kMagic[8] = {'S', 'L', 'C', 'K', 'P', 'T', '1', '\n'};

void put_u64le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64le(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}
} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json manifest;
    manifest["config_hash"] = ckpt.config_hash;
    manifest["seed"] = ckpt.seed;
    manifest["version"] = ckpt.version.empty() ? std::string(kVersion) : ckpt.version;
    manifest["meta"] = ckpt.meta;
    nlohmann::json arrays = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.arrays) { // std::map order: deterministic
        nlohmann::json a;
        a["name"] = name;
        a["shape"] = t.shape();
        a["offset"] = offset;
        a["count"] = t.size();
        arrays.push_back(a);
        offset += static_cast<std::uint64_t>(t.size()) * 8;
    }
    manifest["arrays"] = arrays;
    const std::string mjson = manifest.dump();

    std::string out(kMagic, sizeof kMagic);
    put_u64le(out, mjson.size());
    out += mjson;
    for (const auto& [name, t] : ckpt.arrays) {
        for (std::int64_t i = 0; i < t.size(); ++i) {
            const auto bits = std::bit_cast<std::uint64_t>(t[i]);
            put_u64le(out, bits);
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open checkpoint " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write to checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + 8 || bytes.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0)
        throw FormatError(path + ": not a stereolab checkpoint", 0);

    const std::uint64_t mlen = get_u64le(bytes.data() + sizeof(kMagic));
    const std::size_t mstart = sizeof(kMagic) + 8;
    if (bytes.size() < mstart + mlen) throw FormatError(path + ": truncated manifest", static_cast<long>(bytes.size()));

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(mstart, mlen));
    } catch (const std::exception& e) {
        throw FormatError(path + ": bad manifest json: " + e.what(), static_cast<long>(mstart));
    }

    Checkpoint ckpt;
    ckpt.config_hash = manifest.value("config_hash", "");
    ckpt.seed = manifest.value("seed", 0ull);
    ckpt.version = manifest.value("version", "");
    if (manifest.contains("meta"))
        for (const auto& [k, v] : manifest["meta"].items()) ckpt.meta[k] = v.get<std::string>();

    const std::size_t data_start = mstart + mlen;
    for (const auto& a : manifest["arrays"]) {
        const std::string name = a["name"].get<std::string>();
        const std::vector<int> shape = a["shape"].get<std::vector<int>>();
        const std::uint64_t offset = a["offset"].get<std::uint64_t>();
        const std::int64_t count = a["count"].get<std::int64_t>();
        Tensor t(shape);
        if (t.size() != count) throw FormatError(path + ": shape/count mismatch for " + name, static_cast<long>(offset));
        const std::size_t start = data_start + offset;
        if (bytes.size() < start + static_cast<std::size_t>(count) * 8)
            throw FormatError(path + ": truncated array " + name, static_cast<long>(bytes.size()));
        for (std::int64_t i = 0; i < count; ++i)
            t[i] = std::bit_cast<double>(get_u64le(bytes.data() + start + static_cast<std::size_t>(i) * 8));
        ckpt.arrays.emplace(name, std::move(t));
    }
    return ckpt;
}

} // namespace stereolab
