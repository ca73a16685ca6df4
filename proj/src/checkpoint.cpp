// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include "deepbroadcast/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace deepbroadcast::ckpt {

namespace {

constexpr char kMagic[4] = {'D', 'B', 'C', 'K'};

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& off) {
    if (off + sizeof(T) > in.size()) throw checkpoint_error("checkpoint truncated");
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
    static const auto table = make_crc_table();
    std::uint32_t c = seed ^ 0xffffffffu;
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

void save(const Checkpoint& c, const std::string& path) {
    nlohmann::json header;
    header["variant"] = c.variant;
    header["epoch"] = c.epoch;
    header["adam_step"] = c.adam_step;
    header["config"] = c.config_text;
    header["metrics"] = c.metrics_json;

    std::uint64_t offset = 0;
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& [name, t] : c.arrays) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = t.shape;
        entry["offset"] = offset;
        dir.push_back(entry);
        offset += static_cast<std::uint64_t>(t.numel()) * sizeof(float);
    }
    header["arrays"] = dir;
    const std::string header_str = header.dump();

    std::string blob;
    blob.reserve(header_str.size() + offset + 64);
    blob.append(kMagic, 4);
    put<std::uint32_t>(blob, Checkpoint::kVersion);
    put<std::uint64_t>(blob, header_str.size());
    blob += header_str;
    for (const auto& [name, t] : c.arrays)
        blob.append(reinterpret_cast<const char*>(t.data()), t.v.size() * sizeof(float));
    put<std::uint32_t>(blob, crc32(blob.data(), blob.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw checkpoint_error("cannot write checkpoint: " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw checkpoint_error("short write for checkpoint: " + path);
}

Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw checkpoint_error("cannot open checkpoint: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < 4 + 4 + 8 + 4) throw checkpoint_error("checkpoint too small: " + path);

    const std::uint32_t stored_crc = [&] {
        std::size_t off = blob.size() - 4;
        return take<std::uint32_t>(blob, off);
    }();
    if (crc32(blob.data(), blob.size() - 4) != stored_crc)
        throw checkpoint_error("checkpoint integrity check failed (crc mismatch): " + path);

    std::size_t off = 0;
    if (std::memcmp(blob.data(), kMagic, 4) != 0)
        throw checkpoint_error("not a checkpoint file: " + path);
    off += 4;
    const auto version = take<std::uint32_t>(blob, off);
    if (version != Checkpoint::kVersion)
        throw checkpoint_error("unsupported checkpoint version " + std::to_string(version));
    const auto header_len = take<std::uint64_t>(blob, off);
    if (off + header_len > blob.size() - 4) throw checkpoint_error("checkpoint truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(off, header_len));
    } catch (const std::exception& e) {
        throw checkpoint_error(std::string("corrupt checkpoint header: ") + e.what());
    }
    off += header_len;

    Checkpoint c;
    c.variant = header.at("variant").get<std::string>();
    c.epoch = header.at("epoch").get<std::int64_t>();
    c.adam_step = header.at("adam_step").get<std::int64_t>();
    c.config_text = header.at("config").get<std::string>();
    c.metrics_json = header.value("metrics", std::string());
    const std::size_t payload_base = off;
    for (const auto& entry : header.at("arrays")) {
        Tensor<float> t(entry.at("shape").get<std::vector<std::int64_t>>());
        const auto aoff = entry.at("offset").get<std::uint64_t>();
        const std::size_t bytes = t.v.size() * sizeof(float);
        if (payload_base + aoff + bytes > blob.size() - 4)
            throw checkpoint_error("checkpoint payload truncated: " + path);
        std::memcpy(t.data(), blob.data() + payload_base + aoff, bytes);
        c.arrays.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    return c;
}

}  // namespace deepbroadcast::ckpt
