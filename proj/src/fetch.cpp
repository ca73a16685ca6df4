// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include "deepbroadcast/fetch.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "deepbroadcast/error.hpp"

#if defined(DEEPBROADCAST_HAVE_ZLIB)
#include <zlib.h>
#endif

#include <httplib.h>

namespace deepbroadcast::fetch {

namespace fs = std::filesystem;

namespace {

#if defined(DEEPBROADCAST_HAVE_ZLIB)
std::vector<char> gunzip_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open archive: " + path);
    std::vector<char> compressed((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
    if (compressed.empty()) throw data_error("empty archive: " + path);

    z_stream strm{};
    if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK)
        throw std::runtime_error("zlib initialization failed");
    std::vector<char> out;
    out.reserve(compressed.size() * 4);
    std::vector<char> buf(1 << 20);
    strm.next_in = reinterpret_cast<Bytef*>(compressed.data());
    strm.avail_in = static_cast<uInt>(compressed.size());
    int rc = Z_OK;
    do {
        strm.next_out = reinterpret_cast<Bytef*>(buf.data());
        strm.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&strm, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            throw data_error("corrupt gzip stream in " + path);
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - strm.avail_out));
    } while (rc != Z_STREAM_END);
    inflateEnd(&strm);
    return out;
}
#endif

std::uint64_t parse_octal(const char* p, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n && p[i]; ++i) {
        if (p[i] == ' ') continue;
        if (p[i] < '0' || p[i] > '7') break;
        v = v * 8 + static_cast<std::uint64_t>(p[i] - '0');
    }
    return v;
}

struct UrlParts {
    std::string scheme, host, path;
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw config_error("malformed url: " + url);
    UrlParts p;
    p.scheme = url.substr(0, scheme_end);
    const auto host_start = scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    p.host = url.substr(host_start, path_start - host_start);
    p.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    return p;
}

}  // namespace

std::vector<std::string> extract_bin_members(const std::string& targz_path,
                                             const std::string& out_dir) {
#if !defined(DEEPBROADCAST_HAVE_ZLIB)
    (void)targz_path;
    (void)out_dir;
    throw std::runtime_error("built without zlib; cannot extract archives");
#else
    const auto tar = gunzip_file(targz_path);
    fs::create_directories(out_dir);
    std::vector<std::string> extracted;

    std::size_t off = 0;
    while (off + 512 <= tar.size()) {
        const char* hdr = tar.data() + off;
        bool all_zero = true;
        for (int i = 0; i < 512 && all_zero; ++i) all_zero = hdr[i] == 0;
        if (all_zero) break;

        char name[101] = {};
        std::memcpy(name, hdr, 100);
        const std::uint64_t size = parse_octal(hdr + 124, 12);
        const char type = hdr[156];
        off += 512;
        if (off + size > tar.size()) throw data_error("truncated tar stream in " + targz_path);

        const std::string member(name);
        if ((type == '0' || type == 0) && member.size() > 4 &&
            member.substr(member.size() - 4) == ".bin") {
            const std::string base = fs::path(member).filename().string();
            const std::string dest = out_dir + "/" + base;
            std::ofstream f(dest, std::ios::binary | std::ios::trunc);
            if (!f) throw std::runtime_error("cannot write " + dest);
            f.write(tar.data() + off, static_cast<std::streamsize>(size));
            extracted.push_back(dest);
        }
        off += (size + 511) / 512 * 512;
    }
    if (extracted.empty()) throw data_error("no .bin members found in " + targz_path);
    return extracted;
#endif
}

void download(const std::string& url, const std::string& dest_path) {
    const auto parts = split_url(url);
    std::string body;
    auto fetch_from = [&](const std::string& scheme, const std::string& host,
                          const std::string& path) -> httplib::Result {
        if (scheme == "https") {
#if defined(CPPHTTPLIB_OPENSSL_SUPPORT)
            httplib::SSLClient cli(host);
            cli.set_follow_location(true);
            cli.set_connection_timeout(30);
            cli.set_read_timeout(300);
            return cli.Get(path);
#else
            throw std::runtime_error("built without TLS support; use an http:// mirror");
#endif
        }
        httplib::Client cli(host);
        cli.set_follow_location(true);
        cli.set_connection_timeout(30);
        cli.set_read_timeout(300);
        return cli.Get(path);
    };
    auto res = fetch_from(parts.scheme, parts.host, parts.path);
    if (!res)
        throw std::runtime_error("download failed for " + url + ": " +
                                 httplib::to_string(res.error()));
    if (res->status != 200)
        throw std::runtime_error("download failed for " + url + ": HTTP " +
                                 std::to_string(res->status));
    std::ofstream out(dest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + dest_path);
    out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
    if (!out) throw std::runtime_error("short write for " + dest_path);
}

std::string fetch_cifar10(const std::string& url, const std::string& out_root) {
    fs::create_directories(out_root);
    const std::string archive = out_root + "/cifar-10-binary.tar.gz";
    download(url, archive);
    const std::string dir = out_root + "/cifar-10-batches-bin";
    extract_bin_members(archive, dir);
    return dir;
}

}  // namespace deepbroadcast::fetch
