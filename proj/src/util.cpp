#include "gamepred/util.hpp"

#include "gamepred/errors.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gamepred {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("SHA-256 digest computation failed");
    }
    EVP_MD_CTX_free(ctx);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const std::string& path, std::string_view content) {
    static std::atomic<unsigned> counter{0};
    std::string tmp = fmt::format("{}.tmp.{}", path, counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(fmt::format("cannot write '{}'", tmp));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(fmt::format("short write to '{}'", tmp));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error(fmt::format("cannot rename '{}' to '{}': {}", tmp, path, ec.message()));
    }
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw Error(fmt::format("cannot create directory '{}': {}", path, ec.message()));
}

} // namespace gamepred
