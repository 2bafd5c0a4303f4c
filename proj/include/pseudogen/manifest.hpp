#pragma once

#include "core.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace pseudogen {

inline constexpr std::string_view kVersion = "0.1.0";

inline std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error("sha256: digest computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

/// Record of one command run. Output hashes depend only on the config and
/// the seed; wall-clock and thread count are informational.
struct RunManifest {
    struct Output {
        std::string file;
        std::string sha256;
    };

    std::string command;
    std::string config_source;
    std::string config_snapshot;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<std::string> warnings;
    std::vector<Output> outputs;
    std::vector<std::pair<std::string, std::string>> results;
    double wall_clock_seconds = 0.0;

    void warn(std::string message) { warnings.push_back(std::move(message)); }
    void result(std::string key, std::string value) { results.emplace_back(std::move(key), std::move(value)); }
    void result(std::string key, double value) { results.emplace_back(std::move(key), format_double(value)); }

    [[nodiscard]] const Output* find(std::string_view file) const {
        for (const auto& o : outputs) {
            if (o.file == file) {
                return &o;
            }
        }
        return nullptr;
    }

    [[nodiscard]] std::string text() const {
        std::ostringstream os;
        os << "command: " << command << '\n';
        os << "version: pseudogen " << kVersion << '\n';
        os << "config: " << config_source << '\n';
        os << "seed: " << seed << '\n';
        os << "threads: " << threads << '\n';
        os << "wall_clock_seconds: " << format_double(wall_clock_seconds) << '\n';
        std::istringstream snap(config_snapshot);
        for (std::string line; std::getline(snap, line);) {
            os << "config_value: " << line << '\n';
        }
        for (const auto& [k, v] : results) {
            os << "result: " << k << " = " << v << '\n';
        }
        for (const auto& w : warnings) {
            os << "warning: " << w << '\n';
        }
        for (const auto& o : outputs) {
            os << "file: " << o.file << " sha256=" << o.sha256 << '\n';
        }
        return os.str();
    }
};

/// Output directory that hashes every artifact it writes into the manifest.
class ArtifactWriter {
public:
    ArtifactWriter(std::filesystem::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(&manifest) {
        std::filesystem::create_directories(dir_);
    }

    /// Writes the text produced by `fill` to dir/name.
    template <class Fill>
    void write(const std::string& name, Fill&& fill) {
        std::ostringstream os;
        fill(os);
        const std::string content = os.str();
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) {
            throw Error("cannot write " + (dir_ / name).string());
        }
        out << content;
        manifest_->outputs.push_back({name, sha256_hex(content)});
    }

    void write_manifest() const {
        std::ofstream out(dir_ / "manifest.txt", std::ios::binary);
        if (!out) {
            throw Error("cannot write " + (dir_ / "manifest.txt").string());
        }
        out << manifest_->text();
    }

    [[nodiscard]] const std::filesystem::path& directory() const { return dir_; }

private:
    std::filesystem::path dir_;
    RunManifest* manifest_;
};

}  // namespace pseudogen
