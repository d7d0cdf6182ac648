#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcrl/error.hpp"

namespace fcrl {

constexpr const char* kCodeVersion = "fcrl 0.1.0";

// FNV-1a over raw bytes; used to fingerprint dataset files in manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for hashing: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

// One manifest per output directory; the config snapshot plus the seed is
// enough to reproduce the primary outputs bit-exactly.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    nlohmann::json dataset_hashes;  // input path -> fnv1a64 hex
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    double duration_seconds = 0.0;

    nlohmann::json to_json() const {
        return {{"command", command},
                {"config", config},
                {"dataset_hashes", dataset_hashes},
                {"code_version", kCodeVersion},
                {"seed", seed},
                {"outputs", outputs},
                {"duration_seconds", duration_seconds}};
    }
};

inline void write_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << m.to_json().dump(2) << "\n";
}

class WallClock {
public:
    WallClock() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace fcrl
