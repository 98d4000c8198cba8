#include "posekit/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "posekit/errors.hpp"

namespace posekit {

uint64_t fnv1a64(const void* data, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    uint64_t hash = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot hash missing file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    char out[20];
    std::snprintf(out, sizeof(out), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return out;
}

void RunManifest::add_artifact(const std::string& path) {
    artifacts.emplace_back(path, file_hash_hex(path));
}

std::string manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["config"] = nlohmann::ordered_json::parse(m.config_json);
    j["seed"] = m.seed;
    j["artifacts"] = nlohmann::ordered_json::object();
    for (const auto& [path, hash] : m.artifacts) j["artifacts"][path] = hash;
    return j.dump(2);
}

void write_manifest(const std::string& path, const RunManifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write manifest: " + path);
    out << manifest_to_json(m) << "\n";
}

}  // namespace posekit
