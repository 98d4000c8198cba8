#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace posekit {

uint64_t fnv1a64(const void* data, size_t n);
std::string file_hash_hex(const std::string& path);

/// Reproducibility record written next to command outputs: the resolved
/// configuration plus a content hash per artifact.
struct RunManifest {
    std::string command;
    std::string config_json;  // resolved config as a JSON object
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> artifacts;  // path -> hash

    void add_artifact(const std::string& path);
};

std::string manifest_to_json(const RunManifest& m);
void write_manifest(const std::string& path, const RunManifest& m);

}  // namespace posekit
