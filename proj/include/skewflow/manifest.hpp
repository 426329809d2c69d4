#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace skewflow {

struct OutputRecord {
    std::string relpath;
    std::uint64_t bytes = 0;
    std::uint64_t fnv64 = 0;
};

// Reproducibility record for one CLI run: the exact config, the seed
// derivation inputs, and a hash inventory of every data output. Written
// atomically at run end so an interrupted run leaves no manifest.
struct RunManifest {
    std::uint64_t manifest_version = 1;
    std::string tool_version;
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t root_seed = 0;
    double wall_seconds = 0.0;
    // pipeline tag -> comma-joined hex child seeds
    std::vector<std::pair<std::string, std::string>> seeds;
    std::vector<OutputRecord> outputs;
    std::string config_text;
};

void write_manifest_atomic(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

// hashes `relpath` under `base` and appends an inventory record
void record_output(RunManifest& m, const std::filesystem::path& base,
                   const std::string& relpath);

std::string seed_list_hex(const std::vector<std::uint64_t>& seeds);

}  // namespace skewflow
