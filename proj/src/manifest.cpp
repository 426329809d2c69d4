#include "skewflow/manifest.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "skewflow/io.hpp"
#include "skewflow/types.hpp"

namespace skewflow {

namespace {

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, v);
    return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

std::string seed_list_hex(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) out += ',';
        out += hex64(seeds[i]);
    }
    return out;
}

void record_output(RunManifest& m, const std::filesystem::path& base,
                   const std::string& relpath) {
    OutputRecord rec;
    rec.relpath = relpath;
    const auto full = base / relpath;
    rec.bytes = static_cast<std::uint64_t>(std::filesystem::file_size(full));
    rec.fnv64 = hash_file(full);
    m.outputs.push_back(std::move(rec));
}

void write_manifest_atomic(const std::filesystem::path& path, const RunManifest& m) {
    std::ostringstream out;
    out << "manifest_version: " << m.manifest_version << '\n';
    out << "tool_version: " << m.tool_version << '\n';
    out << "command: " << m.command << '\n';
    out << "config_hash: " << hex64(m.config_hash) << '\n';
    out << "root_seed: " << m.root_seed << '\n';
    out << "wall_seconds: " << format_g17(m.wall_seconds) << '\n';
    for (const auto& [tag, list] : m.seeds) out << "seeds." << tag << ": " << list << '\n';
    for (const auto& rec : m.outputs)
        out << "output: " << rec.bytes << ' ' << hex64(rec.fnv64) << ' '
            << rec.relpath << '\n';
    out << "config_begin\n" << m.config_text;
    if (!m.config_text.empty() && m.config_text.back() != '\n') out << '\n';
    out << "config_end\n";
    write_text_atomic(path, out.str());
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest " + path.string());
    RunManifest m;
    std::string line;
    bool in_config = false;
    while (std::getline(in, line)) {
        if (in_config) {
            if (line == "config_end") {
                in_config = false;
                continue;
            }
            m.config_text += line;
            m.config_text += '\n';
            continue;
        }
        if (line == "config_begin") {
            in_config = true;
            continue;
        }
        const auto colon = line.find(": ");
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        const std::string value = line.substr(colon + 2);
        if (key == "manifest_version") {
            m.manifest_version = std::strtoull(value.c_str(), nullptr, 10);
        } else if (key == "tool_version") {
            m.tool_version = value;
        } else if (key == "command") {
            m.command = value;
        } else if (key == "config_hash") {
            m.config_hash = parse_hex64(value);
        } else if (key == "root_seed") {
            m.root_seed = std::strtoull(value.c_str(), nullptr, 10);
        } else if (key == "wall_seconds") {
            m.wall_seconds = std::strtod(value.c_str(), nullptr);
        } else if (key.rfind("seeds.", 0) == 0) {
            m.seeds.emplace_back(key.substr(6), value);
        } else if (key == "output") {
            std::istringstream fields(value);
            OutputRecord rec;
            std::string hash;
            fields >> rec.bytes >> hash;
            std::getline(fields, rec.relpath);
            const auto b = rec.relpath.find_first_not_of(' ');
            if (b != std::string::npos) rec.relpath = rec.relpath.substr(b);
            rec.fnv64 = parse_hex64(hash);
            m.outputs.push_back(std::move(rec));
        }
    }
    if (m.manifest_version != 1)
        throw ConfigError("unsupported manifest version in " + path.string());
    return m;
}

}  // namespace skewflow
