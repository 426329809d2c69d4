#include "skewflow/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "skewflow/rng.hpp"

namespace skewflow {

namespace fs = std::filesystem;

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    write_bytes(out, &v, sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ConfigError("truncated binary block");
    return v;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

void write_trajectory_csv(const fs::path& path, const TrajectoryGrid& grid,
                          const std::string& prefix) {
    std::ofstream out = open_out(path, std::ios::out | std::ios::trunc);
    out << "time";
    for (std::size_t c = 0; c < grid.dim; ++c) out << ',' << prefix << c;
    out << '\n';
    for (std::size_t k = 0; k < grid.size(); ++k) {
        out << format_g17(grid.time(k));
        auto s = grid.state(k);
        for (double v : s) out << ',' << format_g17(v);
        out << '\n';
    }
    if (!out) throw ConfigError("failed writing " + path.string());
}

void write_trajectory_binary(const fs::path& path, const TrajectoryGrid& grid) {
    std::ofstream out = open_out(path, std::ios::out | std::ios::trunc | std::ios::binary);
    write_bytes(out, "TRJ1", 4);
    write_pod(out, static_cast<std::uint32_t>(grid.dim));
    write_pod(out, static_cast<std::uint64_t>(grid.size()));
    write_pod(out, static_cast<std::uint8_t>(grid.time_frame == TimeFrame::Fast ? 1 : 0));
    write_pod(out, grid.t0);
    write_pod(out, grid.dt);
    write_bytes(out, grid.data.data(), grid.data.size() * sizeof(double));
    if (!out) throw ConfigError("failed writing " + path.string());
}

TrajectoryGrid read_trajectory_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TRJ1", 4) != 0)
        throw ConfigError(path.string() + ": not a TRJ1 block");
    TrajectoryGrid grid;
    grid.dim = read_pod<std::uint32_t>(in);
    const auto count = read_pod<std::uint64_t>(in);
    grid.time_frame = read_pod<std::uint8_t>(in) == 1 ? TimeFrame::Fast : TimeFrame::Slow;
    grid.t0 = read_pod<double>(in);
    grid.dt = read_pod<double>(in);
    grid.data.resize(count * grid.dim);
    in.read(reinterpret_cast<char*>(grid.data.data()),
            static_cast<std::streamsize>(grid.data.size() * sizeof(double)));
    if (!in) throw ConfigError(path.string() + ": truncated TRJ1 payload");
    return grid;
}

void write_mu_samples(const fs::path& path, const MuSamples& samples) {
    std::ofstream out = open_out(path, std::ios::out | std::ios::trunc | std::ios::binary);
    write_bytes(out, "MUS1", 4);
    write_pod(out, static_cast<std::uint32_t>(samples.ell));
    write_pod(out, static_cast<std::uint64_t>(samples.size()));
    write_pod(out, static_cast<std::uint8_t>(samples.correlated_warning ? 1 : 0));
    write_pod(out, samples.burn_in);
    write_pod(out, samples.spacing);
    write_pod(out, samples.seed);
    write_bytes(out, samples.states.data(), samples.states.size() * sizeof(double));
    if (!out) throw ConfigError("failed writing " + path.string());
}

MuSamples read_mu_samples(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MUS1", 4) != 0)
        throw ConfigError(path.string() + ": not a MUS1 block");
    MuSamples samples;
    samples.ell = read_pod<std::uint32_t>(in);
    const auto count = read_pod<std::uint64_t>(in);
    samples.correlated_warning = read_pod<std::uint8_t>(in) == 1;
    samples.burn_in = read_pod<double>(in);
    samples.spacing = read_pod<double>(in);
    samples.seed = read_pod<std::uint64_t>(in);
    samples.states.resize(count * samples.ell);
    in.read(reinterpret_cast<char*>(samples.states.data()),
            static_cast<std::streamsize>(samples.states.size() * sizeof(double)));
    if (!in) throw ConfigError(path.string() + ": truncated MUS1 payload");
    return samples;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::out | std::ios::trunc);
        if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw ConfigError("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::uint64_t hash_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string() + " for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got > 0) h = fnv1a64(buf, got, h);
    }
    return h;
}

}  // namespace skewflow
