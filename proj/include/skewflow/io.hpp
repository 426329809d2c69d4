#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "skewflow/measure.hpp"
#include "skewflow/ode.hpp"

namespace skewflow {

// 17 significant digits: enough for exact double round-trips, so replay
// comparisons can be byte-level.
std::string format_g17(double v);

// header "time,<prefix>0,<prefix>1,..."
void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryGrid& grid, const std::string& prefix);

// "TRJ1" block, little-endian:
//   magic[4] | u32 dim | u64 count | u8 frame (0 slow, 1 fast)
//   | f64 t0 | f64 dt | count*dim f64 states (row-major)
void write_trajectory_binary(const std::filesystem::path& path,
                             const TrajectoryGrid& grid);
TrajectoryGrid read_trajectory_binary(const std::filesystem::path& path);

// "MUS1" block, little-endian:
//   magic[4] | u32 ell | u64 count | u8 correlated_warning
//   | f64 burn_in | f64 spacing | u64 seed | count*ell f64 states
void write_mu_samples(const std::filesystem::path& path, const MuSamples& samples);
MuSamples read_mu_samples(const std::filesystem::path& path);

// write-to-temp-then-rename so interrupted runs leave no partial file
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

std::uint64_t hash_file(const std::filesystem::path& path);

}  // namespace skewflow
