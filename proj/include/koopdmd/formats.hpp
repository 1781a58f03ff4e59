// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_FORMATS_HPP
#define KOOPDMD_FORMATS_HPP

#include "koopdmd/dmdfit.hpp"
#include "koopdmd/snapshot.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace koopdmd {

/// Snapshot container, all integers and reals little-endian:
///
///   offset  size  field
///   0       4     magic "KPSS"
///   4       4     u32 version (1)
///   8       4     u32 flags: bit 0 rest block, bit 1 forcing block
///   12      8     u64 n (vertices)
///   20      8     u64 frame count T+1
///   28      8     f64 h
///   36      ...   (T+1) frames of 6n f64
///                 [rest block]    n x 3 f64, row-major
///                 [forcing block] T frames of 6n f64
inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Model container:
///
///   0       4     magic "KPDM"
///   4       4     u32 version (1)
///   8       8     u64 n (vertices; state dimension is 6n)
///   16      8     u64 r
///   24      8     f64 h
///   32      ...   Re(Phi), Im(Phi)      6n x r each, row-major
///                 Re(Lambda), Im(Lambda) r each
///                 U_r                   6n x r, row-major
///                 Re(phi), Im(phi)      r x r each, row-major
inline constexpr std::uint32_t kModelVersion = 1;

std::vector<std::uint8_t> encode_snapshots(const SnapshotSet& snaps);
SnapshotSet decode_snapshots(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_model(const KoopmanModel& model);
KoopmanModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_snapshots(const std::filesystem::path& path, const SnapshotSet& snaps);
SnapshotSet load_snapshots(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const KoopmanModel& model);
KoopmanModel load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace koopdmd

#endif
