#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "salsa/tensor.h"

namespace salsa {

/// Binary checkpoint container. All integers are little-endian.
///
///   magic        8 bytes  "SALSACKP"
///   version      u32      kCheckpointVersion
///   text count   u32
///   per text:    u32 name length, name bytes, u64 length, bytes
///   record count u32
///   per record:  u32 name length, name bytes, u32 rank, rank x u64 dims,
///                product(dims) x float64 (IEEE 754, little-endian)
///   checksum     u64      FNV-1a 64 over every preceding byte
struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct CheckpointFile {
  std::vector<std::pair<std::string, std::string>> texts;
  std::vector<CheckpointRecord> records;

  const std::string& text(const std::string& name) const;
  bool hasText(const std::string& name) const;
  const CheckpointRecord& record(const std::string& name) const;
  bool hasRecord(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encodeCheckpoint(const CheckpointFile& file);
/// IntegrityError on a bad magic, truncation, trailing bytes or checksum
/// mismatch; IntegrityError naming both versions on a version mismatch.
CheckpointFile decodeCheckpoint(const std::string& bytes);

void writeCheckpoint(const std::string& path, const CheckpointFile& file);
CheckpointFile readCheckpoint(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes, std::size_t length);

} // namespace salsa
