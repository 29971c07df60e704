#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdvqa/tensor.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

// Named-tensor archive: a JSON manifest (tensor name -> shape, dtype, byte
// offset, byte count; plus free-form records) followed by one little-endian
// buffer holding every tensor in name order.
//
//   bytes 0..7    magic "KDVQANTA"
//   bytes 8..11   u32 format version
//   bytes 12..15  u32 CRC-32 of the manifest bytes
//   bytes 16..23  u64 manifest length
//   manifest      UTF-8 JSON, keys sorted
//   buffer        manifest["buffer_bytes"] bytes, CRC-32 in manifest["buffer_crc32"]
struct NamedTensorArchive {
  std::map<std::string, Tensor> tensors;
  nlohmann::json records = nlohmann::json::object();
};

inline constexpr std::uint32_t kArchiveVersion = 1;

std::vector<std::uint8_t> serialize_archive(const NamedTensorArchive& archive);
NamedTensorArchive deserialize_archive(const std::vector<std::uint8_t>& bytes,
                                       const std::string& origin = "archive");

void write_archive(const NamedTensorArchive& archive, const std::filesystem::path& path);
// Throws Error(kChecksum) on a manifest or buffer CRC mismatch and
// Error(kFormat) on structural damage.
NamedTensorArchive read_archive(const std::filesystem::path& path);

// Just the manifest; the buffer is not read or verified.
nlohmann::json read_archive_manifest(const std::filesystem::path& path);

std::uint32_t crc32_of(const void* data, std::size_t size);

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
