#include "kdvqa/archive.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

#include <zlib.h>

#include "kdvqa/error.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {
namespace {

constexpr char kMagic[8] = {'K', 'D', 'V', 'Q', 'A', 'N', 'T', 'A'};
constexpr std::size_t kHeaderBytes = 24;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(p[i]) << (8 * i);
  return value;
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  fail(ErrorCode::kFormat, "unsupported dtype '" + dtype + "'");
}

}  // namespace

std::uint32_t crc32_of(const void* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* bytes = static_cast<const Bytef*>(data);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, bytes, chunk);
    bytes += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize_archive(const NamedTensorArchive& archive) {
  std::vector<std::uint8_t> buffer;
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, tensor] : archive.tensors) {
    const std::size_t offset = buffer.size();
    using Bits = std::conditional_t<sizeof(Real) == 4, std::uint32_t, std::uint64_t>;
    for (Real v : tensor.data()) put_le(buffer, std::bit_cast<Bits>(v));
    tensors[name] = {{"shape", tensor.shape()},
                     {"dtype", std::string(kRealDtype)},
                     {"offset", offset},
                     {"nbytes", buffer.size() - offset}};
  }
  nlohmann::json manifest = {{"format", "kdvqa-named-tensors"},
                             {"tensors", tensors},
                             {"records", archive.records},
                             {"buffer_bytes", buffer.size()},
                             {"buffer_crc32", crc32_of(buffer.data(), buffer.size())}};
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kArchiveVersion);
  put_le<std::uint32_t>(out, crc32_of(text.data(), text.size()));
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), buffer.begin(), buffer.end());
  return out;
}

namespace {

nlohmann::json parse_manifest(const std::uint8_t* bytes, std::size_t available,
                              const std::string& origin, std::size_t* manifest_end) {
  if (available < kHeaderBytes || std::memcmp(bytes, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::kFormat, origin + ": not a named-tensor archive");
  }
  const auto version = get_le<std::uint32_t>(bytes + 8);
  if (version != kArchiveVersion) {
    fail(ErrorCode::kFormat, origin + ": unsupported archive version " + std::to_string(version));
  }
  const auto expected_crc = get_le<std::uint32_t>(bytes + 12);
  const auto length = get_le<std::uint64_t>(bytes + 16);
  if (length > available - kHeaderBytes) fail(ErrorCode::kFormat, origin + ": truncated manifest");
  const auto* text = bytes + kHeaderBytes;
  if (crc32_of(text, length) != expected_crc) {
    fail(ErrorCode::kChecksum, origin + ": manifest checksum mismatch");
  }
  *manifest_end = kHeaderBytes + length;
  try {
    return nlohmann::json::parse(text, text + length);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, origin + ": manifest is not valid JSON: " + e.what());
  }
}

}  // namespace

NamedTensorArchive deserialize_archive(const std::vector<std::uint8_t>& bytes,
                                       const std::string& origin) {
  std::size_t manifest_end = 0;
  const auto manifest = parse_manifest(bytes.data(), bytes.size(), origin, &manifest_end);
  NamedTensorArchive archive;
  try {
    const auto buffer_bytes = manifest.at("buffer_bytes").get<std::size_t>();
    if (bytes.size() - manifest_end != buffer_bytes) {
      fail(ErrorCode::kFormat, origin + ": buffer length " + std::to_string(bytes.size() - manifest_end) +
                                   " does not match manifest (" + std::to_string(buffer_bytes) + ")");
    }
    const std::uint8_t* buffer = bytes.data() + manifest_end;
    if (crc32_of(buffer, buffer_bytes) != manifest.at("buffer_crc32").get<std::uint32_t>()) {
      fail(ErrorCode::kChecksum, origin + ": tensor buffer checksum mismatch");
    }
    for (const auto& [name, entry] : manifest.at("tensors").items()) {
      const auto shape = entry.at("shape").get<Shape>();
      const auto dtype = entry.at("dtype").get<std::string>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("nbytes").get<std::size_t>();
      const std::size_t width = dtype_size(dtype);
      const std::size_t count = shape_numel(shape);
      if (nbytes != count * width || offset > buffer_bytes || nbytes > buffer_bytes - offset) {
        fail(ErrorCode::kFormat, origin + ": tensor '" + name + "' has an inconsistent extent");
      }
      std::vector<Real> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::uint8_t* p = buffer + offset + i * width;
        values[i] = width == 4 ? static_cast<Real>(std::bit_cast<float>(get_le<std::uint32_t>(p)))
                               : static_cast<Real>(std::bit_cast<double>(get_le<std::uint64_t>(p)));
      }
      archive.tensors.emplace(name, Tensor(shape, std::move(values)));
    }
    archive.records = manifest.value("records", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, origin + ": malformed manifest: " + e.what());
  }
  return archive;
}

void write_archive(const NamedTensorArchive& archive, const std::filesystem::path& path) {
  const auto bytes = serialize_archive(archive);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

NamedTensorArchive read_archive(const std::filesystem::path& path) {
  return deserialize_archive(read_bytes(path), path.filename().string());
}

nlohmann::json read_archive_manifest(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  std::size_t end = 0;
  return parse_manifest(bytes.data(), bytes.size(), path.filename().string(), &end);
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
