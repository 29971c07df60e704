#include <fstream>

#include <gtest/gtest.h>

#include "kdvqa/archive.h"
#include "kdvqa/error.h"
#include "test_util.h"

namespace kdvqa {
namespace {

NamedTensorArchive sample() {
  NamedTensorArchive a;
  a.tensors["b.weight"] = Tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  a.tensors["a.bias"] = Tensor({2}, {-0.5, 1e-7f});
  a.records["note"] = "hello";
  a.records["epoch"] = 4;
  return a;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST(Crc32, StandardCheckValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32_of(s.data(), s.size()), 0xCBF43926u);
  EXPECT_EQ(crc32_of(s.data(), 0), 0u);
}

TEST(Archive, RoundTrip) {
  testing::TempDir dir;
  const auto a = sample();
  write_archive(a, dir / "x.nta");
  const auto b = read_archive(dir / "x.nta");
  ASSERT_EQ(b.tensors.size(), 2u);
  for (const auto& [name, t] : a.tensors) {
    const auto& u = b.tensors.at(name);
    EXPECT_EQ(u.shape(), t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_EQ(u.data()[i], t.data()[i]);
  }
  EXPECT_EQ(b.records, a.records);
  const auto manifest = read_archive_manifest(dir / "x.nta");
  EXPECT_TRUE(manifest.contains("tensors"));
}

TEST(Archive, ReserializeIsByteStable) {
  const auto bytes = serialize_archive(sample());
  EXPECT_EQ(serialize_archive(deserialize_archive(bytes)), bytes);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "KDVQANTA");
}

TEST(Archive, CorruptedBufferIsChecksumError) {
  testing::TempDir dir;
  write_archive(sample(), dir / "x.nta");
  auto bytes = read_bytes(dir / "x.nta");
  bytes.back() ^= 0x40;
  write_bytes(dir / "x.nta", bytes);
  try {
    read_archive(dir / "x.nta");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChecksum);
  }
}

TEST(Archive, CorruptedManifestIsChecksumError) {
  auto bytes = serialize_archive(sample());
  bytes[30] ^= 0x01;
  try {
    deserialize_archive(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChecksum);
  }
}

TEST(Archive, BadMagicAndTruncationAreFormatErrors) {
  auto bytes = serialize_archive(sample());
  auto bad = bytes;
  bad[0] = 'X';
  try {
    deserialize_archive(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
  bytes.resize(10);
  try {
    deserialize_archive(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
}

TEST(Archive, MissingFileIsIoError) {
  testing::TempDir dir;
  try {
    read_archive(dir / "none.nta");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

}  // namespace
}  // namespace kdvqa
