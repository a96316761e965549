#include "eegstack/binary_io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>

namespace eegstack::io {

void ByteWriter::str(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw DataError("string too long for container");
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void ByteReader::require(std::size_t n) const {
  if (n > remaining()) fail("truncated (need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) + ")");
}

void ByteReader::fail(const std::string& msg) const { throw DataError(what_ + ": " + msg); }

void ByteReader::expect_magic(std::string_view m) {
  require(m.size());
  if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0) fail("bad magic (expected \"" + std::string(m) + "\")");
  pos_ += m.size();
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  require(n);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace eegstack::io
